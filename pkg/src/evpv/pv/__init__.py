"""Photovoltaic production model."""
from .irradiance import angular_loss, diffuse_angular_loss, effective_irradiance, poa_irradiance
from .model import PVProfile, PVSystemSpec, cell_temperature, optimal_orientation, pv_power, pv_profile
from .solar import solar_position
from .weather import (WeatherSeries, fetch_pvgis_hourly, parse_pvgis_json, read_weather, read_weather_csv,
                      write_weather_csv)

__all__ = [
    "angular_loss", "diffuse_angular_loss", "effective_irradiance", "poa_irradiance",
    "PVProfile", "PVSystemSpec", "cell_temperature", "optimal_orientation", "pv_power", "pv_profile",
    "solar_position", "WeatherSeries", "fetch_pvgis_hourly", "parse_pvgis_json", "read_weather",
    "read_weather_csv", "write_weather_csv",
]
