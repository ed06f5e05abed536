"""Plane-of-array irradiance (isotropic sky) and Martin-Ruiz incidence-angle losses."""
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


def angle_of_incidence(tilt, surface_azimuth, zenith, azimuth):
    """Angle (deg) between the sun vector and the module normal."""
    t, sa, z, a = (np.radians(v) for v in (tilt, surface_azimuth, zenith, azimuth))
    c = np.cos(z) * np.cos(t) + np.sin(z) * np.sin(t) * np.cos(a - sa)
    return np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))


def angular_loss(aoi, a_r=0.16):
    """Martin-Ruiz beam transmittance modifier, 1 at normal incidence, 0 at >= 90 deg."""
    if a_r <= 0:
        raise ConfigError("a_r must be positive")
    aoi = np.asarray(aoi, dtype=float)
    c = np.cos(np.radians(np.minimum(aoi, 90.0)))
    iam = (1 - np.exp(-c / a_r)) / (1 - np.exp(-1 / a_r))
    return np.where(aoi >= 90.0, 0.0, iam)


def diffuse_angular_loss(tilt, a_r=0.16):
    """Closed-form Martin-Ruiz factors for isotropic sky and ground diffuse light.

    Returns ``(sky, ground)`` transmittance factors for a module tilted ``tilt`` deg.
    """
    if a_r <= 0:
        raise ConfigError("a_r must be positive")
    b = np.radians(np.clip(np.asarray(tilt, dtype=float), 1e-6, 180 - 1e-6))
    c1 = 4.0 / (3.0 * np.pi)
    c2 = 0.5 * a_r - 0.154
    sin_b = np.sin(b)
    sky_term = sin_b + (np.pi - b - sin_b) / (1 + np.cos(b))
    gnd_term = sin_b + (b - sin_b) / (1 - np.cos(b))
    sky = 1 - np.exp(-(c1 + c2 * sky_term) * sky_term / a_r)
    gnd = 1 - np.exp(-(c1 + c2 * gnd_term) * gnd_term / a_r)
    return sky, gnd


@dataclass
class POAComponents:
    beam: np.ndarray
    sky: np.ndarray
    ground: np.ndarray
    aoi: np.ndarray

    @property
    def total(self):
        return self.beam + self.sky + self.ground


def poa_irradiance(tilt, surface_azimuth, zenith, azimuth, ghi, dni, dhi, albedo=0.2) -> POAComponents:
    """Isotropic-sky transposition of horizontal irradiance onto a tilted plane.

    Azimuths are clockwise from north (180 = south-facing).
    """
    if not 0 <= tilt <= 90:
        raise ConfigError("tilt must lie in [0, 90] deg")
    aoi = angle_of_incidence(tilt, surface_azimuth, zenith, azimuth)
    up = np.asarray(zenith) < 90.0
    beam = np.where(up, np.asarray(dni, float) * np.maximum(np.cos(np.radians(aoi)), 0.0), 0.0)
    ct = np.cos(np.radians(tilt))
    sky = np.asarray(dhi, float) * (1 + ct) / 2
    ground = np.asarray(ghi, float) * albedo * (1 - ct) / 2
    return POAComponents(beam=beam, sky=sky, ground=ground, aoi=aoi)


def effective_irradiance(poa: POAComponents, tilt, a_r=0.16, diffuse_iam=True):
    """Irradiance reaching the cells after incidence-angle losses."""
    out = poa.beam * angular_loss(poa.aoi, a_r)
    if diffuse_iam:
        fs, fg = diffuse_angular_loss(tilt, a_r)
        return out + poa.sky * fs + poa.ground * fg
    return out + poa.sky + poa.ground
