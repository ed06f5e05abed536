"""HTTP routing-matrix adapter (openrouteservice-style ``/v2/matrix`` API).

Requests are split into blocks of at most ``max_locations`` coordinates,
sent concurrently up to ``max_concurrency`` and retried with exponential
backoff. Unroutable pairs (``null`` in the response) become NaN.
"""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import httpx
import numpy as np

from .errors import ExternalServiceError
from .mobility import DistanceProvider

log = logging.getLogger(__name__)


@dataclass
class RoutingConfig:
    base_url: str = "https://api.openrouteservice.org"
    api_key_env: str = "ORS_API_KEY"
    profile: str = "driving-car"
    timeout: float = 30.0
    max_locations: int = 50
    max_concurrency: int = 4
    attempts: int = 3
    backoff: float = 1.0


class HTTPMatrixRouter(DistanceProvider):
    def __init__(self, config: RoutingConfig | None = None, client: httpx.Client | None = None,
                 sleep=time.sleep):
        self.config = config or RoutingConfig()
        headers = {}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = key
        self._client = client or httpx.Client(base_url=self.config.base_url, timeout=self.config.timeout)
        self._headers = headers
        self._sleep = sleep

    def _post(self, body):
        url = f"{self.config.base_url.rstrip('/')}/v2/matrix/{self.config.profile}"
        last = None
        for attempt in range(self.config.attempts):
            try:
                resp = self._client.post(url, json=body, headers=self._headers)
                if resp.status_code == 200:
                    return resp.json()
                last = f"HTTP {resp.status_code}"
                if resp.status_code < 500 and resp.status_code != 429:
                    break
            except httpx.HTTPError as exc:
                last = repr(exc)
            if attempt + 1 < self.config.attempts:
                self._sleep(self.config.backoff * 2 ** attempt)
        raise ExternalServiceError(f"routing request failed: {last}")

    def _block(self, sources, targets):
        locs = np.vstack([sources, targets])
        ns = len(sources)
        body = {
            "locations": locs.tolist(),
            "sources": list(range(ns)),
            "destinations": list(range(ns, len(locs))),
            "metrics": ["distance"],
            "units": "km",
        }
        data = self._post(body)
        vals = [[np.nan if v is None else float(v) for v in row] for row in data["distances"]]
        out = np.asarray(vals, dtype=float)
        if out.shape != (ns, len(targets)):
            raise ExternalServiceError(f"unexpected matrix shape {out.shape}")
        return out

    def matrix(self, sources, targets) -> np.ndarray:
        sources = np.asarray(sources, dtype=float).reshape(-1, 2)
        targets = np.asarray(targets, dtype=float).reshape(-1, 2)
        half = max(1, self.config.max_locations // 2)
        jobs = [(i, j) for i in range(0, len(sources), half) for j in range(0, len(targets), half)]
        out = np.full((len(sources), len(targets)), np.nan)

        def run(job):
            i, j = job
            return job, self._block(sources[i:i + half], targets[j:j + half])

        with ThreadPoolExecutor(max_workers=self.config.max_concurrency) as pool:
            for (i, j), block in pool.map(run, jobs):
                out[i:i + block.shape[0], j:j + block.shape[1]] = block
        return out

    def close(self):
        self._client.close()
