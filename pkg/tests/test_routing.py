import json

import httpx
import numpy as np
import pytest

from evpv import mobility as M
from evpv.errors import ExternalServiceError
from evpv.routing import HTTPMatrixRouter, RoutingConfig


def euclid_deg(locs, src, dst):
    a = np.asarray(locs)[src]
    b = np.asarray(locs)[dst]
    return np.hypot(*(a[:, None, :] - b[None, :, :]).transpose(2, 0, 1)) * 100.0


def make_router(handler, **cfg):
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return HTTPMatrixRouter(RoutingConfig(**cfg), client=client, sleep=lambda s: None)


def test_blocks_cover_whole_matrix():
    seen = []

    def handler(req):
        body = json.loads(req.content)
        seen.append(len(body["locations"]))
        d = euclid_deg(body["locations"], body["sources"], body["destinations"])
        return httpx.Response(200, json={"distances": d.tolist()})

    r = make_router(handler, max_locations=6)
    pts = np.column_stack([np.linspace(38.7, 38.8, 7), np.linspace(9.0, 9.05, 7)])
    out = r.matrix(pts, pts)
    np.testing.assert_allclose(out, euclid_deg(pts, range(7), range(7)), rtol=1e-12)
    assert max(seen) <= 6 and len(seen) == 9


def test_retries_then_succeeds():
    calls = {"n": 0}

    def handler(req):
        calls["n"] += 1
        if calls["n"] < 3:
            return httpx.Response(503)
        return httpx.Response(200, json={"distances": [[1.5]]})

    r = make_router(handler, attempts=3)
    assert r.matrix([[38.7, 9.0]], [[38.8, 9.0]])[0, 0] == 1.5
    assert calls["n"] == 3


def test_gives_up_after_attempts():
    r = make_router(lambda req: httpx.Response(502), attempts=3)
    with pytest.raises(ExternalServiceError):
        r.matrix([[38.7, 9.0]], [[38.8, 9.0]])


def test_client_error_not_retried():
    calls = {"n": 0}

    def handler(req):
        calls["n"] += 1
        return httpx.Response(403)

    with pytest.raises(ExternalServiceError, match="403"):
        make_router(handler).matrix([[38.7, 9.0]], [[38.8, 9.0]])
    assert calls["n"] == 1


def test_transport_error_retried():
    calls = {"n": 0}

    def handler(req):
        calls["n"] += 1
        if calls["n"] == 1:
            raise httpx.ConnectError("boom")
        return httpx.Response(200, json={"distances": [[2.0]]})

    assert make_router(handler).matrix([[0, 0]], [[1, 1]])[0, 0] == 2.0


def test_null_becomes_nan_and_circuity_fills_in(case):
    def handler(req):
        body = json.loads(req.content)
        d = euclid_deg(body["locations"], body["sources"], body["destinations"]).tolist()
        d[0][1] = None
        return httpx.Response(200, json={"distances": d})

    r = make_router(handler, max_locations=400)
    g = case.grid
    D = M.distance_matrix(g, r, M.CircuityModel(1.3))
    assert D.source[0, 1] == M.CIRCUITY and D.source[1, 0] == M.ROUTED
    assert D.d[0, 1] == pytest.approx(1.3 * M.euclidean_matrix(g)[0, 1])


def test_api_key_header(monkeypatch):
    monkeypatch.setenv("ORS_API_KEY", "secret")
    got = {}

    def handler(req):
        got["auth"] = req.headers.get("authorization")
        return httpx.Response(200, json={"distances": [[1.0]]})

    make_router(handler).matrix([[0, 0]], [[1, 1]])
    assert got["auth"] == "secret"
