"""Shared fixtures: radius calibrations and topologies are expensive at
300 nodes, so they are cached once per session and shared across tests."""

import pytest

from meshmac import calibrate_radius, generate_random

AREA = 100.0


@pytest.fixture(scope="session")
def radius_cache():
    cache = {}

    def get(n, target, tolerance, seed, formula="receiver_centric"):
        key = (n, target, tolerance, seed, formula)
        if key not in cache:
            cache[key] = calibrate_radius(
                n, AREA, seed, target, tolerance=tolerance, formula=formula
            )
        return cache[key]

    return get


@pytest.fixture(scope="session")
def topo_cache(radius_cache):
    cache = {}

    def get(n, target, tolerance, seed):
        key = (n, target, tolerance, seed)
        if key not in cache:
            res = radius_cache(n, target, tolerance, seed)
            cache[key] = generate_random(n, AREA, res.comm_radius, seed)
        return cache[key]

    return get
