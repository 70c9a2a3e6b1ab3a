import os

import pytest
from hypothesis import HealthCheck, settings

from jacobilie.catalog import instantiate, load_catalog

settings.register_profile("ci", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def structure(catalog):
    """instantiate(entry id, **params), cached per call signature."""
    cache = {}

    def get(entry_id, **params):
        key = (entry_id, tuple(sorted(params.items())))
        if key not in cache:
            cache[key] = instantiate(catalog[entry_id], params or None)
        return cache[key]

    return get
