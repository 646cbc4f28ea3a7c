import pytest
from hypothesis import settings

from coopvod.catalog import build_catalog
from coopvod.topology import build_topology

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def small_world():
    """J=3, M=3 rings over a 10-video catalog of 60-minute videos."""
    catalog, popularity = build_catalog(10, 60.0, alpha=0.986, total_rate=1.0)
    return catalog, popularity, build_topology(3, 3)
