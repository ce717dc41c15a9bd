import functools

import pytest
from hypothesis import HealthCheck, settings

from topofix.blueprint import generate_blueprint

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def blueprint(k):
    return generate_blueprint(k)


@pytest.fixture
def fat4():
    return blueprint(4)


@pytest.fixture
def fat8():
    return blueprint(8)


def relabel(g, mapping):
    """Copy of ``g`` with node ``v`` renamed ``mapping[v]`` (a permutation)."""
    import numpy as np

    from topofix.graph import DeviceGraph

    perm = np.asarray(mapping)
    ids = [None] * g.n
    for old, new in enumerate(perm):
        ids[new] = g.device_ids[old]
    return DeviceGraph(g.n, perm[g.edges], ids)


def swapped_pair_instance():
    """A k=4 blueprint relabelled so that (1,5) and (4,6) are correct links,
    plus the miswired copy where they became (1,6) and (4,5)."""
    from topofix.injector import swap_links

    g, _ = blueprint(4)
    wanted = {g.index_of("agg-1"): 1, g.index_of("core-1"): 5, g.index_of("agg-2"): 4, g.index_of("core-3"): 6}
    free = iter(v for v in range(g.n) if v not in wanted.values())
    mapping = [wanted[v] if v in wanted else next(free) for v in range(g.n)]
    correct = relabel(g, mapping)
    miswired, diff = swap_links(correct, (1, 5), (4, 6))
    return correct, miswired, diff
