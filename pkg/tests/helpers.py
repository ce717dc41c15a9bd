import numpy as np

from topofix.blueprint import RoleKind, expected_adjacency
from topofix.injector import MalfunctionSpec, inject

from .conftest import blueprint


def injected(k, x, seed, **kw):
    g, a = blueprint(k)
    spec = MalfunctionSpec.mixed(x, seed) if not kw else MalfunctionSpec(seed=seed, **kw)
    out, diff = inject(g, spec)
    return g, a, out, diff


def same_up_to_automorphism(assignment, truth_graph):
    """Two assignments agree up to a blueprint automorphism exactly when
    they imply the same graph."""
    return expected_adjacency(assignment) == truth_graph


def nodes(a, kind):
    return set(np.asarray(a.nodes_of_kind(kind)).tolist())


KINDS = (RoleKind.SERVER, RoleKind.EDGE, RoleKind.AGGREGATE, RoleKind.CORE)
