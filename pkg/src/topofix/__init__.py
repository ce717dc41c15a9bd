"""Malfunction detection, minimum fixation and address autoconfiguration
for FatTree data-center wiring."""

from .blueprint import (
    FatTreeParams,
    Role,
    RoleAssignment,
    RoleKind,
    canonical_roles,
    connected,
    expected_adjacency,
    generate_blueprint,
    infer_k,
    logical_id,
)
from .graph import DeviceGraph, degree, hamming_distance, row_fingerprint, similarity

__version__ = "0.1.0"
