"""Collision certificates for CPwL Janossy pooling and an injective grid encoder for separated multisets."""

__version__ = "0.1.0"

from .cpwl import AffineMap, ExplicitPartition, HPolytope, ReluNet, continuity_check  # noqa: E402
from .grid_codec import GridCodec, bilip_estimate, build_codec, decode, encode  # noqa: E402
from .janossy import PoolingSpec, janossy_pool, janossy_pool_ascending, symmetrize  # noqa: E402
from .multiset import Multiset, canonicalize, domain_separation, min_separation, wasserstein  # noqa: E402
from .witness import (  # noqa: E402
    CollisionCert,
    NestedPointCert,
    check_nested,
    collision_delta,
    find_collision,
    nested_point,
    tuple_system_coeffs,
    verify_collision,
)

__all__ = [
    "AffineMap", "ExplicitPartition", "HPolytope", "ReluNet", "continuity_check",
    "GridCodec", "bilip_estimate", "build_codec", "decode", "encode",
    "PoolingSpec", "janossy_pool", "janossy_pool_ascending", "symmetrize",
    "Multiset", "canonicalize", "domain_separation", "min_separation", "wasserstein",
    "CollisionCert", "NestedPointCert", "check_nested", "collision_delta", "find_collision",
    "nested_point", "tuple_system_coeffs", "verify_collision",
]
