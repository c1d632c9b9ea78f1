"""Scott-Zhang type quasi-interpolation on simplicial meshes, defined on negative Sobolev data."""
from .alt_ops import ClementInterpolator, L2Projector, apply_clement, apply_Pi2
from .dualbasis import DualBasisError, DualBasisTable, solve_dual_basis, verify_dual_basis
from .fespace import FEFunction, LagrangeSpace, norm
from .functional import DualFunctional, bernstein_moments, pair
from .mesh import (
    MeshError,
    SimplicialMesh,
    build_mesh,
    interval,
    interval_from_points,
    local_refine_1d,
    read_mesh,
    refine_n,
    square,
    uniform_refine,
    write_mesh,
)
from .negnorm import NegativeNormEvaluator, neg_norm_global, neg_norm_patch
from .sz_ops import (
    BoundaryCorrectionError,
    ScottZhangInterpolator,
    apply_P_raw,
    apply_Pi,
    apply_Pi0,
    apply_Pi0_star,
    apply_Pi_star,
)
from .timespace import AvgTaylor, TensorInterpolator, TimeMesh, taylor_avg

__version__ = "0.1.0"

__all__ = [
    "AvgTaylor",
    "BoundaryCorrectionError",
    "ClementInterpolator",
    "DualBasisError",
    "DualBasisTable",
    "DualFunctional",
    "FEFunction",
    "L2Projector",
    "LagrangeSpace",
    "MeshError",
    "NegativeNormEvaluator",
    "ScottZhangInterpolator",
    "SimplicialMesh",
    "TensorInterpolator",
    "TimeMesh",
    "apply_P_raw",
    "apply_Pi",
    "apply_Pi0",
    "apply_Pi0_star",
    "apply_Pi2",
    "apply_Pi_star",
    "apply_clement",
    "bernstein_moments",
    "build_mesh",
    "interval",
    "interval_from_points",
    "local_refine_1d",
    "neg_norm_global",
    "neg_norm_patch",
    "norm",
    "pair",
    "read_mesh",
    "refine_n",
    "solve_dual_basis",
    "square",
    "taylor_avg",
    "uniform_refine",
    "verify_dual_basis",
    "write_mesh",
]
