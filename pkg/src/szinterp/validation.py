"""Input checks shared by the estimator classes."""
from __future__ import annotations

import numbers

from sklearn.utils.validation import check_is_fitted

from .fespace import FEFunction
from .functional import DualFunctional, as_functional
from .mesh import SimplicialMesh

SUPPORTED_DEGREES = (1, 2, 3)


def check_mesh(mesh) -> SimplicialMesh:
    if not isinstance(mesh, SimplicialMesh):
        raise TypeError(f"expected a SimplicialMesh, got {type(mesh).__name__}")
    if mesh.d not in (1, 2):
        raise ValueError(f"only d in (1, 2) is supported, got d={mesh.d}")
    return mesh


def check_degree(k, name: str = "degree") -> int:
    if not isinstance(k, numbers.Integral) or isinstance(k, bool):
        raise TypeError(f"{name} must be an integer, got {k!r}")
    if k not in SUPPORTED_DEGREES:
        raise ValueError(f"{name} must be one of {SUPPORTED_DEGREES}, got {k}")
    return int(k)


def check_choice(value, choices, name: str):
    if value not in choices:
        raise ValueError(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value


def check_functional(xi) -> DualFunctional:
    return as_functional(xi)


def check_density_only(xi) -> DualFunctional:
    xi = as_functional(xi)
    if not xi.is_density_only:
        raise ValueError("this operator accepts integrable densities only (no flux or atom parts)")
    return xi


def check_fe_on(f, mesh: SimplicialMesh) -> FEFunction:
    if not isinstance(f, FEFunction):
        raise TypeError(f"expected an FEFunction, got {type(f).__name__}")
    if f.mesh is not mesh:
        raise ValueError("FE function lives on a different mesh")
    return f


__all__ = [
    "check_choice",
    "check_degree",
    "check_density_only",
    "check_fe_on",
    "check_functional",
    "check_is_fitted",
    "check_mesh",
]
