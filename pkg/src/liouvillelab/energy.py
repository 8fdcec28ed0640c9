"""Energy functionals on a conformal class: evaluation and first variation.

Conventions: the unknown u is a per-vertex log density, the candidate
metric is exp(u) times the working metric, volumes use the metric masses,
and every exponential moment is evaluated with a max-shift so large fields
cannot overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError
from .mesh import FOUR_PI, DiscreteOperators, ScalarField, dirichlet_energy, integrate

EIGHT_PI = 8.0 * np.pi


@dataclass(frozen=True)
class EnergyBreakdown:
    """Value of a functional split into its three constituent terms.

    Each part is stored with the coefficient it carries inside the total,
    so ``dirichlet + curvature_term + log_volume_term == total`` always.
    """

    dirichlet: float
    curvature_term: float
    log_volume_term: float
    total: float

    def as_dict(self) -> dict:
        return {
            "dirichlet": self.dirichlet,
            "curvature_term": self.curvature_term,
            "log_volume_term": self.log_volume_term,
            "total": self.total,
        }


def _check_field(ops: DiscreteOperators, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.shape != ops.mass.shape:
        raise DataError("field length does not match the mesh")
    if not np.isfinite(u).all():
        raise DataError("field contains non-finite entries")
    return u


def _check_epsilon(epsilon: float) -> float:
    if not np.isfinite(epsilon) or not 0.0 < epsilon < EIGHT_PI:
        raise ParameterError(f"epsilon must lie in (0, 8*pi), got {epsilon}")
    return float(epsilon)


def log_volume(ops: DiscreteOperators, u: np.ndarray) -> float:
    """ln of the candidate-metric volume integral exp(u) dV, overflow-safe."""
    u = _check_field(ops, u)
    shift = float(u.max())
    return shift + float(np.log((np.exp(u - shift) * ops.mass).sum()))


def liouville_energy(ops: DiscreteOperators, u: np.ndarray) -> EnergyBreakdown:
    """Dirichlet part plus twice the scalar-curvature pairing.

    total = int |grad u|^2 + 2 int R u with R = 2 K.  The zero field gives
    zero, and adding a constant c shifts the value by exactly 16*pi*c
    (Gauss-Bonnet); the descent dynamics of this functional at fixed volume
    is the normalized flow in :mod:`liouvillelab.flow`.
    """
    u = _check_field(ops, u)
    dir_part = dirichlet_energy(ops, u)
    curv_part = 4.0 * integrate(ops, ops.curvature * u)
    return EnergyBreakdown(dir_part, curv_part, 0.0, dir_part + curv_part)


def perturbed_functional(
    ops: DiscreteOperators, u: np.ndarray, epsilon: float
) -> EnergyBreakdown:
    """Penalized functional whose minimizers solve the mean-field equation.

    total = 1/2 int |grad u|^2 + (8*pi - eps)/(4*pi) int K u
            - (8*pi - eps) ln int exp(u).

    Adding a constant to u leaves the total unchanged (exactly, because the
    discrete curvature integrates to exactly 4*pi).
    """
    u = _check_field(ops, u)
    epsilon = _check_epsilon(epsilon)
    beta = EIGHT_PI - epsilon
    dir_part = 0.5 * dirichlet_energy(ops, u)
    curv_part = (beta / FOUR_PI) * integrate(ops, ops.curvature * u)
    log_part = -beta * log_volume(ops, u)
    return EnergyBreakdown(
        dir_part, curv_part, log_part, dir_part + curv_part + log_part
    )


def perturbed_gradient(
    ops: DiscreteOperators, u: np.ndarray, epsilon: float
) -> ScalarField:
    """Mass-gradient field g of the perturbed functional.

    Directional derivative at u along h equals the mass inner product
    sum(g * h * mass); finite differences of :func:`perturbed_functional`
    converge to it.  Its mass-weighted mean vanishes identically.
    """
    u = _check_field(ops, u)
    epsilon = _check_epsilon(epsilon)
    beta = EIGHT_PI - epsilon
    log_vol = log_volume(ops, u)
    return (
        (ops.stiffness @ u) / ops.mass
        + (beta / FOUR_PI) * ops.curvature
        - beta * np.exp(u - log_vol)
    )


def onofri_deficit(ops: DiscreteOperators, u: np.ndarray) -> float:
    """Slack of the sharp exponential-moment inequality on the round sphere.

    deficit = (1/16pi) int |grad u|^2 + (1/4pi) int u
              - ln((1/4pi) int exp(u)),
    nonnegative for smooth fields, zero exactly on the Moebius family.
    Requires a round background (zero conformal factor).
    """
    if np.abs(ops.mesh.background_factor).max() > 1e-12:
        raise ParameterError("deficit is defined on the round background only")
    u = _check_field(ops, u)
    return (
        dirichlet_energy(ops, u) / (16.0 * np.pi)
        + integrate(ops, u) / FOUR_PI
        - (log_volume(ops, u) - np.log(FOUR_PI))
    )


def conformal_curvature(ops: DiscreteOperators, u: np.ndarray) -> ScalarField:
    """Scalar curvature of the metric exp(u) * g, per vertex.

    R_new = exp(-u) * ((S u)/mass + 2 K); the zero field returns exactly
    twice the working curvature, and constants rescale it by exp(-c).
    """
    u = _check_field(ops, u)
    return np.exp(-u) * ((ops.stiffness @ u) / ops.mass + 2.0 * ops.curvature)
