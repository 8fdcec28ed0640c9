"""Property-based and adversarial checks of the sharp integral
inequalities that control the variational problem.

Every suite reports an :class:`InequalityReport` whose ``worst_margin`` is
the minimum of (bound - quantity) over all samples: nonnegative margins
mean no violation.  Randomness is split per sample as
``seed * 1_000_003 + index`` so any single sample replays bitwise from the
reported ``worst_seed``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import cumulative_trapezoid, simpson

from .energy import log_volume, onofri_deficit
from .errors import DataError, NumericError, ParameterError
from .mesh import (
    FOUR_PI,
    DiscreteOperators,
    mobius_dilation_factor,
    random_band_field,
)
from .solver import disk_min_dirichlet, mass_norm, project_constraint

SIXTEEN_PI = 16.0 * np.pi

_SEED_STRIDE = 1_000_003

_ASCENT_CAP = 5000
_DIVERGENCE_THRESHOLD = 1.0e6


@dataclass
class InequalityReport:
    """Aggregated outcome of one inequality suite.

    worst_margin: min over samples of (bound - quantity); >= 0 passes.
    worst_seed: per-sample seed that reproduces the worst margin.
    parameters: suite inputs plus reported empirical constants.
    sample_margins: optional (seed, margin) rows for CSV dumps.
    """

    name: str
    samples: int
    worst_margin: float
    worst_seed: int
    parameters: dict = field(default_factory=dict)
    sample_margins: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "samples": self.samples,
            "worst_margin": self.worst_margin,
            "worst_seed": self.worst_seed,
            "parameters": self.parameters,
        }


def sample_seed(seed: int, index: int) -> int:
    """Per-sample child seed: counter splitting with a fixed odd stride."""
    return int(seed) * _SEED_STRIDE + int(index)


def _radial_disk_field(rng, r, grid, modes, amplitude_scale):
    # Zero-boundary radial band: cos((k - 1/2) pi rho / r) vanishes at r.
    coeffs = rng.standard_normal(modes)
    amp = rng.uniform(0.2, 2.0) * amplitude_scale
    k = np.arange(1, modes + 1) - 0.5
    phases = np.pi * np.outer(grid / r, k)
    u = amp * (np.cos(phases) @ coeffs)
    du = -amp * (np.sin(phases) @ (coeffs * k * np.pi / r))
    return u, du


def check_local_mt(
    r: float,
    samples: int,
    seed: int,
    epsilon: float = 0.0,
    amplitude_scale: float = 1.0,
    modes: int = 6,
    grid_n: int = 2048,
) -> InequalityReport:
    """Exponential-moment bound for zero-boundary fields on a disk.

    For each random radial field u with u(r) = 0 the margin is

        ln(pi r^2 e) + (1/(16 pi) + epsilon) int |grad u|^2 - ln int e^u,

    nonnegative in the continuum for epsilon >= 0.  ``epsilon`` sharpens
    the exponent (the small-radius variant), ``amplitude_scale`` stresses
    the scaling behavior.
    """
    if not np.isfinite(r) or r <= 0:
        raise ParameterError("r must be positive")
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    if epsilon < 0:
        raise ParameterError("epsilon must be >= 0")
    grid = np.linspace(0.0, r, grid_n + 1)
    bound_const = np.log(np.pi * r * r) + 1.0
    coeff = 1.0 / SIXTEEN_PI + epsilon
    worst_margin, worst_seed = np.inf, sample_seed(seed, 0)
    rows = []
    for i in range(samples):
        s_i = sample_seed(seed, i)
        rng = np.random.default_rng(s_i)
        u, du = _radial_disk_field(rng, r, grid, modes, amplitude_scale)
        dirichlet = 2.0 * np.pi * simpson(du * du * grid, x=grid)
        exp_int = 2.0 * np.pi * simpson(np.exp(u) * grid, x=grid)
        margin = bound_const + coeff * dirichlet - np.log(exp_int)
        rows.append((s_i, margin))
        if margin < worst_margin:
            worst_margin, worst_seed = margin, s_i
    return InequalityReport(
        name="local_exponential_bound",
        samples=samples,
        worst_margin=float(worst_margin),
        worst_seed=worst_seed,
        parameters={
            "r": r,
            "epsilon": epsilon,
            "amplitude_scale": amplitude_scale,
            "modes": modes,
            "grid_n": grid_n,
        },
        sample_margins=rows,
    )


def disk_floor_gap(a: float, b: float, r: float, grid_n: int = 4096) -> InequalityReport:
    """Gap of the constrained disk minimum over its closed-form floor.

    margin = disk_min_dirichlet(a, b, r) - 4 pi (ln t + 1/t - 1) with
    t = a exp(-2b) / (pi r^2); zero exactly at t = 1 and nonnegative up to
    the O(h^2) quadrature bias otherwise.  The bound depends on (a, b)
    only through t.
    """
    minimum = disk_min_dirichlet(a, b, r, grid_n)
    t = a * np.exp(-2.0 * b) / (np.pi * r * r)
    bound = FOUR_PI * (np.log(t) + 1.0 / t - 1.0)
    margin = minimum.value - bound
    return InequalityReport(
        name="disk_dirichlet_gap",
        samples=1,
        worst_margin=float(margin),
        worst_seed=0,
        parameters={
            "a": a,
            "b": b,
            "r": r,
            "grid_n": grid_n,
            "t": t,
            "value": minimum.value,
            "bound": float(bound),
        },
        sample_margins=[(0, float(margin))],
    )


def _tangent_project(ops, g):
    # Remove the component normal to {int K u = 0} in the mass metric.
    k_field = ops.curvature
    scale = ((g * k_field) @ ops.mass) / ((k_field * k_field) @ ops.mass)
    return g - scale * k_field


def _ascend(ops, u0, kappa, solve_metric, cap):
    """Maximize ln int e^u - kappa u^T S u over the pairing constraint.

    Projected ascent in the Sobolev metric 2 kappa S + M: solve_metric
    applies the inverse, which flattens the 1/h^2 stiffness conditioning
    that stalls plain gradient steps on fine meshes.  Doubling/backtracking
    line search; stops on a small tangent gradient or a stagnant value
    window.  Returns (best value, iterations used, diverged flag).
    """
    u = project_constraint(ops, u0)
    value = log_volume(ops, u) - kappa * float(u @ (ops.stiffness @ u))
    step = 1.0
    anchor = value
    for it in range(cap):
        if value > _DIVERGENCE_THRESHOLD:
            return value, it, True
        if it % 20 == 0:
            if it > 0 and value - anchor < 1e-12 * max(1.0, abs(value)):
                return value, it, False
            anchor = value
        grad = np.exp(u - log_volume(ops, u)) - 2.0 * kappa * (
            ops.stiffness @ u
        ) / ops.mass
        grad = _tangent_project(ops, grad)
        if mass_norm(ops, grad) < 1e-10 * max(1.0, abs(value)):
            return value, it, False
        direction = _tangent_project(ops, solve_metric(grad * ops.mass))
        slope = float((direction * grad) @ ops.mass)
        if slope <= 0:
            return value, it, False
        gain = 1e-4 * slope
        step = min(step * 2.0, 1e3)
        accepted = False
        while step > 2.0**-40:
            u_try = project_constraint(ops, u + step * direction)
            v_try = log_volume(ops, u_try) - kappa * float(
                u_try @ (ops.stiffness @ u_try)
            )
            if v_try >= value + step * gain:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return value, it, False
        u, value = u_try, v_try
    return value, cap, value > _DIVERGENCE_THRESHOLD


def check_global_mt(
    ops: DiscreteOperators, epsilon: float, trials: int, seed: int
) -> InequalityReport:
    """Adversarial boundedness of ln int e^u - (1/(16 pi) + eps) int |grad u|^2.

    Gradient ascent from a zero start plus ``trials - 1`` random band-field
    starts; the pass condition is that no ascent crosses the divergence
    threshold.  The best value found is the empirical log-supremum
    constant, reported in parameters["sup_value"].  On the round sphere
    the supremum is ln(4 pi), attained by constants.
    """
    if epsilon <= 0:
        raise ParameterError("epsilon must be positive")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    kappa = 1.0 / SIXTEEN_PI + epsilon
    metric = (2.0 * kappa * ops.stiffness + sp.diags(ops.mass)).tocsc()
    solve_metric = spla.splu(metric).solve
    best_value, best_seed = -np.inf, sample_seed(seed, 0)
    rows = []
    total_iterations = 0
    diverged_any = False
    for i in range(trials):
        s_i = sample_seed(seed, i)
        if i == 0:
            u0 = np.zeros(ops.mass.shape)
        else:
            rng = np.random.default_rng(s_i)
            bands = int(rng.integers(3, 12))
            amp = float(rng.uniform(0.3, 2.0))
            u0 = random_band_field(ops.mesh, s_i, bands, amp)
        value, iters, diverged = _ascend(ops, u0, kappa, solve_metric, _ASCENT_CAP)
        total_iterations += iters
        diverged_any = diverged_any or diverged
        rows.append((s_i, _DIVERGENCE_THRESHOLD - value))
        if value > best_value:
            best_value, best_seed = value, s_i
    return InequalityReport(
        name="global_exponential_sup",
        samples=trials,
        worst_margin=float(_DIVERGENCE_THRESHOLD - best_value),
        worst_seed=best_seed,
        parameters={
            "epsilon": epsilon,
            "sup_value": float(best_value),
            "diverged": diverged_any,
            "iteration_cap": _ASCENT_CAP,
            "divergence_threshold": _DIVERGENCE_THRESHOLD,
            "total_iterations": total_iterations,
        },
        sample_margins=rows,
    )


def onofri_suite(
    ops: DiscreteOperators,
    samples: int,
    seed: int,
    amplitude_max: float = 1.5,
    dilation_max: float = 4.0,
) -> InequalityReport:
    """Sharp exponential-moment deficits over random and dilation fields.

    Requires a round background (the deficit is only defined there).  Odd
    samples draw band fields, even samples (past the first) draw dilation
    factors with log-uniform scale in [1/dilation_max, dilation_max]; the
    dilations are near-equality cases, so they probe the sharp constant.
    Margins are the deficits themselves: nonnegative up to discretization.
    """
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    if amplitude_max <= 0 or dilation_max < 1:
        raise ParameterError("amplitude_max must be > 0 and dilation_max >= 1")
    rows = []
    worst_margin, worst_seed = np.inf, sample_seed(seed, 0)
    for i in range(samples):
        s_i = sample_seed(seed, i)
        rng = np.random.default_rng(s_i)
        if i == 0:
            u = np.zeros(ops.mass.shape)
        elif i % 2 == 0:
            loglam = rng.uniform(-np.log(dilation_max), np.log(dilation_max))
            u = mobius_dilation_factor(ops.mesh, float(np.exp(loglam)))
        else:
            bands = int(rng.integers(2, 10))
            amp = float(rng.uniform(0.1, amplitude_max))
            u = random_band_field(ops.mesh, s_i, bands, amp)
        margin = onofri_deficit(ops, u)
        rows.append((s_i, margin))
        if margin < worst_margin:
            worst_margin, worst_seed = margin, s_i
    return InequalityReport(
        name="onofri_deficit",
        samples=samples,
        worst_margin=float(worst_margin),
        worst_seed=worst_seed,
        parameters={
            "amplitude_max": amplitude_max,
            "dilation_max": dilation_max,
        },
        sample_margins=rows,
    )


def poincare_constant(
    ops: DiscreteOperators,
    p: float,
    modes: int = 30,
    starts: int = 8,
    seed: int = 0,
    iterations: int = 400,
) -> InequalityReport:
    """Best constant c_p in (int |u|^p)^(2/p) <= c_p int |grad u|^2 over
    the curvature-pairing constraint.

    p = 2: exact reduction to a dense generalized eigenproblem over the
    lowest ``modes`` eigenfields plus the constant direction (constants
    cost no Dirichlet energy but are constrained through the pairing).
    p != 2: multi-start projected gradient ascent on the log quotient.
    The constant is reported in parameters["c_p"]; worst_margin is 0 by
    convention (the inequality defines c_p rather than bounding it).
    """
    if not np.isfinite(p) or p < 1:
        raise ParameterError("p must be >= 1")
    n = ops.mass.shape[0]
    if modes >= n - 2:
        raise ParameterError("modes too large for this mesh")
    vals, vecs = spla.eigsh(
        ops.stiffness,
        k=modes + 1,
        M=sp.diags(ops.mass),
        sigma=-0.5,
        v0=np.ones(n),
    )
    order = np.argsort(vals)
    vals, vecs = vals[order][1:], vecs[:, order][:, 1:]
    if vals.min() <= 0:
        raise NumericError("nonpositive eigenvalue in the constrained pencil")

    if p == 2:
        # u = c0/sqrt(A) + sum a_k psi_k; constraint eliminates c0.
        kappa = vecs.T @ (ops.mass * ops.curvature)
        kappa0 = float((ops.curvature @ ops.mass) / np.sqrt(ops.total_area))
        ratio = kappa / kappa0
        numerator = np.eye(modes) + np.outer(ratio, ratio)
        c_p = float(sla.eigh(numerator, np.diag(vals), eigvals_only=True).max())
        report_samples, worst_seed = 1, seed
    else:
        best = -np.inf
        worst_seed = sample_seed(seed, 0)
        inv_mass = 1.0 / ops.mass
        for i in range(starts):
            s_i = sample_seed(seed, i)
            rng = np.random.default_rng(s_i)
            coeffs = rng.standard_normal(modes)
            u = _tangent_project(ops, vecs @ coeffs)
            for _ in range(iterations):
                norm2 = float((u * u) @ ops.mass)
                if norm2 < 1e-30:
                    break
                u = u / np.sqrt(norm2)
                su = ops.stiffness @ u
                dirichlet = float(u @ su)
                p_int = float((np.abs(u) ** p) @ ops.mass)
                grad = (
                    2.0 * np.abs(u) ** (p - 1.0) * np.sign(u) / p_int
                    - 2.0 * (su * inv_mass) / dirichlet
                )
                direction = _tangent_project(ops, grad)
                d_norm = mass_norm(ops, direction)
                if d_norm < 1e-10:
                    break
                u = u + 0.1 * direction / max(1.0, d_norm)
            su = ops.stiffness @ u
            quotient = float((np.abs(u) ** p) @ ops.mass) ** (2.0 / p) / float(u @ su)
            if quotient > best:
                best, worst_seed = quotient, s_i
        c_p = float(best)
        report_samples = starts
    return InequalityReport(
        name="poincare_constant",
        samples=report_samples,
        worst_margin=0.0,
        worst_seed=worst_seed,
        parameters={"p": p, "c_p": c_p, "modes": modes},
    )


def _radial_poisson_exp_integral(grid, f_values, delta):
    """Closed-chain evaluation of the exponential integrability functional.

    Solves -Delta u = f radially with u(r) = 0 through two cumulative
    integrals, then returns (2 pi int exp((4 pi - delta)|u| / ||f||_1) rho,
    ||f||_1).  A zero source gives exactly pi r^2.
    """
    r = grid[-1]
    flux = cumulative_trapezoid(f_values * grid, grid, initial=0.0)
    f_norm = 2.0 * np.pi * np.trapezoid(np.abs(f_values) * grid, grid)
    if f_norm == 0.0:
        return np.pi * r * r, 0.0
    integrand = np.zeros_like(grid)
    integrand[1:] = flux[1:] / grid[1:]
    cumulative = cumulative_trapezoid(integrand, grid, initial=0.0)
    u = cumulative[-1] - cumulative
    weight = np.exp((FOUR_PI - delta) * np.abs(u) / f_norm)
    return 2.0 * np.pi * np.trapezoid(weight * grid, grid), f_norm


def brezis_merle_check(
    r: float, delta: float, samples: int, seed: int, grid_n: int = 4096
) -> InequalityReport:
    """Exponential integrability of -Delta u = f with zero boundary data.

    Cycles through three source families: centered Gaussian bumps with
    widths geometrically spaced from r/2 down to 4 grid cells, random
    zero-boundary radial bands, and signed bump differences.  The guard
    value is 10x the widest-bump integral; margins are guard - integral.
    The empirical constant (the largest integral seen) is reported in
    parameters["max_integral"].
    """
    if not np.isfinite(r) or r <= 0:
        raise ParameterError("r must be positive")
    if not 0.0 < delta < FOUR_PI:
        raise ParameterError("delta must lie in (0, 4*pi)")
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    grid = np.linspace(0.0, r, grid_n + 1)
    h = r / grid_n
    widths = np.geomspace(r / 2.0, 4.0 * h, num=max(8, min(64, samples)))
    reference = np.exp(-(grid**2) / (2.0 * (r / 2.0) ** 2))
    guard, _ = _radial_poisson_exp_integral(grid, reference, delta)
    guard *= 10.0
    worst_margin, worst_seed = np.inf, sample_seed(seed, 0)
    max_integral = -np.inf
    rows = []
    for i in range(samples):
        s_i = sample_seed(seed, i)
        rng = np.random.default_rng(s_i)
        kind = i % 3
        if kind == 0:
            sigma = widths[i // 3 % len(widths)]
            f_values = rng.uniform(0.5, 2.0) * np.exp(
                -(grid**2) / (2.0 * sigma * sigma)
            )
        elif kind == 1:
            f_values, _ = _radial_disk_field(rng, r, grid, 6, 1.0)
        else:
            s1, s2 = rng.choice(widths, size=2, replace=False)
            f_values = np.exp(-(grid**2) / (2 * s1 * s1)) - rng.uniform(
                0.3, 1.0
            ) * np.exp(-(grid**2) / (2 * s2 * s2))
        integral, _ = _radial_poisson_exp_integral(grid, f_values, delta)
        max_integral = max(max_integral, integral)
        margin = guard - integral
        rows.append((s_i, margin))
        if margin < worst_margin:
            worst_margin, worst_seed = margin, s_i
    return InequalityReport(
        name="exp_integrability",
        samples=samples,
        worst_margin=float(worst_margin),
        worst_seed=worst_seed,
        parameters={
            "r": r,
            "delta": delta,
            "grid_n": grid_n,
            "guard": float(guard),
            "max_integral": float(max_integral),
        },
        sample_margins=rows,
    )
