"""Langevin problem definitions.

A model describes the damped-driven Hamiltonian system

    dP = -f(Q) dt - v P dt + Sigma dW,      dQ = M P dt,

with force f = grad F, symmetric positive definite mass M, friction v > 0 and
additive noise matrix Sigma of full row rank.  This module provides the model
container, the two built-in test systems (a linear oscillator and a tilted
double well), the Lyapunov function used by the moment-stability diagnostics,
an inequality scanner for the dissipativity assumption, and the closed-form
Boltzmann-Gibbs densities of the built-ins.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Mapping

import numpy as np

from .errors import ArgumentError, CapabilityError, EvaluationError

Array = np.ndarray

# Relative floor for the smallest singular value of the noise matrix.
_NOISE_RANK_TOL = 1e-12
# Absolute tolerance for symmetry of the mass matrix.
_MASS_SYM_TOL = 1e-12


def _as_point(q: object, dim: int) -> Array:
    """Coerce a position argument to a finite (dim,) float array."""
    arr = np.atleast_1d(np.asarray(q, dtype=float))
    if arr.shape != (dim,):
        raise ArgumentError(
            f"expected a point of dimension {dim}, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ArgumentError("point contains non-finite entries")
    return arr


def _scalar(value: object, what: str) -> float:
    arr = np.asarray(value, dtype=float)
    if arr.size != 1:
        raise EvaluationError(f"{what} returned {arr.size} values, expected a scalar")
    return float(arr.reshape(-1)[0])


@dataclasses.dataclass(frozen=True)
class PhaseState:
    """Momentum/position pair (p, q), both in R^d with finite entries."""

    p: Array
    q: Array

    def __post_init__(self) -> None:
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if p.ndim != 1 or q.ndim != 1 or p.shape != q.shape:
            raise ArgumentError(
                f"p and q must be 1-d arrays of equal length, got {p.shape} and {q.shape}"
            )
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise ArgumentError("phase state contains non-finite entries")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def dim(self) -> int:
        return self.p.shape[0]


@dataclasses.dataclass(frozen=True)
class LangevinModel:
    """Container for one Langevin system.

    Parameters
    ----------
    dim : int
        State dimension d per component.
    noise_dim : int
        Number of driving Wiener processes, m >= d.
    force : callable
        q (d,) -> f(q) (d,).  The built-in d=1 models broadcast elementwise
        over arrays of any shape, which the batched Monte Carlo engine relies
        on.
    potential : callable
        q (d,) -> scalar F(q) with f = grad F.
    force_jacobian : callable
        q (d,) -> (d, d) symmetric matrix grad^2 F(q).
    mass : ndarray
        (d, d) symmetric positive definite matrix M.
    friction : float
        Absorption coefficient v > 0 for the dissipative setting; v = 0 is
        tolerated so diagnostics can exercise the frictionless limit.
    noise : ndarray
        (d, m) matrix Sigma with rank d.  Convention: the model SDE carries
        +Sigma dW.  An exactly zero matrix is accepted as the deterministic
        limit used by diagnostics; any nonzero matrix must have full row rank.
    kind : str
        Dispatch tag; "linear" and "double_well" enable closed-form densities.
    params : mapping
        Scalar parameters of the built-in kinds.
    force_third : callable or None
        Optional q (d,) -> (d, d, d) third derivative tensor of F.  When
        absent, Jacobians of the implicit scheme fall back to finite
        differences.
    """

    dim: int
    noise_dim: int
    force: Callable[[Array], Array]
    potential: Callable[[Array], float]
    force_jacobian: Callable[[Array], Array]
    mass: Array
    friction: float
    noise: Array
    kind: str = "custom"
    params: Mapping[str, float] = dataclasses.field(default_factory=dict)
    force_third: Callable[[Array], Array] | None = None

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ArgumentError("dim must be a positive integer")
        if self.noise_dim < self.dim:
            raise ArgumentError("noise_dim must be at least dim")
        mass = np.asarray(self.mass, dtype=float).reshape(self.dim, self.dim)
        noise = np.asarray(self.noise, dtype=float).reshape(self.dim, self.noise_dim)
        if not np.all(np.isfinite(mass)):
            raise ArgumentError("mass contains non-finite entries")
        if not np.all(np.isfinite(noise)):
            raise ArgumentError("noise contains non-finite entries")
        scale = max(1.0, float(np.max(np.abs(mass))))
        if float(np.max(np.abs(mass - mass.T))) > _MASS_SYM_TOL * scale:
            raise ArgumentError("mass matrix is not symmetric")
        if float(np.min(np.linalg.eigvalsh(mass))) <= 0.0:
            raise ArgumentError("mass matrix is not positive definite")
        if not (self.friction >= 0.0 and math.isfinite(self.friction)):
            raise ArgumentError("friction must be nonnegative and finite")
        sing = np.linalg.svd(noise, compute_uv=False)
        if sing[0] > 0.0 and sing[-1] <= _NOISE_RANK_TOL * sing[0]:
            raise ArgumentError(
                "noise matrix is rank deficient (smallest singular value "
                f"{sing[-1]:.3e} vs largest {sing[0]:.3e})"
            )
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "friction", float(self.friction))


@dataclasses.dataclass(frozen=True)
class LinearOscillator:
    """Parameters of the linear test system: f(q) = a q, M = a, Sigma = -sigma.

    ``v = 0`` is tolerated on the parameter object so the closed-form moment
    utilities can exercise the frictionless rotation; building a LangevinModel
    still requires v > 0.
    """

    a: float
    v: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.a > 0.0:
            raise ArgumentError("stiffness a must be positive")
        if self.v < 0.0:
            raise ArgumentError("friction v must be nonnegative")
        if self.sigma == 0.0:
            raise ArgumentError("noise amplitude sigma must be nonzero")

    def build(self) -> LangevinModel:
        if not self.v > 0.0:
            raise ArgumentError("building a model requires positive friction")
        a = float(self.a)
        return LangevinModel(
            dim=1,
            noise_dim=1,
            force=lambda q: a * q,
            potential=lambda q: 0.5 * a * q**2,
            force_jacobian=lambda q: np.full_like(np.asarray(q, dtype=float), a),
            mass=np.array([[a]]),
            friction=self.v,
            noise=np.array([[-self.sigma]]),
            kind="linear",
            params={"a": a, "v": float(self.v), "sigma": float(self.sigma)},
            force_third=lambda q: np.zeros((1, 1, 1)),
        )


@dataclasses.dataclass(frozen=True)
class DoubleWell:
    """Parameters of the tilted double-well system.

    f(q) = 4q^3 - 4q - 1/2, F(q) = (1 - q^2)^2 - q/2 (so F(0) = 1 and
    f = grad F exactly), M = 1, Sigma = +sqrt(2 v / beta).
    """

    v: float
    beta: float

    def __post_init__(self) -> None:
        if not self.v > 0.0:
            raise ArgumentError("friction v must be positive")
        if not self.beta > 0.0:
            raise ArgumentError("inverse temperature beta must be positive")

    def build(self) -> LangevinModel:
        return LangevinModel(
            dim=1,
            noise_dim=1,
            force=lambda q: 4.0 * q**3 - 4.0 * q - 0.5,
            potential=lambda q: (1.0 - q**2) ** 2 - 0.5 * q,
            force_jacobian=lambda q: 12.0 * q**2 - 4.0,
            mass=np.array([[1.0]]),
            friction=self.v,
            noise=np.array([[math.sqrt(2.0 * self.v / self.beta)]]),
            kind="double_well",
            params={"v": float(self.v), "beta": float(self.beta)},
            force_third=lambda q: (24.0 * np.asarray(q, dtype=float)).reshape(1, 1, 1),
        )


def make_quadratic_model(
    stiffness: Array,
    mass: Array,
    friction: float,
    noise: Array,
) -> LangevinModel:
    """Build a d-dimensional quadratic model F(q) = q^T K q / 2, f(q) = K q.

    Used by tests and demos that need an exactly quadratic potential in d > 1.
    """
    kmat = np.asarray(stiffness, dtype=float)
    if kmat.ndim != 2 or kmat.shape[0] != kmat.shape[1]:
        raise ArgumentError("stiffness must be a square matrix")
    if float(np.max(np.abs(kmat - kmat.T))) > 1e-12 * max(1.0, float(np.max(np.abs(kmat)))):
        raise ArgumentError("stiffness must be symmetric")
    d = kmat.shape[0]
    noise_arr = np.asarray(noise, dtype=float)
    return LangevinModel(
        dim=d,
        noise_dim=noise_arr.shape[1],
        force=lambda q: kmat @ q,
        potential=lambda q: 0.5 * float(q @ kmat @ q),
        force_jacobian=lambda q: kmat,
        mass=np.asarray(mass, dtype=float),
        friction=friction,
        noise=noise_arr,
        kind="quadratic",
        params={},
        force_third=lambda q: np.zeros((d, d, d)),
    )


def eval_model(model: LangevinModel, q: object) -> tuple[float, Array, Array]:
    """Evaluate (F(q), f(q), grad^2 F(q)) at a single point.

    Parameters
    ----------
    model : LangevinModel
    q : array_like
        Position, coerced to shape (d,).

    Returns
    -------
    (float, (d,) ndarray, (d, d) ndarray)

    Raises
    ------
    EvaluationError
        If any output is non-finite or has the wrong size.
    """
    point = _as_point(q, model.dim)
    pot = _scalar(model.potential(point), "potential")
    frc = np.asarray(model.force(point), dtype=float).reshape(model.dim)
    hess = np.asarray(model.force_jacobian(point), dtype=float).reshape(
        model.dim, model.dim
    )
    if not (
        math.isfinite(pot)
        and np.all(np.isfinite(frc))
        and np.all(np.isfinite(hess))
    ):
        raise EvaluationError(f"model evaluation is non-finite at q={point}")
    return pot, frc, hess


def lyapunov_v(model: LangevinModel, z: PhaseState) -> float:
    """Lyapunov function V(z) = |p|^2/2 + F(q) + (v/2) p.q + (v^2/4)|q|^2 + 1."""
    if z.dim != model.dim:
        raise ArgumentError("state dimension does not match the model")
    v = model.friction
    pot, _, _ = eval_model(model, z.q)
    return (
        0.5 * float(z.p @ z.p)
        + pot
        + 0.5 * v * float(z.p @ z.q)
        + 0.25 * v * v * float(z.q @ z.q)
        + 1.0
    )


@dataclasses.dataclass(frozen=True)
class Assumption1Report:
    """Result of the dissipativity-inequality grid scan."""

    passed: bool
    min_slack: float
    worst_q: Array


def check_assumption1(
    model: LangevinModel,
    grid: object,
    alpha: float,
    beta: float,
) -> Assumption1Report:
    """Scan a grid for the dissipativity inequalities.

    At each grid point q the scan checks F(q) >= 0 and

        q.f(q)/2 >= beta F(q) + v^2 beta (2 - beta) / (8 (1 - beta)) |q|^2 - alpha.

    Parameters
    ----------
    grid : iterable of positions
        Points to scan; each is coerced to shape (d,).
    alpha : float
        Additive slack constant, expected positive.
    beta : float
        Must lie strictly inside (0, 1).

    Returns
    -------
    Assumption1Report
        Minimum slack over both inequalities and all points, its location,
        and the pass verdict (all slacks nonnegative).
    """
    if not (0.0 < beta < 1.0):
        raise ArgumentError(f"beta must lie in (0, 1), got {beta}")
    if model.dim == 1:
        raw = np.atleast_1d(np.asarray(grid, dtype=float))
    else:
        raw = list(grid)
    points = [_as_point(q, model.dim) for q in raw]
    if len(points) == 0:
        raise ArgumentError("grid is empty")
    v = model.friction
    coeff = v * v * beta * (2.0 - beta) / (8.0 * (1.0 - beta))
    min_slack = math.inf
    worst = points[0]
    for q in points:
        pot, frc, _ = eval_model(model, q)
        slack_pos = pot
        slack_ineq = 0.5 * float(q @ frc) - beta * pot - coeff * float(q @ q) + alpha
        for slack in (slack_pos, slack_ineq):
            if slack < min_slack:
                min_slack = slack
                worst = q
    return Assumption1Report(passed=min_slack >= 0.0, min_slack=min_slack, worst_q=worst)


def gibbs_density_fn(model: object) -> Callable[[Array, Array], Array]:
    """Vectorized unnormalized stationary density of a built-in model.

    Returns a callable rho(p, q) operating elementwise on arrays.  Only the
    two built-in kinds carry a closed-form density.
    """
    if isinstance(model, LinearOscillator):
        a, v, sigma = model.a, model.v, model.sigma
        kind = "linear"
    elif isinstance(model, DoubleWell):
        v, beta = model.v, model.beta
        kind = "double_well"
    elif isinstance(model, LangevinModel) and model.kind in ("linear", "double_well"):
        kind = model.kind
        if kind == "linear":
            a, v, sigma = model.params["a"], model.params["v"], model.params["sigma"]
        else:
            v, beta = model.params["v"], model.params["beta"]
    else:
        raise CapabilityError(
            "closed-form Gibbs densities exist only for the built-in kinds "
            "'linear' and 'double_well'"
        )
    if kind == "linear":
        rate = a * v / sigma**2

        def rho(p: Array, q: Array) -> Array:
            return np.exp(-rate * (np.asarray(p) ** 2 + np.asarray(q) ** 2))

    else:
        b = beta

        def rho(p: Array, q: Array) -> Array:
            q = np.asarray(q)
            return np.exp(-b * (0.5 * np.asarray(p) ** 2 + (1.0 - q**2) ** 2 - 0.5 * q))

    return rho


def gibbs_density(model: object, z: PhaseState) -> float:
    """Unnormalized Boltzmann-Gibbs density of a built-in model at one state."""
    rho = gibbs_density_fn(model)
    return float(rho(z.p[0], z.q[0]) if z.dim == 1 else rho(z.p, z.q))
