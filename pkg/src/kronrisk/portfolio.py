"""Minimum-variance and factor-hedged portfolios on separable models.

Separability turns the K-asset minimum-variance problem into one small
problem per mode: the Kronecker product of the per-domain solutions
equals the solution of the full dense problem.  Hedging works per
domain too.  A hedge portfolio in one domain holds a unit position in a
target asset, finances itself (weights sum to zero), and zeroes the
exposure to the leading r factors of that domain; because a composed
factor's exposure is the product of per-domain inner products, killing
one domain's inner product kills the global exposure no matter what the
other domain holds.

The hedge constraint stack may be inconsistent (e.g. hedging every
factor of a domain leaves no budget direction).  Systems are therefore
solved in the minimum-norm least-squares sense and the residual is
reported rather than hidden; callers opt into hard failure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import KroneckerCovarianceModel
from .errors import NumericalError
from .factors import ComposedFactor, FactorDecomposition

__all__ = [
    "SeparableWeights",
    "HedgeSpec",
    "HedgeResult",
    "portfolio_variance",
    "min_variance_full",
    "min_variance_separable",
    "factor_exposure",
    "hedge",
    "pseudo_inverse_solve",
]

# relative eigenvalue gate separating singular models from conditioning noise
_PD_RTOL = 1e-12

_DOMAINS = ("maturity", "country")


def _frozen_vector(v) -> np.ndarray:
    out = np.array(v, dtype=np.float64)
    if out.ndim != 1:
        raise ValueError(f"expected a vector, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError("weights must be finite")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SeparableWeights:
    """Per-domain weight vectors whose Kronecker product is the full book.

    The full vector follows the package vectorization, maturity index
    fastest: ``full()[j * I_m + i]`` is the position in maturity i of
    country j.  If both parts sum to one, so does the full vector.
    """

    w_maturity: np.ndarray
    w_country: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "w_maturity", _frozen_vector(self.w_maturity))
        object.__setattr__(self, "w_country", _frozen_vector(self.w_country))

    def full(self) -> np.ndarray:
        return np.kron(self.w_country, self.w_maturity)


@dataclass(frozen=True)
class HedgeSpec:
    """A hedging problem in one domain.

    ``target_index`` is the 0-based asset held long (unit weight);
    the first ``num_factors_hedged`` factor columns of that domain's
    eigenvector matrix are driven to zero exposure.  Up to size - 2
    hedged factors the system is guaranteed consistent; size - 1 is
    accepted so that over-constrained stacks can be posed and flagged.
    """

    domain: str
    target_index: int
    num_factors_hedged: int
    decomposition: FactorDecomposition

    def __post_init__(self) -> None:
        if self.domain not in _DOMAINS:
            raise ValueError(f"domain must be one of {_DOMAINS}, got {self.domain!r}")
        if self.decomposition.order != 2:
            raise ValueError("hedging requires an order-2 decomposition")
        size = self.size
        if not 0 <= self.target_index < size:
            raise ValueError(f"target index {self.target_index} out of range "
                             f"for {size} {self.domain} assets")
        if not 0 <= self.num_factors_hedged <= size - 1:
            raise ValueError(f"can hedge between 0 and {size - 1} factors "
                             f"in a {size}-asset domain, got {self.num_factors_hedged}")

    @property
    def mode(self) -> int:
        return _DOMAINS.index(self.domain)

    @property
    def size(self) -> int:
        return self.decomposition.dims[self.mode]


@dataclass(frozen=True)
class HedgeResult:
    """Solved hedge: domain weights plus feasibility diagnostics.

    ``residual`` is the Euclidean norm of the constraint violation;
    ``factor_exposures`` are the per-hedged-factor inner products (all
    near zero when the system is consistent).
    """

    weights: np.ndarray
    residual: float
    factor_exposures: np.ndarray
    consistent: bool


def portfolio_variance(w, sigma) -> float:
    """Quadratic form w' Sigma w (Sigma assumed symmetric)."""
    w = np.asarray(w, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if w.ndim != 1 or sigma.shape != (w.size, w.size):
        raise ValueError(f"shape mismatch: weights {w.shape}, covariance {sigma.shape}")
    return float(w @ sigma @ w)


def _require_pd(matrix: np.ndarray, what: str) -> None:
    eig = np.linalg.eigvalsh(matrix)
    if eig[0] <= _PD_RTOL * max(eig[-1], 0.0):
        raise NumericalError(
            f"{what} is singular or indefinite "
            f"(min eigenvalue {eig[0]:.3e}, max {eig[-1]:.3e})")


def min_variance_full(sigma) -> np.ndarray:
    """Budget-constrained minimum-variance weights Sigma^-1 1 / (1' Sigma^-1 1).

    Requires a symmetric positive definite covariance; the gate is a
    relative eigenvalue threshold of 1e-12.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError(f"covariance must be square, got {sigma.shape}")
    _require_pd(sigma, "covariance")
    w = np.linalg.solve(sigma, np.ones(sigma.shape[0]))
    return w / w.sum()


def min_variance_separable(model: KroneckerCovarianceModel) -> SeparableWeights:
    """Solve the two small per-domain problems instead of the K x K one.

    Each domain's weights are theta^-1 1 normalized to unit budget; the
    global variance scale cancels.  The Kronecker product of the parts
    reproduces :func:`min_variance_full` on the dense covariance.
    """
    if model.order != 2:
        raise ValueError(f"separable solver requires an order-2 model, "
                         f"got order {model.order}")
    parts = []
    for name, theta in zip(_DOMAINS, model.thetas):
        _require_pd(theta, f"{name} density matrix")
        w = np.linalg.solve(theta, np.ones(theta.shape[0]))
        parts.append(w / w.sum())
    return SeparableWeights(w_maturity=parts[0], w_country=parts[1])


def factor_exposure(w: SeparableWeights, f: ComposedFactor) -> float:
    """Exposure of separable weights to a composed factor.

    Uses the product identity u'w = (u_c'w_c)(u_m'w_m), so it never
    forms the K-dimensional vectors.
    """
    if f.maturity_part.size != w.w_maturity.size or f.country_part.size != w.w_country.size:
        raise ValueError(
            f"factor dims ({f.maturity_part.size}, {f.country_part.size}) do not "
            f"match weights ({w.w_maturity.size}, {w.w_country.size})")
    return float((f.country_part @ w.w_country) * (f.maturity_part @ w.w_maturity))


def pseudo_inverse_solve(a, b, tol: float = 1e-12) -> np.ndarray:
    """Minimum-norm least-squares solution of a w = b via SVD.

    Singular values below tol times the largest are treated as zero, so
    a zero matrix maps any b to the zero vector.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.size != a.shape[0]:
        raise ValueError(f"matrix {a.shape} and right-hand side {b.shape} "
                         f"are not conformable")
    w, *_ = np.linalg.lstsq(a, b, rcond=tol)
    return w


def hedge(spec: HedgeSpec, residual_threshold: float = 1e-8,
          strict: bool = False) -> HedgeResult:
    """Solve one domain's hedging system.

    Stacks the unit-position row (delta at the target), the
    self-financing row (all ones) and the transposed leading factor
    columns, with right-hand side (1, 0, ..., 0), and solves by
    pseudoinverse.  A residual above ``residual_threshold`` marks the
    system inconsistent; with ``strict`` that raises instead of being
    returned for inspection.
    """
    u = spec.decomposition.eigenvectors[spec.mode]
    size = spec.size
    r = spec.num_factors_hedged
    a = np.vstack([
        np.eye(size)[spec.target_index],
        np.ones(size),
        u[:, :r].T,
    ])
    b = np.zeros(r + 2)
    b[0] = 1.0
    w = pseudo_inverse_solve(a, b)
    residual = float(np.linalg.norm(a @ w - b))
    consistent = residual <= residual_threshold
    if strict and not consistent:
        raise NumericalError(
            f"hedge system is inconsistent: residual {residual:.3e} exceeds "
            f"{residual_threshold:.1e} (hedging {r} factors in a {size}-asset domain)")
    w.flags.writeable = False
    exposures = u[:, :r].T @ w
    exposures.flags.writeable = False
    return HedgeResult(weights=w, residual=residual,
                       factor_exposures=exposures, consistent=consistent)
