"""Kronecker-separable covariance models and their analytic estimators.

A model for zero-mean tensor samples of dims (I_1, ..., I_N) consists of
a total variance ``sigma2`` and one unit-trace covariance density matrix
``theta`` per mode.  The implied covariance of the vectorized samples is

    Sigma = sigma2 * (theta_N kron ... kron theta_1),

with the factors in reverse mode order because vectorization runs the
first mode fastest (see :mod:`kronrisk.tensor`).  For rate-curve panels
the modes are (maturity, country), giving the block picture: block (i, j)
of Sigma is ``sigma2 * theta_c[i, j] * theta_m``.

Estimation is closed form: sigma2 averages the squared Frobenius norms
of the samples and each theta averages the mode-n Gram matrices, scaled
so its trace is exactly one.  Both moments use the T - 1 denominator.
The estimators are single-pass, not the coupled fixed-point iteration
sometimes used for matrix-normal likelihoods.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, ModelFormatError
from .tensor import as_tensor, kronecker_seq

__all__ = [
    "KroneckerCovarianceModel",
    "SeparabilityReport",
    "estimate",
    "full_covariance",
    "cross_country_block",
    "parameter_counts",
    "separability_diagnostic",
    "model_to_json",
    "model_from_json",
    "save_model",
    "load_model",
]

# tolerances for the model invariants (symmetry, unit trace, PSD slack)
_SYM_TOL = 1e-10
_TRACE_TOL = 1e-10
_PSD_TOL = -1e-10


def _frozen_matrix(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class KroneckerCovarianceModel:
    """Separable second-moment model: ``sigma2`` plus per-mode thetas.

    ``thetas[n]`` is the I_n x I_n covariance density matrix of mode n;
    each must be symmetric, positive semidefinite and of unit trace
    (within 1e-10).  ``sample_count`` is the T used in estimation, 0 for
    directly constructed models.  ``demeaned`` records whether the
    sample mean was removed before estimation.
    """

    sigma2: float
    thetas: tuple[np.ndarray, ...]
    sample_count: int = 0
    demeaned: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma2", float(self.sigma2))
        if not math.isfinite(self.sigma2) or self.sigma2 < 0:
            raise ValueError(f"sigma2 must be finite and >= 0, got {self.sigma2}")
        thetas = tuple(_frozen_matrix(th) for th in self.thetas)
        if not thetas:
            raise ValueError("a model needs at least one mode")
        for n, th in enumerate(thetas):
            if th.ndim != 2 or th.shape[0] != th.shape[1]:
                raise ValueError(f"theta {n} must be square, got shape {th.shape}")
            if not np.all(np.isfinite(th)):
                raise ValueError(f"theta {n} has non-finite entries")
            if np.max(np.abs(th - th.T)) > _SYM_TOL:
                raise ValueError(f"theta {n} is not symmetric within {_SYM_TOL}")
            if abs(np.trace(th) - 1.0) > _TRACE_TOL:
                raise ValueError(f"theta {n} must have unit trace, got {np.trace(th)!r}")
            if np.linalg.eigvalsh(th)[0] < _PSD_TOL:
                raise ValueError(f"theta {n} is not positive semidefinite")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "sample_count", int(self.sample_count))
        if self.sample_count < 0:
            raise ValueError("sample_count must be >= 0")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(th.shape[0] for th in self.thetas)

    @property
    def order(self) -> int:
        return len(self.thetas)


@dataclass(frozen=True)
class SeparabilityReport:
    """How far a sample covariance is from the separable model.

    ``relative_error`` is the relative Frobenius distance between the
    unrestricted sample covariance S and the model-implied Sigma;
    ``per_block_errors[i, j]`` is the same quantity restricted to the
    (i, j) block over the last mode (country blocks for order-2 data,
    0/0 counted as 0).  The parameter counts quantify what separability
    buys.
    """

    relative_error: float
    full_params: int
    separable_params: int
    per_block_errors: np.ndarray = field(repr=False)


def _sample_stack(samples) -> np.ndarray:
    """Stack samples into a (T, I_1, ..., I_N) array, validating dims."""
    arrs = [as_tensor(s).data for s in samples]
    if len(arrs) < 2:
        raise DegenerateDataError(f"need at least 2 samples, got {len(arrs)}")
    dims = arrs[0].shape
    for t, a in enumerate(arrs):
        if a.shape != dims:
            raise ValueError(f"sample {t} has dims {a.shape}, expected {dims}")
    return np.stack(arrs)


def _vectorized_rows(stack: np.ndarray) -> np.ndarray:
    """(T, *dims) stack -> (T, K) matrix whose rows follow the package
    vectorization (first mode fastest)."""
    t = stack.shape[0]
    axes = (0,) + tuple(range(stack.ndim - 1, 0, -1))
    return stack.transpose(axes).reshape(t, -1)


def estimate(samples, demean: bool = True) -> KroneckerCovarianceModel:
    """Fit the separable model to T >= 2 equally shaped tensor samples.

    sigma2 is the T-1-normalized sum of squared Frobenius norms and each
    theta the matching normalized sum of mode-n Gram matrices X_(n) X_(n)^T,
    symmetrized and trace-normalized.  With ``demean`` the per-element
    sample mean is removed first (the T - 1 denominator is kept either
    way).  All samples identical after demeaning is a degenerate-data
    error since the thetas would be undefined.
    """
    stack = _sample_stack(samples)
    t = stack.shape[0]
    if demean:
        stack = stack - stack.mean(axis=0)
    sigma2 = float(np.sum(stack * stack)) / (t - 1)
    if sigma2 == 0.0:
        raise DegenerateDataError(
            "zero total variance (all samples identical after demeaning)")
    thetas = []
    for n, dim in enumerate(stack.shape[1:]):
        fibres = np.moveaxis(stack, n + 1, 1).reshape(t, dim, -1)
        gram = np.einsum("tir,tjr->ij", fibres, fibres)
        theta = gram / (sigma2 * (t - 1))
        theta = (theta + theta.T) / 2.0
        theta /= np.trace(theta)
        thetas.append(theta)
    return KroneckerCovarianceModel(sigma2=sigma2, thetas=tuple(thetas),
                                    sample_count=t, demeaned=demean)


def full_covariance(model: KroneckerCovarianceModel) -> np.ndarray:
    """Dense K x K covariance ``sigma2 * (theta_N kron ... kron theta_1)``.

    Symmetric PSD with trace equal to sigma2 (each factor has unit trace).
    """
    return model.sigma2 * kronecker_seq(list(reversed(model.thetas)))


def cross_country_block(model: KroneckerCovarianceModel, i: int, j: int) -> np.ndarray:
    """The (i, j) country block ``sigma2 * theta_c[i, j] * theta_m``.

    Indices are 0-based.  Equals the corresponding I_m x I_m block of
    :func:`full_covariance`; its trace is ``sigma2 * theta_c[i, j]``.
    """
    if model.order != 2:
        raise ValueError(f"country blocks require an order-2 model, got order {model.order}")
    n_c = model.dims[1]
    if not (0 <= i < n_c and 0 <= j < n_c):
        raise ValueError(f"country indices ({i}, {j}) out of range for {n_c} countries")
    return model.sigma2 * model.thetas[1][i, j] * model.thetas[0]


def parameter_counts(dims) -> tuple[int, int]:
    """Free-parameter counts (full, separable) for a covariance on dims.

    A full covariance on K = prod(dims) variables has K(K+1)/2
    parameters; the separable model has one global variance plus
    I_n(I_n+1)/2 per mode.  (15, 8) gives (7260, 157).
    """
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"invalid dims {dims}")
    k = math.prod(dims)
    full = k * (k + 1) // 2
    separable = 1 + sum(d * (d + 1) // 2 for d in dims)
    return full, separable


def separability_diagnostic(samples, model: KroneckerCovarianceModel) -> SeparabilityReport:
    """Compare the unrestricted sample covariance against the model.

    Builds S = (1/(T-1)) sum_t x_t x_t^T on vectorized samples (demeaned
    first iff average removal was used when the model was estimated) and
    reports relative Frobenius errors, overall and per last-mode block.
    """
    stack = _sample_stack(samples)
    if stack.shape[1:] != model.dims:
        raise ValueError(f"samples have dims {stack.shape[1:]}, model has {model.dims}")
    t = stack.shape[0]
    if model.demeaned:
        stack = stack - stack.mean(axis=0)
    rows = _vectorized_rows(stack)
    s = rows.T @ rows / (t - 1)
    s_norm = float(np.linalg.norm(s))
    if s_norm == 0.0:
        raise DegenerateDataError("sample covariance is identically zero")
    sigma = full_covariance(model)
    relative_error = float(np.linalg.norm(s - sigma)) / s_norm

    # blocks over the slowest (last) mode: I_N x I_N grid of B x B blocks
    g = model.dims[-1]
    b = s.shape[0] // g
    s_blocks = s.reshape(g, b, g, b)
    d_blocks = (s - sigma).reshape(g, b, g, b)
    s_bn = np.linalg.norm(s_blocks, axis=(1, 3))
    d_bn = np.linalg.norm(d_blocks, axis=(1, 3))
    with np.errstate(divide="ignore", invalid="ignore"):
        per_block = np.where(d_bn == 0.0, 0.0, d_bn / s_bn)
    full_params, separable_params = parameter_counts(model.dims)
    return SeparabilityReport(relative_error=relative_error,
                              full_params=full_params,
                              separable_params=separable_params,
                              per_block_errors=_frozen_matrix(per_block))


def _fmt(v: float) -> str:
    # 17 significant digits round-trip any IEEE double exactly
    return format(float(v), ".17g")


def model_to_json(model: KroneckerCovarianceModel) -> str:
    """Serialize to JSON, each theta as a row-major flat array.

    Floats are written with 17 significant digits so parsing the text
    reproduces the model bit for bit.
    """
    theta_rows = ",\n".join(
        "    [" + ", ".join(_fmt(v) for v in th.ravel(order="C")) + "]"
        for th in model.thetas)
    return (
        "{\n"
        f'  "sigma2": {_fmt(model.sigma2)},\n'
        f'  "dims": [{", ".join(str(d) for d in model.dims)}],\n'
        '  "thetas": [\n' + theta_rows + "\n  ],\n"
        f'  "sample_count": {model.sample_count},\n'
        f'  "demeaned": {"true" if model.demeaned else "false"}\n'
        "}\n"
    )


def model_from_json(text: str) -> KroneckerCovarianceModel:
    """Parse :func:`model_to_json` output; malformed documents raise
    :class:`ModelFormatError`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    missing = {"sigma2", "dims", "thetas"} - doc.keys()
    if missing:
        raise ModelFormatError(f"model document missing keys: {sorted(missing)}")
    dims = doc["dims"]
    thetas_flat = doc["thetas"]
    if (not isinstance(dims, list) or not dims
            or not all(isinstance(d, int) and d >= 1 for d in dims)):
        raise ModelFormatError(f"dims must be a list of positive integers, got {dims!r}")
    if not isinstance(thetas_flat, list) or len(thetas_flat) != len(dims):
        raise ModelFormatError("thetas must list one flat array per mode")
    thetas = []
    for n, (d, flat) in enumerate(zip(dims, thetas_flat)):
        if not isinstance(flat, list) or len(flat) != d * d:
            raise ModelFormatError(f"theta {n} must have {d * d} entries for dim {d}")
        try:
            thetas.append(np.array(flat, dtype=np.float64).reshape(d, d))
        except (TypeError, ValueError) as exc:
            raise ModelFormatError(f"theta {n} is not numeric: {exc}") from exc
    try:
        return KroneckerCovarianceModel(
            sigma2=float(doc["sigma2"]),
            thetas=tuple(thetas),
            sample_count=int(doc.get("sample_count", 0)),
            demeaned=bool(doc.get("demeaned", False)),
        )
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model values: {exc}") from exc


def save_model(model: KroneckerCovarianceModel, path) -> None:
    """Write the JSON serialization to ``path``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path) -> KroneckerCovarianceModel:
    """Read a model JSON file written by :func:`save_model`."""
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(fh.read())
