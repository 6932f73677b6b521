"""Multilinear PCA of separable covariance models.

Each per-mode density matrix is eigendecomposed on its own; eigenpairs
of the full covariance then come for free as Kronecker compositions:
the loading for (country factor k, maturity factor l) is
``u_k_country kron u_l_maturity`` with eigenvalue
``sigma2 * lambda_k_country * lambda_l_maturity``, sitting at flat
position ``k * I_m + l`` (0-based, consistent with the package's
vectorization).  Per-mode eigenvalues sum to one, so they read directly
as explained-variance fractions.

Eigenvectors get a deterministic sign: the entry of largest absolute
value is made positive, first such entry winning ties.  Exact eigenvalue
ties are ordered by the sign-fixed vectors' lexicographic order.  This
makes decompositions reproducible bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .covariance import KroneckerCovarianceModel
from .errors import DegenerateDataError
from .tensor import DenseTensor, as_tensor, multi_mode_product

__all__ = [
    "FactorDecomposition",
    "ComposedFactor",
    "VarianceRow",
    "VarianceTable",
    "decompose",
    "composed_factor",
    "all_composed_eigenpairs",
    "variance_table",
    "domestic_pca",
    "factor_scores",
    "variance_table_to_csv",
    "variance_table_to_json",
    "loadings_to_csv",
    "loadings_to_json",
    "MATURITY_FACTOR_LABELS",
    "COUNTRY_FACTOR_LABELS",
    "DOMESTIC_FACTOR_LABELS",
]

# conventional economic names, attached by table position only
MATURITY_FACTOR_LABELS = ("Global level", "Global slope", "Global curvature")
COUNTRY_FACTOR_LABELS = ("Global risk premium",)
DOMESTIC_FACTOR_LABELS = ("Level", "Slope", "Curvature")

_EIG_FLOOR = -1e-10


def _fix_signs(u: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive."""
    lead = np.argmax(np.abs(u), axis=0)  # first maximum wins ties
    signs = np.sign(u[lead, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def _order_ties(values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Within runs of exactly equal eigenvalues, order columns
    lexicographically so repeated spectra decompose deterministically."""
    i = 0
    n = values.size
    while i < n:
        j = i + 1
        while j < n and values[j] == values[i]:
            j += 1
        if j - i > 1:
            cols = sorted(range(i, j), key=lambda c: tuple(vectors[:, c]))
            vectors[:, i:j] = vectors[:, cols]
        i = j
    return vectors


@dataclass(frozen=True)
class FactorDecomposition:
    """Per-mode eigensystems of a separable model.

    ``eigenvectors[n]`` holds mode-n factors as columns (orthonormal),
    ``eigenvalues[n]`` the matching spectrum, descending and summing to
    one.  ``sigma2`` is carried from the model so composed eigenvalues
    are in variance units.
    """

    eigenvectors: tuple[np.ndarray, ...]
    eigenvalues: tuple[np.ndarray, ...]
    sigma2: float

    def __post_init__(self) -> None:
        if len(self.eigenvectors) != len(self.eigenvalues) or not self.eigenvectors:
            raise ValueError("need one eigenvector matrix and one spectrum per mode")
        for n, (u, lam) in enumerate(zip(self.eigenvectors, self.eigenvalues)):
            dim = u.shape[0]
            if u.shape != (dim, dim) or lam.shape != (dim,):
                raise ValueError(f"mode {n} eigensystem has inconsistent shapes")
            if np.max(np.abs(u.T @ u - np.eye(dim))) > 1e-10:
                raise ValueError(f"mode {n} eigenvectors are not orthonormal")
            if np.any(lam < _EIG_FLOOR) or np.any(np.diff(lam) > 0):
                raise ValueError(f"mode {n} eigenvalues must be >= 0 and descending")
            if abs(lam.sum() - 1.0) > 1e-10:
                raise ValueError(f"mode {n} eigenvalues must sum to 1, got {lam.sum()!r}")

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(u.shape[0] for u in self.eigenvectors)

    @property
    def order(self) -> int:
        return len(self.eigenvectors)


@dataclass(frozen=True)
class ComposedFactor:
    """One eigenpair of the full covariance, built from per-mode parts.

    ``global_index = country_index * I_m + maturity_index`` (0-based);
    ``loading`` is the unit Kronecker composition and ``eigenvalue``
    includes the sigma2 factor, so it is an eigenvalue of Sigma itself.
    The per-mode columns are kept so exposures can be evaluated in
    product form without re-slicing.
    """

    global_index: int
    country_index: int
    maturity_index: int
    loading: np.ndarray
    eigenvalue: float
    maturity_part: np.ndarray
    country_part: np.ndarray


@dataclass(frozen=True)
class VarianceRow:
    index: int                       # 0-based factor position
    fraction: float
    cumulative: float
    label: str | None = None


@dataclass(frozen=True)
class VarianceTable:
    """Explained-variance rows for one mode, descending by fraction."""

    mode: int
    rows: tuple[VarianceRow, ...]

    def __post_init__(self) -> None:
        fr = np.array([r.fraction for r in self.rows])
        cu = np.array([r.cumulative for r in self.rows])
        if np.any(fr < 0) or np.any(fr > 1):
            raise ValueError("fractions must lie in [0, 1]")
        if abs(fr.sum() - 1.0) > 1e-8:
            raise ValueError(f"fractions must sum to 1, got {fr.sum()!r}")
        if np.any(np.diff(cu) < 0):
            raise ValueError("cumulative fractions must be nondecreasing")


def decompose(model: KroneckerCovarianceModel) -> FactorDecomposition:
    """Eigendecompose every density matrix of the model.

    Eigenvalues in [-1e-10, 0) are floating-point noise and clip to 0;
    anything lower means the model is invalid and raises.  Output is
    descending, sign-fixed, and bitwise reproducible.
    """
    vectors = []
    spectra = []
    for n, theta in enumerate(model.thetas):
        lam, u = np.linalg.eigh(theta)
        if lam[0] < _EIG_FLOOR:
            raise ValueError(f"theta {n} has eigenvalue {lam[0]} below {_EIG_FLOOR}")
        lam = np.clip(lam, 0.0, None)[::-1].copy()
        u = _fix_signs(u[:, ::-1].copy())
        u = _order_ties(lam, u)
        lam /= lam.sum()  # unit trace up to rounding; renormalize exactly
        lam.flags.writeable = False
        u.flags.writeable = False
        vectors.append(u)
        spectra.append(lam)
    return FactorDecomposition(eigenvectors=tuple(vectors),
                               eigenvalues=tuple(spectra),
                               sigma2=model.sigma2)


def _check_order2(d: FactorDecomposition) -> None:
    if d.order != 2:
        raise ValueError(f"composed factors require an order-2 decomposition, "
                         f"got order {d.order}")


def composed_factor(d: FactorDecomposition, country: int, maturity: int) -> ComposedFactor:
    """Compose the (country, maturity) eigenpair of the full covariance.

    Indices are 0-based factor positions within each mode.
    """
    _check_order2(d)
    n_m, n_c = d.dims
    if not 0 <= country < n_c:
        raise ValueError(f"country factor {country} out of range for {n_c}")
    if not 0 <= maturity < n_m:
        raise ValueError(f"maturity factor {maturity} out of range for {n_m}")
    u_m = d.eigenvectors[0][:, maturity]
    u_c = d.eigenvectors[1][:, country]
    return ComposedFactor(
        global_index=country * n_m + maturity,
        country_index=country,
        maturity_index=maturity,
        loading=np.kron(u_c, u_m),
        eigenvalue=d.sigma2 * float(d.eigenvalues[1][country] * d.eigenvalues[0][maturity]),
        maturity_part=u_m,
        country_part=u_c,
    )


def all_composed_eigenpairs(d: FactorDecomposition) -> list[ComposedFactor]:
    """All I_m * I_c composed eigenpairs, descending by eigenvalue.

    The eigenvalue multiset matches a dense eigensolve of the full
    covariance and sums to sigma2.  Ties order by global index.
    """
    _check_order2(d)
    n_m, n_c = d.dims
    factors = [composed_factor(d, k, l) for k in range(n_c) for l in range(n_m)]
    factors.sort(key=lambda f: (-f.eigenvalue, f.global_index))
    return factors


def variance_table(d: FactorDecomposition, mode: int,
                   labels: Sequence[str] = ()) -> VarianceTable:
    """Explained-variance table for one mode.

    Per-mode eigenvalues already sum to one so they are the fractions
    directly.  ``labels`` attach to leading rows by position; remaining
    rows stay unlabeled.
    """
    if not 0 <= mode < d.order:
        raise ValueError(f"mode {mode} out of range for order {d.order}")
    lam = d.eigenvalues[mode]
    cumulative = np.cumsum(lam)
    rows = tuple(
        VarianceRow(index=i, fraction=float(lam[i]), cumulative=float(cumulative[i]),
                    label=labels[i] if i < len(labels) else None)
        for i in range(lam.size))
    return VarianceTable(mode=mode, rows=rows)


def domestic_pca(samples, country: int) -> tuple[np.ndarray, np.ndarray]:
    """Classical PCA of one country's maturity fibres over time.

    Demeans the T fibre vectors, forms their T-1-normalized covariance,
    and returns (eigenvector matrix, explained-variance fractions), both
    descending and sign-fixed.  This is the per-country baseline that
    multilinear PCA generalizes: on separable data every country's
    leading eigenvectors align with the maturity-mode factors.
    """
    fibres = []
    shape = None
    for t, s in enumerate(samples):
        arr = as_tensor(s).data
        if arr.ndim != 2:
            raise ValueError(f"sample {t} must be order-2, got order {arr.ndim}")
        if shape is None:
            shape = arr.shape
            if not 0 <= country < shape[1]:
                raise ValueError(f"country {country} out of range for {shape[1]}")
        elif arr.shape != shape:
            raise ValueError(f"sample {t} has dims {arr.shape}, expected {shape}")
        fibres.append(arr[:, country])
    if len(fibres) < 2:
        raise DegenerateDataError(f"need at least 2 samples, got {len(fibres)}")
    f = np.stack(fibres)
    f = f - f.mean(axis=0)
    cov = f.T @ f / (len(fibres) - 1)
    if not np.any(cov):
        raise DegenerateDataError(f"country {country} fibres are constant over time")
    lam, u = np.linalg.eigh(cov)
    lam = np.clip(lam, 0.0, None)[::-1].copy()
    u = _fix_signs(u[:, ::-1].copy())
    u = _order_ties(lam, u)
    return u, lam / lam.sum()


def factor_scores(sample, d: FactorDecomposition) -> DenseTensor:
    """Project a sample onto the per-mode factor bases.

    Applies U^T along every mode; orthogonality makes this lossless, so
    applying the U matrices to the scores recovers the sample.
    """
    t = as_tensor(sample)
    if t.dims != d.dims:
        raise ValueError(f"sample dims {t.dims} do not match decomposition {d.dims}")
    return multi_mode_product(t, [u.T for u in d.eigenvectors])


def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}"


def variance_table_to_csv(table: VarianceTable) -> str:
    """Render with 1-based factor numbers and 2-decimal percentages."""
    lines = ["factor,label,variance_explained_pct,cumulative_pct"]
    for r in table.rows:
        lines.append(f"{r.index + 1},{r.label or ''},{_pct(r.fraction)},{_pct(r.cumulative)}")
    return "\n".join(lines) + "\n"


def variance_table_to_json(table: VarianceTable) -> str:
    doc = {
        "mode": table.mode,
        "rows": [
            {"factor": r.index + 1, "label": r.label,
             "fraction": r.fraction, "cumulative": r.cumulative}
            for r in table.rows
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def loadings_to_csv(u: np.ndarray, asset_labels: Sequence[str]) -> str:
    """One factor per column, assets as rows, full precision."""
    dim, nfac = u.shape
    if len(asset_labels) != dim:
        raise ValueError(f"{len(asset_labels)} labels for {dim} assets")
    lines = ["asset," + ",".join(f"factor_{j + 1}" for j in range(nfac))]
    for i in range(dim):
        lines.append(asset_labels[i] + "," + ",".join(repr(float(v)) for v in u[i]))
    return "\n".join(lines) + "\n"


def loadings_to_json(u: np.ndarray, asset_labels: Sequence[str]) -> str:
    dim, nfac = u.shape
    if len(asset_labels) != dim:
        raise ValueError(f"{len(asset_labels)} labels for {dim} assets")
    doc = {
        "assets": list(asset_labels),
        "factors": [
            {"factor": j + 1, "loadings": [float(v) for v in u[:, j]]}
            for j in range(nfac)
        ],
    }
    return json.dumps(doc, indent=2) + "\n"
