"""Separable risk-factor models for tensor-valued return panels.

The pipeline: load a rate panel (:mod:`kronrisk.panel`), tensorize
returns, fit the Kronecker-separable covariance with closed-form
estimators (:mod:`kronrisk.covariance`), read off global factors by
per-mode eigendecomposition (:mod:`kronrisk.factors`), and build
minimum-variance or factor-hedged portfolios one domain at a time
(:mod:`kronrisk.portfolio`).  :mod:`kronrisk.synthetic` draws exact
samples for testing and simulation; :mod:`kronrisk.cli` wires it all
into a command line.
"""

from .covariance import (KroneckerCovarianceModel, SeparabilityReport,
                         cross_country_block, estimate, full_covariance,
                         load_model, model_from_json, model_to_json,
                         parameter_counts, save_model, separability_diagnostic)
from .errors import (DataError, DegenerateDataError, KronriskError,
                     MissingDataError, ModelFormatError, NumericalError,
                     PanelFormatError)
from .factors import (ComposedFactor, FactorDecomposition, VarianceRow,
                      VarianceTable, all_composed_eigenpairs, composed_factor,
                      decompose, domestic_pca, factor_scores, variance_table)
from .panel import (CurvePanel, PanelReport, ReturnSet, compute_returns,
                    forward_fill, load_curve_panel, panel_to_csv,
                    validate_panel)
from .portfolio import (HedgeResult, HedgeSpec, SeparableWeights,
                        factor_exposure, hedge, min_variance_full,
                        min_variance_separable, portfolio_variance,
                        pseudo_inverse_solve)
from .rng import PortableRng
from .synthetic import (GeneratorConfig, brute_force_covariance, default_model,
                        returns_to_panel, sample_kronecker_gaussian)
from .tensor import (DenseTensor, Unfolding, as_tensor, fold, kronecker,
                     kronecker_seq, mode_product, multi_mode_product, unfold,
                     vectorize)

__version__ = "0.1.0"

__all__ = [
    "DenseTensor", "Unfolding", "as_tensor", "vectorize", "unfold", "fold",
    "mode_product", "multi_mode_product", "kronecker", "kronecker_seq",
    "KroneckerCovarianceModel", "SeparabilityReport", "estimate",
    "full_covariance", "cross_country_block", "parameter_counts",
    "separability_diagnostic", "model_to_json", "model_from_json",
    "save_model", "load_model",
    "FactorDecomposition", "ComposedFactor", "VarianceRow", "VarianceTable",
    "decompose", "composed_factor", "all_composed_eigenpairs",
    "variance_table", "domestic_pca", "factor_scores",
    "SeparableWeights", "HedgeSpec", "HedgeResult", "portfolio_variance",
    "min_variance_full", "min_variance_separable", "factor_exposure", "hedge",
    "pseudo_inverse_solve",
    "CurvePanel", "ReturnSet", "PanelReport", "load_curve_panel",
    "panel_to_csv", "forward_fill", "compute_returns", "validate_panel",
    "GeneratorConfig", "sample_kronecker_gaussian", "brute_force_covariance",
    "default_model", "returns_to_panel",
    "PortableRng",
    "KronriskError", "DataError", "PanelFormatError", "MissingDataError",
    "DegenerateDataError", "ModelFormatError", "NumericalError",
    "__version__",
]
