"""Command-line pipeline over the library.

Subcommands mirror the analysis protocol: ``simulate`` writes a
synthetic panel, ``estimate`` fits the separable model from a panel,
``factors`` reports per-domain factors (optionally the per-country
baseline), ``minvar`` and ``hedge`` solve the portfolio problems, and
``validate`` inspects a panel without computing anything.

Conventions shared by every command:

* ``--input`` takes a panel CSV or, where a model suffices, a model
  JSON; the file extension decides (.json means model).
* user-facing indices (``--index``, table factor numbers) are 1-based;
  the library is 0-based.
* an optional TOML file (``--config``) supplies defaults, explicit
  flags win.
* outputs land in ``--output-dir``; tables are written as CSV plus a
  machine-readable JSON twin (``--format json`` drops the CSV), and all
  writes are atomic (temp file, then rename).
* exit codes: 0 success, 2 usage or I/O, 3 data validation, 4 model
  parse, 5 numerical failure.  ``KRONRISK_LOG`` selects log verbosity
  (error, warn, info, debug) on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

import numpy as np

from . import covariance, factors, panel, portfolio, synthetic
from .errors import DataError, ModelFormatError, NumericalError

__all__ = ["main", "console_entry", "build_parser", "RunConfig"]

_LOG = logging.getLogger("kronrisk.cli")

EXIT_OK = 0
EXIT_IO = 2
EXIT_DATA = 3
EXIT_MODEL = 4
EXIT_NUMERICAL = 5

_DEFAULTS = {
    "input": None,
    "output_dir": ".",
    "format": "csv",
    "demean": True,
    "returns": "diff",
    "domestic": False,
    "domain": "maturity",
    "index": 1,
    "r": 3,
    "seed": 20150102,
    "strict": False,
    "maturities": 15,
    "countries": 8,
    "samples": 234,
}
_RETURN_METHODS = {"diff": "first_difference", "log": "log_ratio"}


class _CliError(Exception):
    """Raised by command handlers to exit with a specific code."""

    def __init__(self, message: str, code: int = EXIT_IO) -> None:
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class RunConfig:
    """Merged view of defaults, config file and command-line flags."""

    command: str
    input: str | None
    output_dir: Path
    format: str
    demean: bool
    returns: str
    domestic: bool
    domain: str
    index: int
    r: int
    seed: int
    strict: bool
    maturities: int
    countries: int
    samples: int

    def __post_init__(self) -> None:
        if self.format not in ("csv", "json"):
            raise _CliError(f"--format must be csv or json, got {self.format!r}")
        if self.returns not in _RETURN_METHODS:
            raise _CliError(f"--returns must be diff or log, got {self.returns!r}")
        if self.domain not in ("maturity", "country"):
            raise _CliError(f"--domain must be maturity or country, got {self.domain!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kronrisk",
        description="Separable risk-factor models and portfolios "
                    "for multi-country rate-curve panels.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, input_help):
        sp.add_argument("--input", default=None, help=input_help)
        sp.add_argument("--output-dir", dest="output_dir", default=None,
                        help="directory for output files (default: current)")
        sp.add_argument("--format", choices=("csv", "json"), default=None,
                        help="table format; csv also writes the JSON twin")
        sp.add_argument("--strict", action="store_true", default=None,
                        help="fail on missing data / inconsistent systems "
                             "instead of reporting them")
        sp.add_argument("--config", default=None,
                        help="TOML file with default flag values")

    def returns_flags(sp):
        sp.add_argument("--demean", action=argparse.BooleanOptionalAction,
                        default=None, help="subtract the sample mean before "
                                           "estimation (default: on)")
        sp.add_argument("--returns", choices=("diff", "log"), default=None,
                        help="return definition: rate differences or log ratios")

    sp = sub.add_parser("estimate", help="fit the separable model from a panel")
    common(sp, "panel CSV file")
    returns_flags(sp)

    sp = sub.add_parser("factors", help="per-domain factor tables and loadings")
    common(sp, "panel CSV or model JSON")
    returns_flags(sp)
    sp.add_argument("--domestic", action="store_true", default=None,
                    help="also run per-country PCA (needs a panel input)")

    sp = sub.add_parser("minvar", help="minimum-variance weights per domain")
    common(sp, "panel CSV or model JSON")
    returns_flags(sp)

    sp = sub.add_parser("hedge", help="factor-hedged single-asset portfolio")
    common(sp, "panel CSV or model JSON")
    returns_flags(sp)
    sp.add_argument("--domain", choices=("maturity", "country"), default=None,
                    help="domain to hedge in (default: maturity)")
    sp.add_argument("--index", type=int, default=None,
                    help="1-based target asset within the domain")
    sp.add_argument("--r", type=int, default=None,
                    help="number of leading factors to hedge (default: 3)")

    sp = sub.add_parser("simulate", help="write a synthetic panel CSV")
    common(sp, "optional model JSON to sample from")
    sp.add_argument("--seed", type=int, default=None, help="RNG seed")
    sp.add_argument("--maturities", type=int, default=None,
                    help="maturity count for the default model (default: 15)")
    sp.add_argument("--countries", type=int, default=None,
                    help="country count for the default model (default: 8)")
    sp.add_argument("--samples", type=int, default=None,
                    help="number of return samples (default: 234)")

    sp = sub.add_parser("validate", help="report panel issues without computing")
    common(sp, "panel CSV file")

    return parser


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise _CliError(f"config not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise _CliError(f"invalid config {path}: {exc}") from None
    unknown = set(doc) - set(_DEFAULTS)
    if unknown:
        raise _CliError(f"unknown config keys: {sorted(unknown)}")
    return doc


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge flags over config-file values over built-in defaults."""
    file_values = _load_config_file(args.config) if getattr(args, "config", None) else {}
    merged = {}
    for key, default in _DEFAULTS.items():
        value = getattr(args, key, None)
        if value is None:
            value = file_values.get(key, default)
        merged[key] = value
    try:
        merged["output_dir"] = Path(merged["output_dir"])
        for key in ("index", "r", "seed", "maturities", "countries", "samples"):
            merged[key] = int(merged[key])
        for key in ("demean", "strict", "domestic"):
            merged[key] = bool(merged[key])
    except (TypeError, ValueError) as exc:
        raise _CliError(f"invalid configuration value: {exc}") from None
    return RunConfig(command=args.command, **merged)


def _write_text(cfg: RunConfig, name: str, text: str) -> Path:
    path = cfg.output_dir / name
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
    _LOG.info("wrote %s", path)
    print(f"wrote {path}")
    return path


def _write_table(cfg: RunConfig, stem: str, csv_text: str, json_text: str) -> None:
    if cfg.format == "csv":
        _write_text(cfg, stem + ".csv", csv_text)
    _write_text(cfg, stem + ".json", json_text)


def _require_input(cfg: RunConfig) -> Path:
    if not cfg.input:
        raise _CliError(f"{cfg.command} requires --input")
    path = Path(cfg.input)
    if not path.exists():
        raise _CliError(f"input not found: {path}")
    return path


def _load_panel_returns(cfg: RunConfig, path: Path):
    """Load a panel and apply the missing-data policy.

    Returns (return set, filled cell count).  Strict mode forwards the
    missing-cell error; otherwise gaps are forward-filled first.
    """
    pnl = panel.load_curve_panel(path)
    filled = 0
    if not cfg.strict and bool(np.any(pnl.missing)):
        pnl, filled = panel.forward_fill(pnl)
        _LOG.info("forward-filled %d missing cells", filled)
    rs = panel.compute_returns(pnl, method=_RETURN_METHODS[cfg.returns])
    return rs, filled


def _load_model_input(cfg: RunConfig):
    """Dispatch --input by extension: .json is a model, else a panel.

    Returns (model, return set or None, filled count).
    """
    path = _require_input(cfg)
    if path.suffix.lower() == ".json":
        return covariance.load_model(path), None, 0
    rs, filled = _load_panel_returns(cfg, path)
    model = covariance.estimate(rs.samples, demean=cfg.demean)
    return model, rs, filled


def _axis_labels(model, rs) -> tuple[tuple[str, ...], tuple[str, ...]]:
    if rs is not None:
        return rs.maturity_labels, rs.countries
    n_m, n_c = model.dims
    return (tuple(f"m{i + 1}" for i in range(n_m)),
            tuple(f"c{j + 1}" for j in range(n_c)))


def _json_text(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def cmd_estimate(cfg: RunConfig) -> int:
    path = _require_input(cfg)
    if path.suffix.lower() == ".json":
        raise _CliError("estimate requires a panel CSV input, not a model file")
    rs, filled = _load_panel_returns(cfg, path)
    model = covariance.estimate(rs.samples, demean=cfg.demean)
    report = covariance.separability_diagnostic(rs.samples, model)
    _write_text(cfg, "model.json", covariance.model_to_json(model))
    doc = {
        "relative_error": report.relative_error,
        "full_params": report.full_params,
        "separable_params": report.separable_params,
        "per_block_errors": [[float(v) for v in row]
                             for row in report.per_block_errors],
        "filled_cells": filled,
        "sample_count": model.sample_count,
    }
    csv_lines = ["metric,value",
                 f"relative_error,{report.relative_error!r}",
                 f"full_params,{report.full_params}",
                 f"separable_params,{report.separable_params}",
                 f"filled_cells,{filled}",
                 f"sample_count,{model.sample_count}"]
    _write_table(cfg, "separability", "\n".join(csv_lines) + "\n", _json_text(doc))
    n_m, n_c = model.dims
    print(f"estimated model: dims {n_m}x{n_c}, T={model.sample_count}, "
          f"sigma2={model.sigma2:.6g}")
    print(f"separability relative error: {report.relative_error:.4f} "
          f"({report.separable_params} separable vs {report.full_params} "
          f"full parameters)")
    return EXIT_OK


def _variance_outputs(cfg: RunConfig, dec, mode: int, stem: str,
                      labels, asset_labels) -> None:
    table = factors.variance_table(dec, mode, labels=labels)
    _write_table(cfg, stem,
                 factors.variance_table_to_csv(table),
                 factors.variance_table_to_json(table))
    u = dec.eigenvectors[mode]
    _write_table(cfg, "loadings_" + stem.split("_", 1)[1],
                 factors.loadings_to_csv(u, asset_labels),
                 factors.loadings_to_json(u, asset_labels))
    top = table.rows[:3]
    summary = ", ".join(f"{r.index + 1}: {100 * r.fraction:.2f}%"
                        + (f" ({r.label})" if r.label else "")
                        for r in top)
    print(f"{stem.split('_', 1)[1]}-domain variance explained: {summary}")


def cmd_factors(cfg: RunConfig) -> int:
    model, rs, _ = _load_model_input(cfg)
    if model.order != 2:
        raise _CliError(f"factor tables need an order-2 model, got order {model.order}",
                        EXIT_MODEL)
    dec = factors.decompose(model)
    maturity_labels, country_labels = _axis_labels(model, rs)
    _variance_outputs(cfg, dec, 0, "factors_maturity",
                      factors.MATURITY_FACTOR_LABELS, maturity_labels)
    _variance_outputs(cfg, dec, 1, "factors_country",
                      factors.COUNTRY_FACTOR_LABELS, country_labels)
    if cfg.domestic:
        if rs is None:
            raise _CliError("--domestic requires a panel input "
                            "(per-country PCA needs samples)")
        _domestic_outputs(cfg, rs)
    return EXIT_OK


def _domestic_outputs(cfg: RunConfig, rs) -> None:
    n_m = len(rs.maturities)
    shown = min(3, n_m)
    spectra = {}
    for j, country in enumerate(rs.countries):
        _, fractions = factors.domestic_pca(rs.samples, j)
        spectra[country] = fractions
    header = "factor,label," + ",".join(rs.countries)
    lines = [header]
    rows = []
    for i in range(shown):
        label = (factors.DOMESTIC_FACTOR_LABELS[i]
                 if i < len(factors.DOMESTIC_FACTOR_LABELS) else "")
        cells = ",".join(f"{100 * spectra[c][i]:.2f}" for c in rs.countries)
        lines.append(f"{i + 1},{label},{cells}")
        rows.append({"factor": i + 1, "label": label or None,
                     "fractions": {c: float(spectra[c][i]) for c in rs.countries}})
    doc = {"countries": list(rs.countries), "rows": rows,
           "spectra": {c: [float(v) for v in spectra[c]] for c in rs.countries}}
    _write_table(cfg, "domestic", "\n".join(lines) + "\n", _json_text(doc))
    spread = max(max(spectra[c][0] for c in rs.countries)
                 - min(spectra[c][0] for c in rs.countries), 0.0)
    print(f"domestic PCA: leading-factor spread across countries "
          f"{100 * spread:.2f} points")


def _weights_csv(labels, weights) -> str:
    lines = ["asset,weight"]
    lines.extend(f"{label},{float(w)!r}" for label, w in zip(labels, weights))
    return "\n".join(lines) + "\n"


def cmd_minvar(cfg: RunConfig) -> int:
    model, rs, _ = _load_model_input(cfg)
    if model.order != 2:
        raise _CliError(f"minvar needs an order-2 model, got order {model.order}",
                        EXIT_MODEL)
    weights = portfolio.min_variance_separable(model)
    full = weights.full()
    variance = portfolio.portfolio_variance(full, covariance.full_covariance(model))
    maturity_labels, country_labels = _axis_labels(model, rs)
    full_labels = [f"{c}/{m}" for c in country_labels for m in maturity_labels]
    doc = {
        "w_maturity": [float(v) for v in weights.w_maturity],
        "w_country": [float(v) for v in weights.w_country],
        "w_full": [float(v) for v in full],
        "variance": variance,
        "maturity_labels": list(maturity_labels),
        "country_labels": list(country_labels),
    }
    if cfg.format == "csv":
        _write_text(cfg, "minvar_maturity.csv",
                    _weights_csv(maturity_labels, weights.w_maturity))
        _write_text(cfg, "minvar_country.csv",
                    _weights_csv(country_labels, weights.w_country))
        _write_text(cfg, "minvar_full.csv", _weights_csv(full_labels, full))
    _write_text(cfg, "minvar.json", _json_text(doc))
    print(f"minimum-variance portfolio variance: {variance:.6g}")
    return EXIT_OK


def cmd_hedge(cfg: RunConfig) -> int:
    model, rs, _ = _load_model_input(cfg)
    if model.order != 2:
        raise _CliError(f"hedge needs an order-2 model, got order {model.order}",
                        EXIT_MODEL)
    dec = factors.decompose(model)
    size = dec.dims[0] if cfg.domain == "maturity" else dec.dims[1]
    if not 1 <= cfg.index <= size:
        raise _CliError(f"--index {cfg.index} out of range 1..{size} "
                        f"for the {cfg.domain} domain")
    try:
        spec = portfolio.HedgeSpec(domain=cfg.domain,
                                   target_index=cfg.index - 1,
                                   num_factors_hedged=cfg.r,
                                   decomposition=dec)
    except ValueError as exc:
        raise _CliError(str(exc)) from exc
    result = portfolio.hedge(spec, strict=cfg.strict)
    maturity_labels, country_labels = _axis_labels(model, rs)
    labels = maturity_labels if cfg.domain == "maturity" else country_labels
    doc = {
        "domain": cfg.domain,
        "index": cfg.index,
        "r": cfg.r,
        "weights": [float(v) for v in result.weights],
        "residual": result.residual,
        "factor_exposures": [float(v) for v in result.factor_exposures],
        "consistent": result.consistent,
        "labels": list(labels),
    }
    if cfg.format == "csv":
        _write_text(cfg, "hedge.csv", _weights_csv(labels, result.weights))
    _write_text(cfg, "hedge.json", _json_text(doc))
    status = "consistent" if result.consistent else "INCONSISTENT"
    print(f"hedge residual: {result.residual:.3e} ({status}, "
          f"{cfg.r} factors hedged in the {cfg.domain} domain)")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    if cfg.input:
        path = Path(cfg.input)
        if not path.exists():
            raise _CliError(f"input not found: {path}")
        if path.suffix.lower() != ".json":
            raise _CliError("simulate takes a model JSON as --input")
        model = covariance.load_model(path)
    else:
        model = synthetic.default_model(cfg.maturities, cfg.countries)
    if cfg.samples < 1:
        raise _CliError(f"--samples must be >= 1, got {cfg.samples}")
    gen = synthetic.GeneratorConfig(model=model, sample_count=cfg.samples,
                                    seed=cfg.seed)
    samples = synthetic.sample_kronecker_gaussian(gen)
    pnl = synthetic.returns_to_panel(samples)
    _write_text(cfg, "synthetic_panel.csv", panel.panel_to_csv(pnl))
    print(f"seed: {cfg.seed}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    path = _require_input(cfg)
    pnl = panel.load_curve_panel(path)
    report = panel.validate_panel(pnl)
    for issue in report.issues:
        print(issue)
    print(f"panel: {report.date_count} dates x {report.maturity_count} maturities "
          f"x {report.country_count} countries, median spacing "
          f"{report.median_spacing_days:g} days")
    if report.missing_cells or report.non_monotone_pairs:
        print(f"found {len(report.missing_cells)} missing cells, "
              f"{len(report.non_monotone_pairs)} ordering problems")
        if cfg.strict:
            return EXIT_DATA
    else:
        print("no issues found")
    return EXIT_OK


_DISPATCH = {
    "estimate": cmd_estimate,
    "factors": cmd_factors,
    "minvar": cmd_minvar,
    "hedge": cmd_hedge,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}


def _setup_logging() -> None:
    levels = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    name = os.environ.get("KRONRISK_LOG", "warn").lower()
    logging.basicConfig(stream=sys.stderr,
                        level=levels.get(name, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles usage errors and --help
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        return _DISPATCH[cfg.command](cfg)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        print(f"error: input not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ModelFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def console_entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    console_entry()
