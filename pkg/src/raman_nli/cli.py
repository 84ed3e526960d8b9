"""Command-line entry point ``raman-nli``.

Exit codes: 0 success, 1 internal error or interrupt, 2 configuration
error, 3 split-step convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, ConvergenceError, DivergenceError, RamanNliError, StiffnessError
from .profile import triangular_profile
from .scenario import (
    ResultRow,
    ScenarioConfig,
    apply_overrides,
    format_value,
    report_header,
    report_values,
    run_scenario,
    scenario_from_dict,
    write_json,
    write_profile_csv,
    write_scaling_csv,
    write_spectrum_csv,
)
from .ssfm import resource_estimate

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_CONVERGENCE = 0, 1, 2, 3

log = logging.getLogger("raman_nli")

# stand-in plan for subcommands that only need the fiber and Raman blocks
_PLACEHOLDER_PLAN = {"channels": [{"frequency_ghz": 0.0}]}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario JSON file")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory (default: current)")
    common.add_argument("--override", action="append", default=[], metavar="K=V",
                        help="set a dotted config key, e.g. raman.n2=2.6e-20 (repeatable)")
    common.add_argument("--seed", type=int, help="split-step seed (run.ssfm.seed)")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true", help="only print errors")
    verbosity.add_argument("--verbose", action="store_true", help="print progress details")

    parser = argparse.ArgumentParser(
        prog="raman-nli",
        description="Nonlinear interference with the complex Raman response. "
                    "RAMAN_NLI_THREADS caps the worker count.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="dump the complex Raman spectrum")
    scaling = sub.add_parser("scaling", parents=[common], help="dump XPM scaling factors")
    scaling.add_argument("--dfmax", type=float, help="largest channel separation in Hz")
    sub.add_parser("gn", parents=[common], help="GN-model report (run.model gn-integral or closed-form)")
    sub.add_parser("ssfm", parents=[common], help="split-step simulation report")
    sub.add_parser("compare", parents=[common], help="GN model and simulation side by side")
    return parser


def _configure_logging(args) -> None:
    level = logging.ERROR if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr, force=True)
    logging.captureWarnings(True)
    if args.quiet:
        warnings.simplefilter("ignore")


def _read_doc(args) -> dict:
    if args.config is None:
        return {}
    try:
        return json.loads(args.config.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {args.config}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def _load(args, model: str | None = None, placeholder_plan: bool = False) -> ScenarioConfig:
    overrides = list(args.override)
    if args.seed is not None:
        overrides.append(f"run.ssfm.seed={args.seed}")
    if model is not None:
        overrides.append(f"run.model={model}")
    doc = apply_overrides(_read_doc(args), overrides)
    if placeholder_plan and isinstance(doc, dict):
        doc.setdefault("plan", _PLACEHOLDER_PLAN)
    base = None if args.config is None else args.config.parent
    return scenario_from_dict(doc, base_dir=base)


def cmd_spectrum(args) -> int:
    config = _load(args, placeholder_plan=True)
    H = config.transfer()
    path = write_spectrum_csv(args.out / "spectrum.csv", H)
    t_r = config.time_constant()
    summary = f"f_r = {H.fraction:.4f}"
    if t_r is not None:
        summary += f"  T_r = {t_r * 1e15:.3f} fs"
    print(summary)
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_scaling(args) -> int:
    config = _load(args, placeholder_plan=True)
    df_max = args.dfmax if args.dfmax is not None else config.raw["run"]["scaling_dfmax_thz"] * 1e12
    if not df_max > 0:
        raise ConfigError(f"--dfmax: must be positive, got {df_max!r}")
    path = write_scaling_csv(args.out / "scaling.csv", [config.transfer("dual"), config.transfer("single")], df_max)
    log.info("wrote %s", path)
    return EXIT_OK


class _RowWriter:
    """Report CSV written row by row so an interrupted run keeps finished channels."""

    def __init__(self, path: Path, compare: bool):
        path.parent.mkdir(parents=True, exist_ok=True)
        self.path = path
        self.compare = compare
        self._fh = path.open("w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(report_header(compare))
        self._fh.flush()

    def __call__(self, row: ResultRow) -> None:
        self._writer.writerow([format_value(v) for v in report_values(row, self.compare)])
        self._fh.flush()
        log.debug("channel %d (%s%s): SNR %.3f dB, delta eta %.3e dB", row.index, row.source,
                  ", dbp" if row.dbp else "", row.snr_db, row.delta_eta_db)

    def close(self) -> None:
        self._fh.close()


def _cmd_report(args, model: str) -> int:
    config = _load(args, model)
    if config.model in ("ssfm", "compare"):
        est = resource_estimate(config.plan, config.ssfm_config(), 2)
        log.info("split-step estimate: %d samples, %.1f MB, %d propagations x %d steps, ~%.0f s",
                 est["samples"], est["memory_bytes"] / 1e6, est["propagations"], est["steps"],
                 est["estimated_seconds"])
    args.out.mkdir(parents=True, exist_ok=True)
    writer = _RowWriter(args.out / "report.csv", config.model == "compare")
    try:
        report = run_scenario(config, on_row=writer)
    except KeyboardInterrupt:
        writer.close()
        write_json(args.out / "run_log.json", {"interrupted": True, "config": config.echo()})
        log.error("interrupted; partial results in %s", writer.path)
        return EXIT_INTERNAL
    writer.close()
    if config.model in ("gn-integral", "closed-form") and config.raw["run"]["profile"] == "triangular":
        psd = config.psd()
        z = np.linspace(0.0, config.fiber.length, 101)
        profile = triangular_profile(psd, config.fiber, z_grid=z, f_grid=np.sort(config.plan.frequencies))
        write_profile_csv(args.out / "profile.csv", profile)
    write_json(args.out / "run_log.json", report.log)
    if config.model == "compare":
        worst = max(abs(r.delta_model_sim_db) for r in report.rows)
        log.info("max |delta_model_sim_db| = %.3e dB", worst)
    log.info("wrote %s", writer.path)
    if not report.converged:
        log.error("split-step result did not converge")
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_gn(args) -> int:
    doc = apply_overrides(_read_doc(args), args.override)
    run = doc.get("run", {}) if isinstance(doc, dict) else {}
    given = run.get("model") if isinstance(run, dict) else None
    return _cmd_report(args, given if given in ("gn-integral", "closed-form") else "gn-integral")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args)
    handlers = {
        "spectrum": cmd_spectrum,
        "scaling": cmd_scaling,
        "gn": cmd_gn,
        "ssfm": lambda a: _cmd_report(a, "ssfm"),
        "compare": lambda a: _cmd_report(a, "compare"),
    }
    try:
        return handlers[args.command](args)
    except (ConvergenceError, DivergenceError, StiffnessError) as exc:
        log.error("convergence failure: %s", exc)
        return EXIT_CONVERGENCE
    except RamanNliError as exc:
        if isinstance(exc, ValueError):
            log.error("configuration error: %s", exc)
            return EXIT_CONFIG
        log.error("error: %s", exc)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        log.error("internal error: %s: %s", type(exc).__name__, exc)
        if args.verbose:
            raise
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
