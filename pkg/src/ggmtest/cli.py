"""Command line front end.

Four subcommands: ``test`` (full analysis of two CSV samples with
node-level selection), ``scan`` (increment tables only), ``simulate``
(Monte Carlo grid from a config file, resumable via a manifest), and
``report`` (re-render files from an existing report.json).

Every failure exits nonzero after printing a single machine-parsable
line ``ggmtest: error <CODE>: <message>`` on stderr.  Validation runs
before any computation, so an invalid invocation writes nothing.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .dataio import CellPlan, parse_dataset, parse_scenario_grid
from .errors import (
    ConfigError,
    DegenerateCorrection,
    DomainError,
    GgmTestError,
    NotPositiveDefinite,
    ParseError,
    SchemaMismatch,
    SingularCovariance,
    TooFewRows,
)
from .lrt import adjusted_t, increment_scan
from .report import (
    ReportBundle,
    assemble_simulate_bundle,
    build_subset_table,
    emit_report,
    global_result_dict,
    load_report,
    node_rows_from_subset_rows,
    selection_dict,
)
from .simulate import MonteCarloSummary, run_scenario

ADJUSTMENTS = ("holm", "bonferroni", "both")
STAT_CHOICES = ("t", "w", "both")

# stderr code -> exit status; most specific exception first
_ERROR_TABLE: tuple[tuple[type, str, int], ...] = (
    (ConfigError, "CONFIG", 3),
    (SchemaMismatch, "SCHEMA", 4),
    (TooFewRows, "DATA", 4),
    (ParseError, "PARSE", 4),
    (SingularCovariance, "SINGULAR", 6),
    (NotPositiveDefinite, "NOTPOSDEF", 6),
    (DegenerateCorrection, "DEGENERATE", 6),
    (DomainError, "DOMAIN", 5),
    (GgmTestError, "ERROR", 1),
    (OSError, "IO", 7),
)


@dataclass
class RunConfig:
    """Validated invocation parameters for one command."""

    command: str
    group1: str | None = None
    group2: str | None = None
    config: str | None = None
    bundle_path: str | None = None
    out: str = "."
    alpha: float = 0.05
    l_values: tuple[int, ...] = (1,)
    adjustment: str = "holm"
    statistic: str = "t"
    replicates: int | None = None
    master_seed: int | None = None

    def validate(self) -> None:
        if self.command in ("test", "scan"):
            for name, path in (("--group1", self.group1), ("--group2", self.group2)):
                if path is None:
                    raise ConfigError(f"{name} is required for {self.command}")
                if not os.path.isfile(path):
                    raise ConfigError(f"{name}: no such file: {path}")
            if not 0.0 < self.alpha < 1.0:
                raise DomainError(f"--alpha must lie in (0, 1), got {self.alpha!r}")
            if not self.l_values:
                raise ConfigError("--l needs at least one subset size")
            if any(l < 1 for l in self.l_values):
                raise DomainError(f"--l values must be >= 1, got {self.l_values}")
            if self.adjustment not in ADJUSTMENTS:
                raise ConfigError(f"--adjust must be one of {ADJUSTMENTS}")
            if self.statistic not in STAT_CHOICES:
                raise ConfigError(f"--statistic must be one of {STAT_CHOICES}")
        elif self.command == "simulate":
            if self.config is None:
                raise ConfigError("--config is required for simulate")
            if not os.path.isfile(self.config):
                raise ConfigError(f"--config: no such file: {self.config}")
            if self.replicates is not None and self.replicates < 1:
                raise DomainError(f"--replicates must be >= 1, got {self.replicates}")
        elif self.command == "report":
            if self.bundle_path is None:
                raise ConfigError("--bundle is required for report")
            if not os.path.isfile(self.bundle_path):
                raise ConfigError(f"--bundle: no such file: {self.bundle_path}")
        else:
            raise ConfigError(f"unknown command {self.command!r}")


def _analysis_bundle(config: RunConfig, with_selection: bool) -> ReportBundle:
    data = parse_dataset(config.group1, config.group2)
    l_values = config.l_values
    if with_selection and 1 not in l_values:
        # node-level selection needs the singleton scan
        l_values = tuple(sorted({1, *l_values}))
    for l in l_values:
        if l > data.p - 1:
            raise DomainError(
                f"subset size l={l} too large for p={data.p} nodes"
            )
    result = adjusted_t(data)
    subset_tables = {}
    selections = {}
    for l in l_values:
        rows, sel = build_subset_table(
            data, increment_scan(data, l), config.alpha, config.adjustment, config.statistic
        )
        subset_tables[l] = rows
        selections[l] = sel
    node_table = None
    selection = None
    if with_selection:
        node_table = node_rows_from_subset_rows(subset_tables[1], config.statistic)
        selection = selection_dict(selections[1], config.statistic)
    return ReportBundle(
        kind="test" if with_selection else "scan",
        alpha=config.alpha,
        statistic=config.statistic,
        adjustment=config.adjustment,
        l_values=l_values,
        global_result=global_result_dict(result),
        node_table=node_table,
        subset_tables=subset_tables,
        selection=selection,
    )


def cmd_test(config: RunConfig) -> ReportBundle:
    """Global test, singleton scan, adjustment, and selection."""
    config.validate()
    bundle = _analysis_bundle(config, with_selection=True)
    emit_report(bundle, config.out)
    return bundle


def cmd_scan(config: RunConfig) -> ReportBundle:
    """Increment tables only, for the requested subset sizes."""
    config.validate()
    bundle = _analysis_bundle(config, with_selection=False)
    emit_report(bundle, config.out)
    return bundle


def _manifest_path(outdir: Path) -> Path:
    return outdir / "manifest.json"


def _load_manifest(outdir: Path) -> dict:
    path = _manifest_path(outdir)
    if not path.is_file():
        return {"cells": {}}
    with open(path, encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid manifest ({exc})") from None
    if not isinstance(payload, dict) or "cells" not in payload:
        raise ParseError(f"{path}: not a manifest file")
    return payload


def _write_manifest(outdir: Path, manifest: dict) -> None:
    with open(_manifest_path(outdir), "w", encoding="utf-8", newline="\n") as handle:
        json.dump(manifest, handle, sort_keys=True, allow_nan=False)
        handle.write("\n")


def _load_cell(path: Path, plan: CellPlan) -> MonteCarloSummary | None:
    if not path.is_file():
        return None
    with open(path, encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError:
            return None
    try:
        summary = MonteCarloSummary.from_dict(payload)
    except (KeyError, TypeError, ValueError):
        return None
    if summary.spec != plan.spec:
        return None
    return summary


def cmd_simulate(config: RunConfig) -> ReportBundle:
    """Run (or resume) a simulation grid and write its report."""
    config.validate()
    plans = parse_scenario_grid(
        config.config, replicates=config.replicates, seed=config.master_seed
    )
    if not plans:
        raise ConfigError(f"{config.config}: grid expands to no cells")

    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cells_dir = outdir / "cells"
    cells_dir.mkdir(exist_ok=True)
    manifest = _load_manifest(outdir)

    summaries: list[MonteCarloSummary] = []
    cell_errors: list[dict] = []
    for plan in plans:
        if plan.spec is None:
            cell_errors.append({"cell_id": plan.cell_id, "error": plan.error})
            manifest["cells"][plan.cell_id] = {"status": "error", "message": plan.error}
            _write_manifest(outdir, manifest)
            print(f"cell {plan.cell_id}: skipped ({plan.error})")
            continue
        cell_file = cells_dir / f"{plan.cell_id}.json"
        entry = manifest["cells"].get(plan.cell_id)
        summary = None
        if entry and entry.get("status") == "done":
            summary = _load_cell(cell_file, plan)
        if summary is None:
            summary = run_scenario(plan.spec)
            with open(cell_file, "w", encoding="utf-8", newline="\n") as handle:
                json.dump(summary.to_dict(), handle, sort_keys=True, allow_nan=False)
                handle.write("\n")
            manifest["cells"][plan.cell_id] = {
                "status": "done",
                "file": f"cells/{plan.cell_id}.json",
            }
            _write_manifest(outdir, manifest)
            print(f"cell {plan.cell_id}: done ({summary.b_effective}/{plan.spec.b} replicates)")
        else:
            print(f"cell {plan.cell_id}: reused from manifest")
        summaries.append(summary)

    if not summaries:
        raise DomainError("every grid cell was invalid; nothing was simulated")
    bundle = assemble_simulate_bundle(summaries, cell_errors)
    emit_report(bundle, outdir)
    return bundle


def cmd_report(config: RunConfig) -> ReportBundle:
    """Re-render all report files from an existing report.json."""
    config.validate()
    bundle = load_report(config.bundle_path)
    emit_report(bundle, config.out)
    return bundle


def _parse_l(text: str) -> tuple[int, ...]:
    tokens = [tok.strip() for tok in text.split(",") if tok.strip()]
    if not tokens:
        raise argparse.ArgumentTypeError("expected comma-separated subset sizes")
    try:
        values = sorted({int(tok) for tok in tokens})
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid subset sizes: {text!r}") from None
    return tuple(values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ggmtest",
        description="Two-sample equality tests and node localization for Gaussian data",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_analysis_args(cmd: argparse.ArgumentParser, default_l: str) -> None:
        cmd.add_argument("--group1", required=True, help="CSV file for sample 1")
        cmd.add_argument("--group2", required=True, help="CSV file for sample 2")
        cmd.add_argument("--alpha", type=float, default=0.05, help="selection level (default 0.05)")
        cmd.add_argument(
            "--l", type=_parse_l, default=_parse_l(default_l),
            help=f"comma-separated subset sizes (default {default_l})",
        )
        cmd.add_argument("--adjust", choices=ADJUSTMENTS, default="holm")
        cmd.add_argument("--statistic", choices=STAT_CHOICES, default="t")
        cmd.add_argument("--out", required=True, help="output directory")

    add_analysis_args(sub.add_parser("test", help="full analysis with node selection"), "1")
    add_analysis_args(sub.add_parser("scan", help="increment tables only"), "1")

    sim = sub.add_parser("simulate", help="run a Monte Carlo grid from a config file")
    sim.add_argument("--config", required=True, help="flat key=value grid config")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--replicates", type=int, default=None, help="override replicate count")
    sim.add_argument("--seed", type=int, default=None, help="override master seed")

    rep = sub.add_parser("report", help="re-render files from a report.json")
    rep.add_argument("--bundle", required=True, help="path to an existing report.json")
    rep.add_argument("--out", required=True, help="output directory")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.command in ("test", "scan"):
        return RunConfig(
            command=args.command,
            group1=args.group1,
            group2=args.group2,
            out=args.out,
            alpha=args.alpha,
            l_values=args.l,
            adjustment=args.adjust,
            statistic=args.statistic,
        )
    if args.command == "simulate":
        return RunConfig(
            command="simulate",
            config=args.config,
            out=args.out,
            replicates=args.replicates,
            master_seed=args.seed,
        )
    return RunConfig(command="report", bundle_path=args.bundle, out=args.out)


_COMMANDS = {
    "test": cmd_test,
    "scan": cmd_scan,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def _describe(bundle: ReportBundle) -> list[str]:
    lines = []
    if bundle.global_result is not None:
        g = bundle.global_result
        lines.append(
            f"global: w={g['w']:.6g} t={g['t']:.6g} dof={g['dof']} "
            f"p_w={g['p_w']:.4g} p_t={g['p_t']:.4g}"
        )
    if bundle.selection is not None:
        chosen = bundle.selection["selected"]
        lines.append(
            "selected nodes: " + (", ".join(chosen) if chosen else "(none)")
        )
    if bundle.summary_tables is not None:
        lines.append(f"cells summarized: {len(bundle.summary_tables['cells'])}")
    if bundle.cell_errors:
        lines.append(f"cells with parameter errors: {len(bundle.cell_errors)}")
    return lines


_CATCHABLE = tuple(exc_type for exc_type, _, _ in _ERROR_TABLE)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = _config_from_args(args)
    try:
        bundle = _COMMANDS[args.command](config)
    except _CATCHABLE as exc:
        for exc_type, code, status in _ERROR_TABLE:
            if isinstance(exc, exc_type):
                message = " ".join(str(exc).split())
                print(f"ggmtest: error {code}: {message}", file=sys.stderr)
                return status
        raise  # pragma: no cover - unreachable
    for line in _describe(bundle):
        print(line)
    print(f"report written to {config.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
