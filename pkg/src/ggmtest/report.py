"""Report bundles: assembly, serialization, and file emission.

A ReportBundle is the single artifact every command produces.  It is
plain data (dicts, lists, scalars) so that ``report.json`` round-trips
exactly: python floats serialize via their shortest repr, which is
lossless, and re-reading the file reproduces the bundle.

emit_report writes, per the content present in the bundle:

- report.json            the full bundle, keys sorted
- nodes.csv              label, delta_w, delta_t, dof, p_raw, p_holm,
                         p_bonferroni, selected
- subsets_l<k>.csv       per-l increment tables
- summary.csv            rejection-rate grid, subsets x cells x statistic
- fwer.csv               FWER / power per (cell, l, method, statistic)
- plotdata/<name>.csv    histograms: bin_left, bin_right, density,
                         theory_density
- figures/<name>.png     rendered from the same plot tables

All CSVs use dot decimals, LF line endings, and repr-formatted floats.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chi2 import chi2_pdf, chi2_quantile, noncentral_chi2_pdf
from .errors import DomainError, ParseError
from .fwer import METHODS, PValueFamily, SelectionResult, bonferroni, holm, select_nodes
from .lrt import GlobalTestResult, SubsetIncrement, TwoSampleData
from .simulate import STATISTICS, MonteCarloSummary, ScenarioSpec, subset_label

NODE_COLUMNS = (
    "label", "delta_w", "delta_t", "dof", "p_raw", "p_holm", "p_bonferroni", "selected",
)
SUBSET_COLUMNS = (
    "label", "delta_w", "delta_t", "dof", "p_w", "p_t", "p_holm", "p_bonferroni", "selected",
)
PLOT_COLUMNS = ("bin_left", "bin_right", "density", "theory_density")

HIST_BINS = 40


@dataclass
class ReportBundle:
    """Everything one command computed, as JSON-serializable plain data."""

    kind: str
    alpha: float | None = None
    statistic: str | None = None
    adjustment: str | None = None
    l_values: tuple[int, ...] = ()
    global_result: dict | None = None
    node_table: list[dict] | None = None
    subset_tables: dict[int, list[dict]] | None = None
    selection: dict | None = None
    summary_tables: dict | None = None
    scenarios: list[dict] | None = None
    cell_errors: list[dict] | None = None
    plotdata: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "statistic": self.statistic,
            "adjustment": self.adjustment,
            "l_values": list(self.l_values),
            "global_result": self.global_result,
            "node_table": self.node_table,
            "subset_tables": (
                {str(l): rows for l, rows in self.subset_tables.items()}
                if self.subset_tables is not None
                else None
            ),
            "selection": self.selection,
            "summary_tables": self.summary_tables,
            "scenarios": self.scenarios,
            "cell_errors": self.cell_errors,
            "plotdata": self.plotdata,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ReportBundle":
        subset_tables = payload.get("subset_tables")
        return cls(
            kind=payload["kind"],
            alpha=payload.get("alpha"),
            statistic=payload.get("statistic"),
            adjustment=payload.get("adjustment"),
            l_values=tuple(payload.get("l_values", ())),
            global_result=payload.get("global_result"),
            node_table=payload.get("node_table"),
            subset_tables=(
                {int(l): rows for l, rows in subset_tables.items()}
                if subset_tables is not None
                else None
            ),
            selection=payload.get("selection"),
            summary_tables=payload.get("summary_tables"),
            scenarios=payload.get("scenarios"),
            cell_errors=payload.get("cell_errors"),
            plotdata=payload.get("plotdata", {}),
        )


def global_result_dict(result: GlobalTestResult) -> dict:
    return {
        "w": result.w,
        "mu_bartlett": result.mu_bartlett,
        "delta_bartlett": result.delta_bartlett,
        "t": result.t,
        "dof": result.dof,
        "p_w": result.p_w,
        "p_t": result.p_t,
    }


def _raw_pvalues(increments: list[SubsetIncrement], statistic: str) -> tuple[float, ...]:
    if statistic == "w":
        return tuple(inc.p_w for inc in increments)
    return tuple(inc.p_t for inc in increments)


def selection_method(adjustment: str) -> str:
    # 'both' reports both adjustment columns; Holm, being uniformly more
    # powerful, decides the selected flags.
    return "holm" if adjustment == "both" else adjustment


def primary_statistic(statistic: str) -> str:
    # 'both' keeps the corrected statistic as the one driving p_raw and
    # selection; the raw-scale p-values stay available in the tables.
    return "w" if statistic == "w" else "t"


def build_subset_table(
    data: TwoSampleData,
    increments: list[SubsetIncrement],
    alpha: float,
    adjustment: str,
    statistic: str,
) -> tuple[list[dict], SelectionResult]:
    """Rows for one subset family plus the selection over it."""
    labels = tuple(
        "+".join(data.node_labels[j - 1] for j in inc.m.members) for inc in increments
    )
    stat = primary_statistic(statistic)
    family = PValueFamily(labels, _raw_pvalues(increments, stat))
    p_holm = holm(family)
    p_bonf = bonferroni(family)
    result = select_nodes(family, alpha, selection_method(adjustment))
    chosen = set(result.selected)
    rows = []
    for label, inc, ph, pb in zip(labels, increments, p_holm, p_bonf):
        rows.append(
            {
                "label": label,
                "delta_w": inc.delta_w,
                "delta_t": inc.delta_t,
                "dof": inc.dof,
                "p_w": inc.p_w,
                "p_t": inc.p_t,
                "p_holm": ph,
                "p_bonferroni": pb,
                "selected": label in chosen,
            }
        )
    return rows, result


def node_rows_from_subset_rows(rows: list[dict], statistic: str) -> list[dict]:
    stat = primary_statistic(statistic)
    key = "p_w" if stat == "w" else "p_t"
    return [
        {
            "label": row["label"],
            "delta_w": row["delta_w"],
            "delta_t": row["delta_t"],
            "dof": row["dof"],
            "p_raw": row[key],
            "p_holm": row["p_holm"],
            "p_bonferroni": row["p_bonferroni"],
            "selected": row["selected"],
        }
        for row in rows
    ]


def selection_dict(result: SelectionResult, statistic: str) -> dict:
    return {
        "labels": list(result.labels),
        "raw": list(result.raw),
        "adjusted": list(result.adjusted),
        "selected": list(result.selected),
        "empty": result.is_empty,
        "alpha": result.alpha,
        "method": result.method,
        "statistic": primary_statistic(statistic),
    }


def histogram_table(sample, dof: int, noncentrality: float = 0.0, bins: int = HIST_BINS) -> dict:
    """Equal-width histogram of a sample with a theory density column.

    The range always covers every sample point, so the emitted density
    integrates to one; it also extends to the upper tail of the theory
    curve so plots keep their context even for concentrated samples.
    """
    arr = np.asarray(sample, dtype=float)
    if arr.size == 0:
        raise DomainError("histogram needs a nonempty sample")
    lo = min(0.0, float(arr.min()) - 1e-9)
    hi = max(chi2_quantile(0.999, dof) * 1.05 + noncentrality, float(arr.max()) + 1e-9)
    edges = np.linspace(lo, hi, bins + 1)
    density, _ = np.histogram(arr, bins=edges, density=True)
    rows = []
    for i in range(bins):
        mid = 0.5 * (edges[i] + edges[i + 1])
        if noncentrality > 0.0:
            theory = noncentral_chi2_pdf(mid, dof, noncentrality)
        else:
            theory = chi2_pdf(mid, dof)
        rows.append([float(edges[i]), float(edges[i + 1]), float(density[i]), float(theory)])
    return {"columns": list(PLOT_COLUMNS), "rows": rows}


def _spec_field_text(spec: ScenarioSpec, name: str) -> str:
    if name == "s":
        return "+".join(str(j) for j in spec.s.members) if spec.s is not None else "none"
    if name == "l_values":
        return "-".join(str(l) for l in spec.l_values)
    return repr(getattr(spec, name)) if isinstance(getattr(spec, name), float) else str(getattr(spec, name))


_LABEL_FIELDS = ("n1", "n2", "p", "rho", "delta_mu", "xi", "s", "b", "master_seed", "alpha", "l_values")


def cell_labels(specs: list[ScenarioSpec]) -> list[str]:
    """Short display labels: the fields that vary across the grid."""
    varying = [
        name
        for name in _LABEL_FIELDS
        if len({_spec_field_text(spec, name) for spec in specs}) > 1
    ]
    if not varying:
        # cells are de-duplicated upstream, so this is the single-cell case
        return ["cell"] * len(specs)
    return [
        ";".join(f"{name}={_spec_field_text(spec, name)}" for name in varying)
        for spec in specs
    ]


def assemble_simulate_bundle(
    summaries: list[MonteCarloSummary],
    cell_errors: list[dict] | None = None,
) -> ReportBundle:
    """Bundle a grid of scenario summaries with summary tables and plot data."""
    if not summaries and not cell_errors:
        raise DomainError("nothing to report: no cells")
    specs = [summary.spec for summary in summaries]
    labels = cell_labels(specs)

    cells = []
    for spec, label, summary in zip(specs, labels, summaries):
        cells.append(
            {
                "cell_id": spec.cell_id,
                "label": label,
                "spec": spec.to_dict(),
                "b_effective": summary.b_effective,
                "failures": len(summary.failures),
                "global_rejection_w": summary.global_rejection_w,
                "global_rejection_t": summary.global_rejection_t,
            }
        )

    l_union = sorted({l for spec in specs for l in spec.l_values})
    rejection_rows = []
    for l in l_union:
        with_l = [
            (label, summary)
            for label, summary in zip(labels, summaries)
            if l in summary.families
        ]
        if not with_l:
            continue
        subset_names = with_l[0][1].families[l].labels
        for j, name in enumerate(subset_names):
            for stat in STATISTICS:
                rates = {}
                for label, summary in with_l:
                    fam = summary.families[l]
                    value = fam.rejection_w[j] if stat == "w" else fam.rejection_t[j]
                    rates[label] = value
                rejection_rows.append(
                    {"l": l, "subset": name, "dof": with_l[0][1].families[l].dof,
                     "statistic": stat, "rates": rates}
                )

    fwer_rows = []
    for label, summary in zip(labels, summaries):
        for l in sorted(summary.families):
            fam = summary.families[l]
            for method in METHODS:
                for stat in STATISTICS:
                    fwer_rows.append(
                        {
                            "cell": label,
                            "l": l,
                            "method": method,
                            "statistic": stat,
                            "fwer": fam.fwer[method][stat],
                            "power_any": fam.power_any[method][stat],
                            "power_all": fam.power_all[method][stat],
                        }
                    )

    plotdata: dict[str, dict] = {}
    for spec, summary in zip(specs, summaries):
        for l in sorted(summary.families):
            fam = summary.families[l]
            pooled = fam.ecdf_samples.ravel()
            plotdata[f"null_l{l}_{spec.cell_id}"] = histogram_table(pooled, fam.dof)
        if spec.s is not None and summary.lambda_hat is not None:
            singles = summary.families[1]
            for j, name in enumerate(singles.labels):
                plotdata[f"noncentral_node{name}_{spec.cell_id}"] = histogram_table(
                    singles.ecdf_samples[:, j],
                    singles.dof,
                    noncentrality=summary.lambda_hat[j],
                )

    alphas = {spec.alpha for spec in specs}
    return ReportBundle(
        kind="simulate",
        alpha=alphas.pop() if len(alphas) == 1 else None,
        l_values=tuple(l_union),
        summary_tables={"cells": cells, "rejection": rejection_rows, "fwer": fwer_rows},
        scenarios=[summary.to_dict() for summary in summaries],
        cell_errors=list(cell_errors) if cell_errors else None,
        plotdata=plotdata,
    )


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def emit_report(bundle: ReportBundle, directory) -> list[str]:
    """Write all report files for a bundle; returns the paths written."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    report_path = out / "report.json"
    with open(report_path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(bundle.to_dict(), handle, sort_keys=True, allow_nan=False)
        handle.write("\n")
    written.append(str(report_path))

    if bundle.node_table is not None:
        path = out / "nodes.csv"
        _write_csv(
            path,
            list(NODE_COLUMNS),
            [[row[col] for col in NODE_COLUMNS] for row in bundle.node_table],
        )
        written.append(str(path))

    if bundle.subset_tables is not None:
        for l in sorted(bundle.subset_tables):
            path = out / f"subsets_l{l}.csv"
            _write_csv(
                path,
                list(SUBSET_COLUMNS),
                [[row[col] for col in SUBSET_COLUMNS] for row in bundle.subset_tables[l]],
            )
            written.append(str(path))

    if bundle.summary_tables is not None:
        cells = bundle.summary_tables["cells"]
        cell_order = [cell["label"] for cell in cells]
        path = out / "summary.csv"
        header = ["l", "subset", "dof", "statistic"] + cell_order
        rows = [
            [row["l"], row["subset"], row["dof"], row["statistic"]]
            + [row["rates"].get(label) for label in cell_order]
            for row in bundle.summary_tables["rejection"]
        ]
        _write_csv(path, header, rows)
        written.append(str(path))

        path = out / "fwer.csv"
        header = ["cell", "l", "method", "statistic", "fwer", "power_any", "power_all"]
        rows = [[row[col] for col in header] for row in bundle.summary_tables["fwer"]]
        _write_csv(path, header, rows)
        written.append(str(path))

    if bundle.plotdata:
        plotdir = out / "plotdata"
        plotdir.mkdir(exist_ok=True)
        for name in sorted(bundle.plotdata):
            table = bundle.plotdata[name]
            path = plotdir / f"{name}.csv"
            _write_csv(path, list(table["columns"]), table["rows"])
            written.append(str(path))

    from . import figures

    written.extend(figures.render_figures(bundle, out))
    return written


def load_report(path) -> ReportBundle:
    """Read a report.json back into a bundle (exact round-trip)."""
    with open(path, encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid report JSON ({exc})") from None
    if not isinstance(payload, dict) or "kind" not in payload:
        raise ParseError(f"{path}: not a report bundle")
    return ReportBundle.from_dict(payload)
