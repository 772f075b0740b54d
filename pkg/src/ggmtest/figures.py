"""Figure rendering for report bundles.

Figures are drawn from the same tables that land in the CSV outputs, so
a PNG never shows anything the delimited files do not contain.  The Agg
backend is forced and PNG metadata is stripped of the writer version, so
rendering is byte-reproducible for identical bundles.
"""

from __future__ import annotations

from pathlib import Path

_DPI = 110
_SAVE_KWARGS = {"dpi": _DPI, "metadata": {"Software": None}}


def _plt():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def _step_outline(table):
    # histogram rows -> x/y polyline tracing the bin tops
    xs, ys = [], []
    for left, right, density, _theory in table["rows"]:
        xs.extend([left, right])
        ys.extend([density, density])
    return xs, ys


def _curve(table):
    mids = [0.5 * (row[0] + row[1]) for row in table["rows"]]
    theory = [row[3] for row in table["rows"]]
    return mids, theory


def _render_hist_grid(plt, tables, row_keys, col_keys, title, path):
    nrows, ncols = len(row_keys), len(col_keys)
    fig, axes = plt.subplots(
        nrows, ncols,
        figsize=(2.6 * ncols + 1.2, 2.2 * nrows + 0.8),
        squeeze=False,
    )
    for i, row_key in enumerate(row_keys):
        for j, col_key in enumerate(col_keys):
            ax = axes[i][j]
            table = tables.get((row_key, col_key))
            if table is None:
                ax.set_axis_off()
                continue
            xs, ys = _step_outline(table)
            ax.fill_between(xs, ys, step=None, color="0.8")
            ax.plot(*_curve(table), color="black", linewidth=1.0)
            if i == 0:
                ax.set_title(str(col_key), fontsize=8)
            if j == 0:
                ax.set_ylabel(str(row_key), fontsize=8)
            ax.tick_params(labelsize=6)
    fig.suptitle(title, fontsize=10)
    fig.tight_layout(rect=(0, 0, 1, 0.95))
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def _render_null_calibration(plt, bundle, outdir: Path) -> list[str]:
    # rows: subset size; columns: grid cells (ordered as in the summary)
    cells = bundle.summary_tables["cells"]
    tables = {}
    row_keys, col_keys = [], []
    for cell in cells:
        label = cell["label"]
        cell_id = cell["cell_id"]
        for l in bundle.l_values:
            table = bundle.plotdata.get(f"null_l{l}_{cell_id}")
            if table is None:
                continue
            tables[(f"l={l}", label)] = table
            if f"l={l}" not in row_keys:
                row_keys.append(f"l={l}")
            if label not in col_keys:
                col_keys.append(label)
    if not tables:
        return []
    path = outdir / "null_calibration.png"
    _render_hist_grid(
        plt, tables, row_keys, col_keys,
        "subset increments vs chi-square reference", path,
    )
    return [str(path)]


def _render_fwer(plt, bundle, outdir: Path) -> list[str]:
    rows = bundle.summary_tables["fwer"]
    rows = [r for r in rows if r["fwer"] is not None]
    if not rows:
        return []
    cells = [cell["label"] for cell in bundle.summary_tables["cells"]]
    styles = {"holm": "o-", "bonferroni": "s--"}
    stats = sorted({r["statistic"] for r in rows})
    fig, axes = plt.subplots(1, len(stats), figsize=(4.2 * len(stats), 3.2), squeeze=False)
    alpha = bundle.alpha
    for k, stat in enumerate(stats):
        ax = axes[0][k]
        for l in bundle.l_values:
            for method, style in styles.items():
                pts = [
                    (cells.index(r["cell"]), r["fwer"])
                    for r in rows
                    if r["statistic"] == stat and r["method"] == method and r["l"] == l
                ]
                if not pts:
                    continue
                pts.sort()
                ax.plot(
                    [x for x, _ in pts], [y for _, y in pts], style,
                    markersize=3, linewidth=1,
                    label=f"l={l} {method}",
                )
        if alpha is not None:
            ax.axhline(alpha, color="black", linestyle=":", linewidth=1)
        ax.set_xticks(range(len(cells)))
        ax.set_xticklabels(cells, rotation=45, ha="right", fontsize=6)
        ax.set_title(f"statistic {stat}", fontsize=9)
        ax.set_ylabel("family-wise error rate", fontsize=8)
        ax.tick_params(labelsize=6)
        ax.legend(fontsize=6)
    fig.tight_layout()
    path = outdir / "fwer.png"
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
    return [str(path)]


def _render_noncentral(plt, bundle, outdir: Path) -> list[str]:
    written = []
    for cell in bundle.summary_tables["cells"]:
        cell_id = cell["cell_id"]
        prefix = "noncentral_node"
        names = sorted(
            name for name in bundle.plotdata
            if name.startswith(prefix) and name.endswith(cell_id)
        )
        if not names:
            continue
        tables = {}
        col_keys = []
        for name in names:
            node = name[len(prefix):-(len(cell_id) + 1)]
            tables[("nodes", node)] = bundle.plotdata[name]
            col_keys.append(node)
        path = outdir / f"noncentral_{cell_id}.png"
        _render_hist_grid(
            plt, tables, ["nodes"], col_keys,
            f"singleton increments vs noncentral reference ({cell['label']})", path,
        )
        written.append(str(path))
    return written


def _render_node_bars(plt, bundle, outdir: Path) -> list[str]:
    table = bundle.node_table
    if not table:
        return []
    labels = [row["label"] for row in table]
    fig, axes = plt.subplots(1, 2, figsize=(8.4, 3.2))
    axes[0].bar(range(len(table)), [row["delta_t"] for row in table], color="0.6")
    axes[0].set_xticks(range(len(table)))
    axes[0].set_xticklabels(labels, rotation=45, ha="right", fontsize=6)
    axes[0].set_ylabel("adjusted increment", fontsize=8)
    bars = axes[1].bar(range(len(table)), [row["p_holm"] for row in table], color="0.6")
    for bar, row in zip(bars, table):
        if row["selected"]:
            bar.set_color("0.2")
    if bundle.alpha is not None:
        axes[1].axhline(bundle.alpha, color="black", linestyle=":", linewidth=1)
    axes[1].set_xticks(range(len(table)))
    axes[1].set_xticklabels(labels, rotation=45, ha="right", fontsize=6)
    axes[1].set_ylabel("adjusted p-value", fontsize=8)
    for ax in axes:
        ax.tick_params(labelsize=6)
    fig.tight_layout()
    path = outdir / "nodes.png"
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
    return [str(path)]


def _render_subset_bars(plt, bundle, outdir: Path) -> list[str]:
    written = []
    for l in sorted(bundle.subset_tables or {}):
        rows = bundle.subset_tables[l]
        if not rows:
            continue
        fig, ax = plt.subplots(figsize=(max(4.0, 0.22 * len(rows) + 1.5), 3.0))
        ax.bar(range(len(rows)), [row["delta_t"] for row in rows], color="0.6")
        ax.set_xticks(range(len(rows)))
        ax.set_xticklabels([row["label"] for row in rows], rotation=90, fontsize=5)
        ax.set_ylabel("adjusted increment", fontsize=8)
        ax.tick_params(labelsize=6)
        fig.tight_layout()
        path = outdir / f"subsets_l{l}.png"
        fig.savefig(path, **_SAVE_KWARGS)
        plt.close(fig)
        written.append(str(path))
    return written


def render_figures(bundle, directory) -> list[str]:
    """Render the bundle's figures under <directory>/figures."""
    plt = _plt()
    outdir = Path(directory) / "figures"
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    if bundle.kind == "simulate" and bundle.summary_tables is not None:
        written.extend(_render_null_calibration(plt, bundle, outdir))
        written.extend(_render_fwer(plt, bundle, outdir))
        written.extend(_render_noncentral(plt, bundle, outdir))
    else:
        written.extend(_render_node_bars(plt, bundle, outdir))
        written.extend(_render_subset_bars(plt, bundle, outdir))
    return written
