"""Input parsing: two-sample CSV datasets and simulation grid configs.

Datasets are plain CSV, UTF-8, first row of node labels, every later row
one observation.  Both group files must carry the identical label row.

Simulation configs are flat ``key = value`` text.  Keys taking several
comma-separated values (n, n1, n2, delta_mu, xi, s) span a grid by cross
product; the remaining keys apply to every cell.  Node sets are written
with '+' between members ("1+2"), and "none" (or an empty value) means
no altered nodes.  Cells whose altered set is empty are normalized to
delta_mu = 0, xi = 1 and de-duplicated, so a grid like
``delta_mu = 0, 0.5 / s = none, 1`` contains one null cell, not two.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, ParseError, SchemaMismatch, TooFewRows
from .lrt import NodeSet, TwoSampleData
from .simulate import ScenarioSpec, format_cell_id


def _read_matrix(path: str) -> tuple[tuple[str, ...], np.ndarray]:
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc})") from None
    if not rows:
        raise ParseError(f"{path}: file is empty")
    labels = tuple(cell.strip() for cell in rows[0])
    if not labels:
        raise ParseError(f"{path}:1: header row has no columns")
    for j, label in enumerate(labels, start=1):
        if not label:
            raise ParseError(f"{path}:1: empty label in column {j}")
    if len(set(labels)) != len(labels):
        raise ParseError(f"{path}:1: duplicate node labels")

    values = []
    for i, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            raise ParseError(f"{path}:{i}: blank row")
        if len(row) != len(labels):
            raise ParseError(
                f"{path}:{i}: expected {len(labels)} cells, got {len(row)}"
            )
        parsed = []
        for j, cell in enumerate(row, start=1):
            text = cell.strip()
            if not text:
                raise ParseError(f"{path}:{i}: column {j} ({labels[j - 1]}): empty cell")
            try:
                value = float(text)
            except ValueError:
                raise ParseError(
                    f"{path}:{i}: column {j} ({labels[j - 1]}): non-numeric cell {text!r}"
                ) from None
            if not math.isfinite(value):
                raise ParseError(
                    f"{path}:{i}: column {j} ({labels[j - 1]}): non-finite cell {text!r}"
                )
            parsed.append(value)
        values.append(parsed)

    if len(values) < 2:
        raise TooFewRows(f"{path}: need at least 2 observation rows, got {len(values)}")
    return labels, np.array(values, dtype=float)


def parse_dataset(path1: str, path2: str) -> TwoSampleData:
    """Read two group CSVs sharing one label row into a TwoSampleData."""
    labels1, x1 = _read_matrix(path1)
    labels2, x2 = _read_matrix(path2)
    if labels1 != labels2:
        raise SchemaMismatch(
            f"label rows differ between {path1} and {path2}: "
            f"{list(labels1)} vs {list(labels2)}"
        )
    return TwoSampleData(x1, x2, labels1)


# Config keys whose comma-separated values span the grid.
_GRID_KEYS = ("n", "n1", "n2", "delta_mu", "xi", "s")
_SCALAR_KEYS = ("p", "rho", "replicates", "seed", "alpha", "l")
_ALL_KEYS = set(_GRID_KEYS) | set(_SCALAR_KEYS)


def _parse_int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected an integer, got {text!r}") from None


def _parse_float(key: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"key {key!r}: expected a finite number, got {text!r}")
    return value


def _parse_node_set(key: str, text: str, p: int) -> NodeSet | None:
    if text.lower() in ("", "none"):
        return None
    members = []
    for token in text.split("+"):
        members.append(_parse_int(key, token.strip()))
    try:
        return NodeSet(tuple(sorted(members)), p)
    except Exception as exc:
        raise ConfigError(f"key {key!r}: invalid node set {text!r}: {exc}") from None


def read_config(path: str) -> dict[str, list[str]]:
    """Raw key -> value-token-list mapping from a flat config file."""
    entries: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip().lower()
            if key not in _ALL_KEYS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in entries:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            tokens = [tok.strip() for tok in value.split(",")]
            if key != "s" and any(not tok for tok in tokens):
                raise ConfigError(f"{path}:{lineno}: empty value for key {key!r}")
            entries[key] = tokens
    return entries


@dataclass(frozen=True)
class CellPlan:
    """One grid cell: either a runnable spec or a recorded parameter error."""

    cell_id: str
    spec: ScenarioSpec | None
    error: str | None = None


def build_grid(
    entries: dict[str, list[str]],
    replicates: int | None = None,
    seed: int | None = None,
) -> list[CellPlan]:
    """Expand a parsed config into grid cells, in deterministic order.

    replicates and seed, when given, override the config values (these
    mirror the command line flags).  Structurally broken configs raise
    ConfigError; a cell whose parameters are individually invalid (for
    example sample sizes too small for the dimension) becomes an error
    entry so the remaining cells still run.
    """
    if "n" in entries and ("n1" in entries or "n2" in entries):
        raise ConfigError("give either 'n' or the pair 'n1'/'n2', not both")
    if ("n1" in entries) != ("n2" in entries):
        raise ConfigError("'n1' and 'n2' must be given together")
    if "n" not in entries and "n1" not in entries:
        raise ConfigError("missing group sizes: set 'n' or 'n1'/'n2'")

    def scalar(key: str, default: str) -> str:
        if key not in entries:
            return default
        tokens = entries[key]
        if len(tokens) != 1:
            raise ConfigError(f"key {key!r} takes a single value, got {len(tokens)}")
        return tokens[0]

    p = _parse_int("p", scalar("p", "8"))
    rho = _parse_float("rho", scalar("rho", "0.4"))
    alpha = _parse_float("alpha", scalar("alpha", "0.05"))
    b = replicates if replicates is not None else _parse_int("replicates", scalar("replicates", "2000"))
    master_seed = seed if seed is not None else _parse_int("seed", scalar("seed", "0"))
    l_values = tuple(_parse_int("l", tok) for tok in entries.get("l", ["1"]))

    if "n" in entries:
        size_pairs = [(_parse_int("n", tok),) * 2 for tok in entries["n"]]
    else:
        if len(entries["n1"]) != len(entries["n2"]):
            raise ConfigError("'n1' and 'n2' must list the same number of values")
        size_pairs = [
            (_parse_int("n1", tok1), _parse_int("n2", tok2))
            for tok1, tok2 in zip(entries["n1"], entries["n2"])
        ]
    delta_mus = [_parse_float("delta_mu", tok) for tok in entries.get("delta_mu", ["0"])]
    xis = [_parse_float("xi", tok) for tok in entries.get("xi", ["1"])]
    node_sets = [_parse_node_set("s", tok, p) for tok in entries.get("s", ["none"])]

    plans: list[CellPlan] = []
    seen: set[str] = set()
    for n1, n2 in size_pairs:
        for s in node_sets:
            for grid_dmu in delta_mus:
                for grid_xi in xis:
                    # null cells ignore the perturbation magnitudes, which
                    # collapses the cross product onto a single cell
                    delta_mu, xi = (0.0, 1.0) if s is None else (grid_dmu, grid_xi)
                    cell_id = format_cell_id(
                        p, rho, n1, n2, delta_mu, xi,
                        s.members if s is not None else None,
                        b, master_seed, alpha, l_values,
                    )
                    if cell_id in seen:
                        continue
                    seen.add(cell_id)
                    try:
                        spec = ScenarioSpec(
                            n1=n1,
                            n2=n2,
                            p=p,
                            rho=rho,
                            delta_mu=delta_mu,
                            xi=xi,
                            s=s,
                            b=b,
                            master_seed=master_seed,
                            alpha=alpha,
                            l_values=l_values,
                        )
                    except DomainError as exc:
                        plans.append(CellPlan(cell_id=cell_id, spec=None, error=str(exc)))
                    else:
                        plans.append(CellPlan(cell_id=cell_id, spec=spec))
    return plans


def parse_scenario_grid(
    path: str, replicates: int | None = None, seed: int | None = None
) -> list[CellPlan]:
    """Read a config file and expand it into its grid cells."""
    return build_grid(read_config(path), replicates=replicates, seed=seed)
