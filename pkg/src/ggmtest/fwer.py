"""Family-wise error rate adjustments and altered-node selection.

Both adjustments control the probability of any false rejection under
arbitrary dependence between the tests, which matters here because
increments of overlapping subsets are correlated.  Families are always
formed within one subset size; p-values are never pooled across sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

METHODS = ("holm", "bonferroni")


@dataclass(frozen=True)
class PValueFamily:
    """A labelled family of raw p-values tested together."""

    labels: tuple[str, ...]
    raw: tuple[float, ...]

    def __post_init__(self) -> None:
        labels = tuple(str(s) for s in self.labels)
        raw = tuple(float(v) for v in self.raw)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "raw", raw)
        if not labels:
            raise DomainError("p-value family must be nonempty")
        if len(labels) != len(raw):
            raise DomainError(
                f"family has {len(labels)} labels but {len(raw)} p-values"
            )
        if len(set(labels)) != len(labels):
            raise DomainError("family labels must be unique")
        if any(not 0.0 <= v <= 1.0 for v in raw):
            raise DomainError("raw p-values must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.raw)


@dataclass(frozen=True)
class SelectionResult:
    """Adjusted p-values and the labels selected at level alpha."""

    labels: tuple[str, ...]
    raw: tuple[float, ...]
    adjusted: tuple[float, ...]
    selected: tuple[str, ...]
    alpha: float
    method: str

    @property
    def is_empty(self) -> bool:
        return not self.selected


def _bonferroni_array(raw: np.ndarray) -> np.ndarray:
    return np.minimum(1.0, raw * raw.size)


def _holm_array(raw: np.ndarray) -> np.ndarray:
    # Step-down: ascending sort (stable, so ties keep original index order),
    # multiply the i-th smallest by (m - i), enforce monotonicity by a
    # running maximum, cap at 1, and undo the sort.
    m = raw.size
    order = np.argsort(raw, kind="stable")
    scaled = raw[order] * (m - np.arange(m))
    adjusted = np.minimum(1.0, np.maximum.accumulate(scaled))
    out = np.empty(m)
    out[order] = adjusted
    return out


def bonferroni(family: PValueFamily) -> tuple[float, ...]:
    """Adjusted p-values min(1, m * raw)."""
    return tuple(_bonferroni_array(np.asarray(family.raw)).tolist())


def holm(family: PValueFamily) -> tuple[float, ...]:
    """Step-down adjusted p-values; never above the Bonferroni values."""
    return tuple(_holm_array(np.asarray(family.raw)).tolist())


def select_nodes(family: PValueFamily, alpha: float, method: str) -> SelectionResult:
    """Select the labels whose adjusted p-value is at most alpha."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    if method not in METHODS:
        raise DomainError(f"method must be one of {METHODS}, got {method!r}")
    adjust = holm if method == "holm" else bonferroni
    adjusted = adjust(family)
    selected = tuple(
        label for label, value in zip(family.labels, adjusted) if value <= alpha
    )
    return SelectionResult(
        labels=family.labels,
        raw=family.raw,
        adjusted=adjusted,
        selected=selected,
        alpha=alpha,
        method=method,
    )
