"""Monte Carlo harness: data generation, replication, and aggregation.

One scenario is a cell of the simulation grid: dimension, AR(1)
correlation, group sizes, a perturbed node set with mean shift and
variance rescale, replicate count, seed, level, and the subset sizes to
scan.  Replicates draw group 1 from the base parameters and group 2 from
the perturbed ones, each from its own derived random stream, so results
never depend on execution order or thread count.  Aggregation walks
replicates in index order with a fixed summation order, which makes the
whole summary bit-reproducible.

Failed replicates (singular covariance estimates are possible at the
smallest sample sizes) are counted and excluded from every rate rather
than silently dropped.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .chi2 import chi2_cdf, noncentral_chi2_cdf
from .errors import DegenerateCorrection, DomainError, NotPositiveDefinite
from .fwer import METHODS, _bonferroni_array, _holm_array
from .linalg import cholesky
from .lrt import (
    GlobalTestResult,
    NodeSet,
    SubsetIncrement,
    TwoSampleData,
    adjusted_t,
    dof_increment,
    enumerate_subsets,
    increment_scan,
)
from .rng import derive_stream, mvn_sample

THREADS_ENV_VAR = "GGMTEST_THREADS"

# At most this many delta_t draws are stored per subset (the first ones in
# replicate order); all rates and KS distances still use every replicate.
ECDF_SAMPLE_CAP = 5000

STATISTICS = ("w", "t")


def thread_count() -> int:
    """Worker count from the environment; defaults to 1."""
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        value = int(raw)
    except ValueError:
        raise DomainError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    if value < 1:
        raise DomainError(f"{THREADS_ENV_VAR} must be >= 1, got {value}")
    return value


@dataclass(frozen=True)
class Mu0Sigma0:
    """A mean vector and covariance matrix pair used to generate a group."""

    mu0: np.ndarray
    sigma0: np.ndarray

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu0, dtype=float)
        sigma = np.asarray(self.sigma0, dtype=float)
        if mu.ndim != 1:
            raise DomainError(f"mean must be 1-d, got ndim={mu.ndim}")
        if sigma.shape != (mu.size, mu.size):
            raise DomainError(
                f"covariance shape {sigma.shape} does not match mean length {mu.size}"
            )
        if not (np.isfinite(mu).all() and np.isfinite(sigma).all()):
            raise DomainError("parameters contain non-finite entries")
        if np.abs(sigma - sigma.T).max() > 1e-10 * max(np.abs(sigma).max(), 1e-30):
            raise DomainError("covariance must be symmetric")
        mu = mu.copy()
        sigma = sigma.copy()
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mu0", mu)
        object.__setattr__(self, "sigma0", sigma)

    @property
    def p(self) -> int:
        return self.mu0.size


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    """Covariance with entries rho^|t-s|; positive definite for |rho| < 1."""
    if not isinstance(p, int) or p < 1:
        raise DomainError(f"p must be a positive integer, got {p!r}")
    rho = float(rho)
    if not abs(rho) < 1.0:
        raise DomainError(f"AR(1) correlation must satisfy |rho| < 1, got {rho!r}")
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def null_params(p: int, rho: float) -> Mu0Sigma0:
    """Zero mean with AR(1) covariance: the base generating parameters."""
    return Mu0Sigma0(np.zeros(p), ar1_covariance(p, rho))


def perturb_params(base: Mu0Sigma0, s: NodeSet | None, delta_mu: float, xi: float) -> Mu0Sigma0:
    """Shift means by delta_mu and rescale standard deviations by sqrt(xi) on s.

    Off s nothing changes, and correlations between unaltered node pairs
    are preserved for any xi.  s = None leaves the parameters untouched.
    """
    delta_mu = float(delta_mu)
    xi = float(xi)
    if not (xi > 0.0) or not np.isfinite(xi):
        raise DomainError(f"variance rescale must be finite and > 0, got {xi!r}")
    if not np.isfinite(delta_mu):
        raise DomainError(f"mean shift must be finite, got {delta_mu!r}")
    if s is None:
        return Mu0Sigma0(base.mu0, base.sigma0)
    if s.p != base.p:
        raise DomainError(f"node set is over p={s.p} nodes, parameters have p={base.p}")
    idx = [j - 1 for j in s.members]
    mu = base.mu0.copy()
    mu[idx] += delta_mu
    d = np.ones(base.p)
    d[idx] = np.sqrt(xi)
    sigma = d[:, None] * base.sigma0 * d[None, :]
    return Mu0Sigma0(mu, sigma)


def format_cell_id(
    p: int,
    rho: float,
    n1: int,
    n2: int,
    delta_mu: float,
    xi: float,
    s_members: tuple[int, ...] | None,
    b: int,
    master_seed: int,
    alpha: float,
    l_values: tuple[int, ...],
) -> str:
    """Filesystem-safe cell identifier; also usable for invalid cells."""
    s_part = "-".join(str(j) for j in s_members) if s_members else "none"
    l_part = "-".join(str(l) for l in l_values) or "none"
    return (
        f"p{p}_rho{float(rho)!r}_n1-{n1}_n2-{n2}"
        f"_dmu{float(delta_mu)!r}_xi{float(xi)!r}_s{s_part}"
        f"_b{b}_seed{master_seed}_l{l_part}_a{float(alpha)!r}"
    )


@dataclass(frozen=True)
class ScenarioSpec:
    """One cell of the simulation grid."""

    n1: int
    n2: int
    p: int = 8
    rho: float = 0.4
    delta_mu: float = 0.0
    xi: float = 1.0
    s: NodeSet | None = None
    b: int = 2000
    master_seed: int = 0
    alpha: float = 0.05
    l_values: tuple[int, ...] = (1,)

    def __post_init__(self) -> None:
        for name in ("n1", "n2", "p", "b", "master_seed"):
            if not isinstance(getattr(self, name), int):
                raise DomainError(f"{name} must be an integer, got {getattr(self, name)!r}")
        if self.p < 1:
            raise DomainError(f"p must be >= 1, got {self.p}")
        if self.b < 1:
            raise DomainError(f"replicate count must be >= 1, got {self.b}")
        # margin that keeps the correction defined on the full graph and
        # every restriction of it
        if self.p + 2 > min(self.n1, self.n2):
            raise DomainError(
                f"need p + 2 <= min(n1, n2); got p={self.p}, n1={self.n1}, n2={self.n2}"
            )
        rho = float(self.rho)
        object.__setattr__(self, "rho", rho)
        if not abs(rho) < 1.0:
            raise DomainError(f"rho must satisfy |rho| < 1, got {rho!r}")
        alpha = float(self.alpha)
        object.__setattr__(self, "alpha", alpha)
        if not 0.0 < alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
        delta_mu = float(self.delta_mu)
        xi = float(self.xi)
        object.__setattr__(self, "delta_mu", delta_mu)
        object.__setattr__(self, "xi", xi)
        if not np.isfinite(delta_mu):
            raise DomainError(f"delta_mu must be finite, got {delta_mu!r}")
        if not (xi > 0.0) or not np.isfinite(xi):
            raise DomainError(f"xi must be finite and > 0, got {xi!r}")
        if self.s is not None:
            if not isinstance(self.s, NodeSet):
                raise DomainError(f"s must be a NodeSet or None, got {self.s!r}")
            if self.s.p != self.p:
                raise DomainError(f"s is over p={self.s.p} nodes, scenario has p={self.p}")
        elif delta_mu != 0.0 or xi != 1.0:
            raise DomainError(
                "an empty altered set requires delta_mu = 0 and xi = 1 "
                f"(got delta_mu={delta_mu!r}, xi={xi!r})"
            )
        l_values = tuple(int(l) for l in self.l_values)
        object.__setattr__(self, "l_values", l_values)
        if len(set(l_values)) != len(l_values) or list(l_values) != sorted(l_values):
            raise DomainError(f"l_values must be strictly increasing, got {l_values}")
        for l in l_values:
            if not 1 <= l <= self.p - 1:
                raise DomainError(f"subset sizes must lie in 1..p-1, got l={l} with p={self.p}")

    @property
    def cell_id(self) -> str:
        """Filesystem-safe identifier, unique per parameter combination."""
        return format_cell_id(
            self.p,
            self.rho,
            self.n1,
            self.n2,
            self.delta_mu,
            self.xi,
            self.s.members if self.s is not None else None,
            self.b,
            self.master_seed,
            self.alpha,
            self.l_values,
        )

    def to_dict(self) -> dict:
        return {
            "n1": self.n1,
            "n2": self.n2,
            "p": self.p,
            "rho": self.rho,
            "delta_mu": self.delta_mu,
            "xi": self.xi,
            "s": list(self.s.members) if self.s is not None else None,
            "b": self.b,
            "master_seed": self.master_seed,
            "alpha": self.alpha,
            "l_values": list(self.l_values),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ScenarioSpec":
        s = payload.get("s")
        return cls(
            n1=int(payload["n1"]),
            n2=int(payload["n2"]),
            p=int(payload["p"]),
            rho=float(payload["rho"]),
            delta_mu=float(payload["delta_mu"]),
            xi=float(payload["xi"]),
            s=NodeSet(tuple(int(j) for j in s), int(payload["p"])) if s else None,
            b=int(payload["b"]),
            master_seed=int(payload["master_seed"]),
            alpha=float(payload["alpha"]),
            l_values=tuple(int(l) for l in payload["l_values"]),
        )


@dataclass(frozen=True)
class ReplicateOutcome:
    """Test results from a single simulated dataset."""

    replicate_index: int
    global_result: GlobalTestResult
    increments: dict[int, tuple[SubsetIncrement, ...]]


def simulate_replicate(spec: ScenarioSpec, r: int) -> ReplicateOutcome:
    """Draw replicate r of a scenario and compute all its statistics.

    Group draws use substreams 1 and 2 of the replicate's derived stream,
    so the outcome is a pure function of (spec, r).
    """
    if not isinstance(r, int) or r < 0:
        raise DomainError(f"replicate index must be a non-negative integer, got {r!r}")
    base = null_params(spec.p, spec.rho)
    perturbed = perturb_params(base, spec.s, spec.delta_mu, spec.xi)
    chol1 = cholesky(base.sigma0)
    chol2 = cholesky(perturbed.sigma0)
    stream = derive_stream(spec.master_seed, r)
    x1 = mvn_sample(stream.substream(1), base.mu0, chol1, spec.n1)
    x2 = mvn_sample(stream.substream(2), perturbed.mu0, chol2, spec.n2)
    labels = tuple(str(j) for j in range(1, spec.p + 1))
    data = TwoSampleData(x1, x2, labels)
    result = adjusted_t(data)
    increments = {l: tuple(increment_scan(data, l)) for l in spec.l_values}
    return ReplicateOutcome(replicate_index=r, global_result=result, increments=increments)


def subset_label(m: NodeSet) -> str:
    """Stable textual label for a subset: members joined with '+'."""
    return "+".join(str(j) for j in m.members)


@dataclass
class FamilySummary:
    """Aggregates for one subset size within a scenario."""

    l: int
    dof: int
    labels: tuple[str, ...]
    rejection_w: tuple[float, ...]
    rejection_t: tuple[float, ...]
    mean_delta_t: tuple[float, ...]
    ks_t: tuple[float, ...]
    ks_w: tuple[float, ...]
    ecdf_samples: np.ndarray  # (stored replicates, subsets) of delta_t
    fwer: dict[str, dict[str, float | None]]
    power_any: dict[str, dict[str, float | None]]
    power_all: dict[str, dict[str, float | None]]

    def to_dict(self) -> dict:
        return {
            "l": self.l,
            "dof": self.dof,
            "labels": list(self.labels),
            "rejection_w": list(self.rejection_w),
            "rejection_t": list(self.rejection_t),
            "mean_delta_t": list(self.mean_delta_t),
            "ks_t": list(self.ks_t),
            "ks_w": list(self.ks_w),
            "ecdf_samples": [list(col) for col in self.ecdf_samples.T],
            "fwer": self.fwer,
            "power_any": self.power_any,
            "power_all": self.power_all,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FamilySummary":
        samples = np.array(payload["ecdf_samples"], dtype=float).T
        if samples.size == 0:
            samples = samples.reshape(0, len(payload["labels"]))
        return cls(
            l=int(payload["l"]),
            dof=int(payload["dof"]),
            labels=tuple(payload["labels"]),
            rejection_w=tuple(payload["rejection_w"]),
            rejection_t=tuple(payload["rejection_t"]),
            mean_delta_t=tuple(payload["mean_delta_t"]),
            ks_t=tuple(payload["ks_t"]),
            ks_w=tuple(payload["ks_w"]),
            ecdf_samples=samples,
            fwer=payload["fwer"],
            power_any=payload["power_any"],
            power_all=payload["power_all"],
        )


@dataclass
class MonteCarloSummary:
    """Everything aggregated from one scenario's replicates."""

    spec: ScenarioSpec
    b_effective: int
    failures: tuple[tuple[int, str], ...]
    global_rejection_w: float
    global_rejection_t: float
    families: dict[int, FamilySummary] = field(default_factory=dict)
    lambda_hat: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "b_effective": self.b_effective,
            "failures": [list(item) for item in self.failures],
            "global_rejection_w": self.global_rejection_w,
            "global_rejection_t": self.global_rejection_t,
            "families": {str(l): fam.to_dict() for l, fam in self.families.items()},
            "lambda_hat": list(self.lambda_hat) if self.lambda_hat is not None else None,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MonteCarloSummary":
        lam = payload.get("lambda_hat")
        return cls(
            spec=ScenarioSpec.from_dict(payload["spec"]),
            b_effective=int(payload["b_effective"]),
            failures=tuple((int(r), str(code)) for r, code in payload["failures"]),
            global_rejection_w=float(payload["global_rejection_w"]),
            global_rejection_t=float(payload["global_rejection_t"]),
            families={
                int(l): FamilySummary.from_dict(fam)
                for l, fam in payload["families"].items()
            },
            lambda_hat=tuple(float(v) for v in lam) if lam is not None else None,
        )


def ks_statistic(sample, cdf) -> float:
    """Two-sided Kolmogorov-Smirnov distance of a sample from a CDF.

    sup over the sorted sample of max(|i/n - F(x_(i))|, |(i-1)/n - F(x_(i))|).
    """
    arr = np.sort(np.asarray(sample, dtype=float))
    n = arr.size
    if n == 0:
        raise DomainError("KS statistic needs a nonempty sample")
    f = np.array([cdf(x) for x in arr])
    upper = np.abs(np.arange(1, n + 1) / n - f)
    lower = np.abs(np.arange(0, n) / n - f)
    return float(max(upper.max(), lower.max()))


def estimate_noncentrality(mean_delta: float, p: int) -> float:
    """Moment estimate of the noncentrality of a singleton increment.

    The null mean of the limiting distribution is p + 1, so the excess
    mean estimates the shift; clamped at zero.
    """
    if not isinstance(p, int) or p < 2:
        raise DomainError(f"p must be an integer >= 2, got {p!r}")
    return max(0.0, float(mean_delta) - (p + 1))


def _altered_mask(subsets: list[NodeSet], s: NodeSet | None) -> np.ndarray:
    if s is None:
        return np.zeros(len(subsets), dtype=bool)
    altered = set(s.members)
    return np.array([bool(altered.intersection(m.members)) for m in subsets])


def _rate_block(
    adjusted: np.ndarray, mask: np.ndarray, alpha: float, mode: str
) -> float | None:
    # adjusted: (replicates, subsets); mask selects the subset columns whose
    # joint rejection behaviour we summarize.
    if not mask.any():
        return None
    hits = adjusted[:, mask] <= alpha
    joint = hits.all(axis=1) if mode == "all" else hits.any(axis=1)
    return float(joint.mean())


def run_scenario(spec: ScenarioSpec, threads: int | None = None) -> MonteCarloSummary:
    """Run all replicates of a scenario and aggregate them.

    Replicates may execute on a thread pool (size from the
    GGMTEST_THREADS environment variable unless given explicitly), but
    aggregation always walks them in replicate-index order, so the
    summary does not depend on the schedule.
    """
    workers = thread_count() if threads is None else int(threads)
    if workers < 1:
        raise DomainError(f"thread count must be >= 1, got {workers}")

    def one(r: int):
        try:
            return simulate_replicate(spec, r)
        except (NotPositiveDefinite, DegenerateCorrection) as exc:
            return (r, type(exc).__name__)

    if workers == 1:
        results = [one(r) for r in range(spec.b)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(spec.b)))

    outcomes = [res for res in results if isinstance(res, ReplicateOutcome)]
    failures = tuple(res for res in results if not isinstance(res, ReplicateOutcome))
    if not outcomes:
        raise DomainError(
            f"all {spec.b} replicates failed for cell {spec.cell_id}"
        )

    alpha = spec.alpha
    p_w_global = np.array([o.global_result.p_w for o in outcomes])
    p_t_global = np.array([o.global_result.p_t for o in outcomes])

    families: dict[int, FamilySummary] = {}
    for l in spec.l_values:
        subsets = enumerate_subsets(spec.p, l)
        labels = tuple(subset_label(m) for m in subsets)
        dof = dof_increment(l, spec.p)
        delta_w = np.array([[inc.delta_w for inc in o.increments[l]] for o in outcomes])
        delta_t = np.array([[inc.delta_t for inc in o.increments[l]] for o in outcomes])
        p_w = np.array([[inc.p_w for inc in o.increments[l]] for o in outcomes])
        p_t = np.array([[inc.p_t for inc in o.increments[l]] for o in outcomes])

        altered = _altered_mask(subsets, spec.s)
        null_mask = ~altered
        raw_by_stat = {"w": p_w, "t": p_t}
        fwer: dict[str, dict[str, float | None]] = {}
        power_any: dict[str, dict[str, float | None]] = {}
        power_all: dict[str, dict[str, float | None]] = {}
        for method in METHODS:
            adjust = _holm_array if method == "holm" else _bonferroni_array
            fwer[method] = {}
            power_any[method] = {}
            power_all[method] = {}
            for stat, raw in raw_by_stat.items():
                adjusted = np.vstack([adjust(row) for row in raw])
                fwer[method][stat] = _rate_block(adjusted, null_mask, alpha, "any")
                power_any[method][stat] = _rate_block(adjusted, altered, alpha, "any")
                power_all[method][stat] = _rate_block(adjusted, altered, alpha, "all")

        cdf_t = lambda x, _dof=dof: chi2_cdf(x, _dof)  # noqa: E731
        families[l] = FamilySummary(
            l=l,
            dof=dof,
            labels=labels,
            rejection_w=tuple((p_w <= alpha).mean(axis=0).tolist()),
            rejection_t=tuple((p_t <= alpha).mean(axis=0).tolist()),
            mean_delta_t=tuple(delta_t.mean(axis=0).tolist()),
            ks_t=tuple(ks_statistic(delta_t[:, j], cdf_t) for j in range(len(subsets))),
            ks_w=tuple(ks_statistic(delta_w[:, j], cdf_t) for j in range(len(subsets))),
            ecdf_samples=delta_t[:ECDF_SAMPLE_CAP].copy(),
            fwer=fwer,
            power_any=power_any,
            power_all=power_all,
        )

    lambda_hat = None
    if 1 in families:
        singles = families[1]
        lambda_hat = tuple(
            estimate_noncentrality(mean, spec.p) for mean in singles.mean_delta_t
        )

    return MonteCarloSummary(
        spec=spec,
        b_effective=len(outcomes),
        failures=failures,
        global_rejection_w=float((p_w_global <= alpha).mean()),
        global_rejection_t=float((p_t_global <= alpha).mean()),
        families=families,
        lambda_hat=lambda_hat,
    )


@dataclass(frozen=True)
class NodeDiagnostic:
    """Noncentral calibration record for one node."""

    node: int
    label: str
    altered: bool
    lambda_hat: float
    ks_noncentral: float


def conjecture_check(
    spec: ScenarioSpec, summary: MonteCarloSummary | None = None
) -> list[NodeDiagnostic]:
    """Compare each node's singleton increments to a noncentral chi-square.

    For node j the reference is the noncentral chi-square with p + 1
    degrees of freedom and the moment-estimated noncentrality; at
    lambda_hat = 0 this degenerates to the central check.  Pass an
    existing summary to avoid re-running the scenario.
    """
    if 1 not in spec.l_values:
        raise DomainError("noncentral diagnostics need singleton scans (l = 1)")
    if summary is None:
        summary = run_scenario(spec)
    if summary.spec != spec:
        raise DomainError("summary was computed for a different scenario")
    singles = summary.families[1]
    altered = set(spec.s.members) if spec.s is not None else set()
    dof = spec.p + 1
    records = []
    for j in range(spec.p):
        lam = summary.lambda_hat[j]
        sample = singles.ecdf_samples[:, j]
        ks = ks_statistic(sample, lambda x: noncentral_chi2_cdf(x, dof, lam))
        records.append(
            NodeDiagnostic(
                node=j + 1,
                label=singles.labels[j],
                altered=(j + 1) in altered,
                lambda_hat=lam,
                ks_noncentral=ks,
            )
        )
    return records
