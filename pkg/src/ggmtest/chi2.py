"""Chi-square distribution kernels.

Everything here reduces to the regularized incomplete gamma function,
computed by its power series for small arguments and by a continued
fraction (modified Lentz) otherwise.  Survival probabilities are formed
on the upper-tail side directly, so small p-values keep full relative
accuracy instead of dying in a ``1 - cdf`` cancellation.
"""

from __future__ import annotations

import math

from .errors import DomainError

# Convergence controls for the incomplete gamma evaluations.  The series
# and continued fraction both gain at least a bit per iteration in the
# regimes where they are used, so these caps are never hit in practice.
_REL_EPS = 1e-16
_MAX_ITER = 600
_TINY = 1e-300


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    if not (x > 0.0) or math.isinf(x):
        raise DomainError(f"ln_gamma requires finite x > 0, got {x!r}")
    return math.lgamma(x)


def _gamma_series(a: float, x: float) -> float:
    # Lower regularized gamma P(a, x) by power series; fast for x < a + 1.
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _REL_EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cont_fraction(a: float, x: float) -> float:
    # Upper regularized gamma Q(a, x) by continued fraction, evaluated
    # with the modified Lentz algorithm; fast for x >= a + 1.
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b if b != 0.0 else 1.0 / _TINY
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _REL_EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def reg_gamma_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0."""
    if not (a > 0.0) or math.isinf(a):
        raise DomainError(f"reg_gamma_lower requires finite a > 0, got {a!r}")
    if math.isnan(x) or x < 0.0:
        raise DomainError(f"reg_gamma_lower requires x >= 0, got {x!r}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        p = _gamma_series(a, x)
    else:
        p = 1.0 - _gamma_cont_fraction(a, x)
    return min(max(p, 0.0), 1.0)


def reg_gamma_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if not (a > 0.0) or math.isinf(a):
        raise DomainError(f"reg_gamma_upper requires finite a > 0, got {a!r}")
    if math.isnan(x) or x < 0.0:
        raise DomainError(f"reg_gamma_upper requires x >= 0, got {x!r}")
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        q = 1.0 - _gamma_series(a, x)
    else:
        q = _gamma_cont_fraction(a, x)
    return min(max(q, 0.0), 1.0)


def _check_dof(dof: float) -> float:
    dof = float(dof)
    if not (dof > 0.0) or math.isinf(dof):
        raise DomainError(f"degrees of freedom must be finite and > 0, got {dof!r}")
    return dof


def chi2_sf(x: float, dof: float) -> float:
    """Chi-square survival P(X > x) with dof degrees of freedom.

    Negative x is allowed and maps to 1.0; test statistics clipped at
    zero by floating point noise must not raise here.
    """
    dof = _check_dof(dof)
    x = float(x)
    if math.isnan(x):
        raise DomainError("chi2_sf got NaN")
    if x <= 0.0:
        return 1.0
    return reg_gamma_upper(0.5 * dof, 0.5 * x)


def chi2_cdf(x: float, dof: float) -> float:
    """Chi-square lower tail P(X <= x)."""
    dof = _check_dof(dof)
    x = float(x)
    if math.isnan(x):
        raise DomainError("chi2_cdf got NaN")
    if x <= 0.0:
        return 0.0
    return reg_gamma_lower(0.5 * dof, 0.5 * x)


def chi2_pdf(x: float, dof: float) -> float:
    """Chi-square density; zero for x < 0."""
    dof = _check_dof(dof)
    x = float(x)
    if math.isnan(x):
        raise DomainError("chi2_pdf got NaN")
    if x < 0.0:
        return 0.0
    half = 0.5 * dof
    if x == 0.0:
        if dof == 2.0:
            return 0.5
        return math.inf if dof < 2.0 else 0.0
    log_pdf = (half - 1.0) * math.log(x) - 0.5 * x - half * math.log(2.0) - math.lgamma(half)
    return math.exp(log_pdf)


def chi2_quantile(prob: float, dof: float) -> float:
    """Inverse of chi2_cdf on (0, 1), by bracketing plus Newton polish."""
    dof = _check_dof(dof)
    prob = float(prob)
    if not (0.0 < prob < 1.0):
        raise DomainError(f"quantile probability must lie in (0, 1), got {prob!r}")

    lo = 0.0
    hi = dof + 10.0 * math.sqrt(2.0 * dof) + 10.0
    for _ in range(200):
        if chi2_cdf(hi, dof) >= prob:
            break
        lo = hi
        hi *= 2.0
    else:  # pragma: no cover - unreachable for prob < 1
        raise ArithmeticError("failed to bracket chi-square quantile")

    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, dof) < prob:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, hi):
            break

    x = 0.5 * (lo + hi)
    for _ in range(4):
        f = chi2_cdf(x, dof) - prob
        df = chi2_pdf(x, dof)
        if df <= 0.0 or not math.isfinite(df):
            break
        step = f / df
        x_new = x - step
        if not (lo <= x_new <= hi):
            break
        x = x_new
        if abs(step) <= 1e-15 * max(1.0, x):
            break
    return x


def _poisson_weight_log(j: int, half_lam: float) -> float:
    return -half_lam + j * math.log(half_lam) - math.lgamma(j + 1.0)


def _noncentral_mix(x: float, dof: float, noncentrality: float, tail: str) -> float:
    # Poisson(lambda/2) mixture of central chi-square terms, summed outward
    # from the modal weight so huge noncentralities stay stable.  Truncation
    # stops once the unaccounted weight falls below 1e-12.
    half_lam = 0.5 * noncentrality
    term = chi2_sf if tail == "upper" else chi2_cdf
    mode = int(half_lam)
    w_mode = math.exp(_poisson_weight_log(mode, half_lam))
    total = w_mode * term(x, dof + 2.0 * mode)
    accounted = w_mode

    w = w_mode
    for j in range(mode - 1, -1, -1):
        w *= (j + 1.0) / half_lam
        total += w * term(x, dof + 2.0 * j)
        accounted += w

    w = w_mode
    j = mode
    while accounted < 1.0 - 1e-12:
        j += 1
        w *= half_lam / j
        total += w * term(x, dof + 2.0 * j)
        accounted += w
        if j > mode + 100_000:  # pragma: no cover - truncation always triggers first
            raise ArithmeticError("noncentral chi-square mixture failed to converge")
    return min(max(total, 0.0), 1.0)


def noncentral_chi2_sf(x: float, dof: float, noncentrality: float) -> float:
    """Noncentral chi-square survival P(X > x)."""
    dof = _check_dof(dof)
    noncentrality = float(noncentrality)
    if math.isnan(noncentrality) or noncentrality < 0.0 or math.isinf(noncentrality):
        raise DomainError(f"noncentrality must be finite and >= 0, got {noncentrality!r}")
    x = float(x)
    if math.isnan(x):
        raise DomainError("noncentral_chi2_sf got NaN")
    if x <= 0.0:
        return 1.0
    if noncentrality == 0.0:
        return chi2_sf(x, dof)
    return _noncentral_mix(x, dof, noncentrality, "upper")


def noncentral_chi2_pdf(x: float, dof: float, noncentrality: float) -> float:
    """Noncentral chi-square density via the same Poisson mixture."""
    dof = _check_dof(dof)
    noncentrality = float(noncentrality)
    if math.isnan(noncentrality) or noncentrality < 0.0 or math.isinf(noncentrality):
        raise DomainError(f"noncentrality must be finite and >= 0, got {noncentrality!r}")
    x = float(x)
    if math.isnan(x):
        raise DomainError("noncentral_chi2_pdf got NaN")
    if x < 0.0:
        return 0.0
    if noncentrality == 0.0:
        return chi2_pdf(x, dof)
    half_lam = 0.5 * noncentrality
    mode = int(half_lam)
    w_mode = math.exp(_poisson_weight_log(mode, half_lam))
    total = w_mode * chi2_pdf(x, dof + 2.0 * mode)
    accounted = w_mode
    w = w_mode
    for j in range(mode - 1, -1, -1):
        w *= (j + 1.0) / half_lam
        total += w * chi2_pdf(x, dof + 2.0 * j)
        accounted += w
    w = w_mode
    j = mode
    while accounted < 1.0 - 1e-12:
        j += 1
        w *= half_lam / j
        total += w * chi2_pdf(x, dof + 2.0 * j)
        accounted += w
        if j > mode + 100_000:  # pragma: no cover - truncation always triggers first
            raise ArithmeticError("noncentral chi-square mixture failed to converge")
    return total


def noncentral_chi2_cdf(x: float, dof: float, noncentrality: float) -> float:
    """Noncentral chi-square lower tail P(X <= x)."""
    dof = _check_dof(dof)
    noncentrality = float(noncentrality)
    if math.isnan(noncentrality) or noncentrality < 0.0 or math.isinf(noncentrality):
        raise DomainError(f"noncentrality must be finite and >= 0, got {noncentrality!r}")
    x = float(x)
    if math.isnan(x):
        raise DomainError("noncentral_chi2_cdf got NaN")
    if x <= 0.0:
        return 0.0
    if noncentrality == 0.0:
        return chi2_cdf(x, dof)
    return _noncentral_mix(x, dof, noncentrality, "lower")
