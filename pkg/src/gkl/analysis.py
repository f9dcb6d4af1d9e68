"""Diagnostics, inequality checks and rate fitting for greedy runs.

Every product over a window ``i = n+1, ..., 2n`` is evaluated as a sum of
logarithms, since 300-term products of power values underflow.  Sequences are
indexed like the trace rows, starting at ``n = 0``.

An inequality ``lhs <= rhs`` passes when
``log(lhs) <= log(rhs) + tol * max(1, |log(rhs)|)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .greedy import SelectionRule
from .trace import RunTrace, read_trace_csv, write_trace_csv

__all__ = [
    "RunTrace",
    "CheckResult",
    "InconsistentNormError",
    "RateReport",
    "SlopeFit",
    "geometric_mean_window",
    "geometric_mean_series",
    "check_abstract_product_inequality",
    "check_residual_product_lemma",
    "check_improved_power_estimate",
    "check_theorem_final",
    "run_checks",
    "bound_algebraic",
    "bound_exponential",
    "greedy_error_bound",
    "fit_loglog_slope",
    "l1_error_segment",
    "h_alpha",
    "lower_bound_curves",
    "rate_report",
    "write_checks_csv",
    "read_trace_csv",
    "write_trace_csv",
]

NORM_SLACK = 1e-9


class InconsistentNormError(ValueError):
    """The supplied ``||f||^2`` is smaller than the accumulated Newton sum."""


@dataclass
class CheckResult:
    """Outcome of one inequality check, in log space.

    For checks aggregated over many rows, ``n`` is the row with the smallest
    margin and ``n_range`` the rows examined.
    """

    name: str
    n: int
    lhs_log: float
    rhs_log: float
    tol: float
    n_range: tuple[int, int] | None = None

    @property
    def margin(self) -> float:
        if self.lhs_log == -math.inf:
            return math.inf
        return self.rhs_log - self.lhs_log

    @property
    def violation(self) -> float:
        return max(0.0, -self.margin)

    @property
    def passed(self) -> bool:
        if self.lhs_log == -math.inf:
            return True
        if math.isnan(self.lhs_log) or math.isnan(self.rhs_log):
            return False
        return self.lhs_log <= self.rhs_log + self.tol * max(1.0, abs(self.rhs_log))

    def row(self) -> list[str]:
        return [self.name, str(self.n), _fmt(self.lhs_log), _fmt(self.rhs_log),
                _fmt(self.margin), "true" if self.passed else "false"]


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


def _log(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(x)


def geometric_mean_window(seq, n: int) -> float:
    """``(prod_{i=n+1}^{2n} seq[i])^(1/n)`` for a sequence indexed from 0."""
    seq = np.asarray(seq, dtype=float)
    if n < 1:
        raise ValueError("window size n must be >= 1")
    if seq.size < 2 * n + 1:
        raise ValueError(f"need at least {2 * n + 1} entries, got {seq.size}")
    window = seq[n + 1 : 2 * n + 1]
    if np.any(window < 0) or np.any(np.isnan(window)):
        raise ValueError("entries must be nonnegative numbers")
    if np.any(window == 0):
        return 0.0
    return float(np.exp(np.mean(np.log(window))))


def geometric_mean_series(seq) -> tuple[np.ndarray, np.ndarray]:
    """All admissible windows: returns ``(ns, values)`` for ``n = 1, 2, ...``."""
    seq = np.asarray(seq, dtype=float)
    finite = np.flatnonzero(~np.isfinite(seq))
    usable = seq.size if finite.size == 0 else int(finite[0])
    ns = np.arange(1, (usable - 1) // 2 + 1)
    return ns, np.array([geometric_mean_window(seq[:usable], int(n)) for n in ns])


def check_abstract_product_inequality(nu, sigma, d_bound, N: int, K: int, m: int,
                                      tol: float = 1e-12) -> CheckResult:
    """``prod_{i=1}^K nu_{N+i}^2 <= (K/m)^m (K/(K-m))^(K-m) sigma_{N+1}^(2m) d_m^(2K-2m)``.

    ``d_bound[m]`` is an upper bound on the m-width; the sigma sequence of any
    run on the same candidate set is one.
    """
    if N < 0 or K < 1 or not 1 <= m < K:
        raise ValueError("need N >= 0, K >= 1 and 1 <= m < K")
    nu = np.asarray(nu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    d_bound = np.asarray(d_bound, dtype=float)
    if nu.size < N + K + 1 or sigma.size < N + 2 or d_bound.size < m + 1:
        raise ValueError("sequences too short for the requested (N, K, m)")
    window = nu[N + 1 : N + K + 1]
    if np.any(np.isnan(window)):
        raise ValueError("nu is undefined inside the window")
    lhs = 2.0 * float(np.sum(_log(window)))
    rhs = (m * math.log(K / m) + (K - m) * math.log(K / (K - m))
           + 2 * m * float(_log(sigma[N + 1])) + (2 * K - 2 * m) * float(_log(d_bound[m])))
    return CheckResult("abstract_product", N, lhs, rhs, tol)


def _native_residual_sq(trace: RunTrace, f_norm_sq: float) -> np.ndarray:
    pnn = trace.partial_native_norm
    if f_norm_sq < np.nanmax(pnn) - NORM_SLACK:
        raise InconsistentNormError(
            f"||f||^2 = {f_norm_sq:.6g} is below the partial sum {np.nanmax(pnn):.6g}"
        )
    # ||f||^2 - pnn[i] cancels badly once the interpolant has captured most of f;
    # the same quantity as the tail sum of later c_j^2 plus the final remainder does not
    c2 = np.where(np.isnan(trace.coefficient), 0.0, trace.coefficient) ** 2
    tail = np.cumsum(c2[::-1])[::-1]
    return max(f_norm_sq - float(pnn[-1]), 0.0) + tail


def _require_rows(trace: RunTrace, n: int):
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(trace) < 2 * n + 1:
        raise ValueError(f"trace has {len(trace)} rows, need {2 * n + 1}")
    if np.any(np.isnan(trace.nu[n + 1 : 2 * n + 1])):
        raise ValueError(f"no selected point in rows {n + 1}..{2 * n}")


def _exponents(rule) -> tuple[float, float]:
    """``(min(1, beta), 1 / max(1, beta))`` with ``1/inf = 0``."""
    beta = rule.effective_beta if isinstance(rule, SelectionRule) else float(rule)
    if math.isnan(beta) or beta < 0:
        raise ValueError("the bound needs a beta-greedy rule")
    return min(1.0, beta), (1.0 if beta <= 1 else 1.0 / beta)


def check_residual_product_lemma(trace: RunTrace, f_norm_sq: float, n: int,
                                 tol: float = 1e-10) -> CheckResult:
    """Geometric mean of ``|r_i(x_{i+1})|`` against ``n^{-1/2} ||r_{n+1}|| * GM(P_i(x_{i+1}))``.

    Holds for every point sequence, greedy or not.
    """
    _require_rows(trace, n)
    rn = _native_residual_sq(trace, f_norm_sq)[n + 1]
    w = slice(n + 1, 2 * n + 1)
    lhs = float(np.mean(_log(trace.residual_at_selected[w])))
    rhs = -0.5 * math.log(n) + 0.5 * float(_log(rn)) + float(np.mean(_log(trace.nu[w])))
    return CheckResult("residual_product_lemma", n, lhs, rhs, tol)


def check_improved_power_estimate(trace: RunTrace, f_norm_sq: float, rule,
                                  tol: float = 1e-10) -> CheckResult:
    """``||r_i||_inf <= ||r_i||_H * P_i(x_{i+1})^e`` on every row with a proposal.

    ``e = 1`` for beta <= 1 and ``1/beta`` above.
    """
    _, e = _exponents(rule)
    rn = _native_residual_sq(trace, f_norm_sq)
    rows = np.flatnonzero(~np.isnan(trace.nu) & ~np.isnan(trace.max_residual))
    if rows.size == 0:
        raise ValueError("trace has no usable rows")
    lhs = _log(trace.max_residual[rows])
    rhs = 0.5 * _log(rn[rows]) + e * _log(trace.nu[rows])
    with np.errstate(invalid="ignore"):
        margin = np.where(lhs == -np.inf, np.inf, rhs - lhs)
    j = int(np.argmin(margin))
    return CheckResult("improved_power_estimate", int(rows[j]), float(lhs[j]), float(rhs[j]),
                       tol, (int(rows[0]), int(rows[-1])))


def check_theorem_final(trace: RunTrace, f_norm_sq: float, rule, n: int,
                        tol: float = 1e-10) -> CheckResult:
    """``GM(||r_i||_inf) <= n^{-min(1,beta)/2} ||r_{n+1}||_H GM(P_i(x_{i+1})^{1/max(1,beta)})``."""
    a, e = _exponents(rule)
    _require_rows(trace, n)
    rn = _native_residual_sq(trace, f_norm_sq)[n + 1]
    w = slice(n + 1, 2 * n + 1)
    lhs = float(np.mean(_log(trace.max_residual[w])))
    rhs = -0.5 * a * math.log(n) + 0.5 * float(_log(rn)) + e * float(np.mean(_log(trace.nu[w])))
    return CheckResult("theorem_final", n, lhs, rhs, tol)


def run_checks(trace: RunTrace, f_norm_sq: float | None = None, rule=None,
               n_max: int | None = None, abstract_samples: int = 100, seed: int = 0,
               tol: float = 1e-10) -> list[CheckResult]:
    """Every applicable check on one trace.

    Norm-dependent checks need ``f_norm_sq``; the beta-specific ones need a
    beta-greedy ``rule``.  The abstract inequality uses the run's own sigma as
    the width bound and ``abstract_samples`` random ``(N, K, m)`` triples.
    """
    results = []
    nu, sigma = trace.nu, trace.sigma
    defined = np.flatnonzero(np.isnan(nu))
    usable = len(trace) if defined.size == 0 else int(defined[0])
    rng = np.random.default_rng(seed)
    if usable >= 3:
        for _ in range(abstract_samples):
            K = int(rng.integers(2, usable))
            N = int(rng.integers(0, usable - K))
            m = int(rng.integers(1, K))
            if m < len(sigma) and N + 1 < len(sigma):
                results.append(check_abstract_product_inequality(nu, sigma, sigma, N, K, m, tol))
    if f_norm_sq is None:
        return results
    top = (usable - 1) // 2
    if n_max is not None:
        top = min(top, n_max)
    beta_rule = rule is not None and not math.isnan(
        rule.effective_beta if isinstance(rule, SelectionRule) else float(rule))
    for n in range(1, top + 1):
        results.append(check_residual_product_lemma(trace, f_norm_sq, n, tol))
        if beta_rule:
            results.append(check_theorem_final(trace, f_norm_sq, rule, n, tol))
    if beta_rule:
        results.append(check_improved_power_estimate(trace, f_norm_sq, rule, tol))
    return results


def write_checks_csv(results: Sequence[CheckResult], path=None, label_column: str | None = None,
                     labels: Sequence[str] | None = None) -> str:
    """CSV with columns ``check_name, n, lhs_log, rhs_log, margin, pass``.

    With ``label_column`` a leading column identifies the run of each row.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["check_name", "n", "lhs_log", "rhs_log", "margin", "pass"]
    writer.writerow(([label_column] if label_column else []) + header)
    for i, res in enumerate(results):
        writer.writerow(([labels[i]] if label_column else []) + res.row())
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def bound_algebraic(n: int, alpha: float, C0: float) -> float:
    """Bound on the window geometric mean of nu when ``d_n <= C0 n^-alpha``."""
    if n < 3:
        raise ValueError("the algebraic bound holds for n >= 3")
    return (2.0 ** (alpha + 0.5) * max(1.0, C0) * math.e**alpha
            * math.log(n) ** alpha * n ** (-alpha))


def bound_exponential(n: int, alpha: float, c0: float, C0: float) -> float:
    """Bound on the window geometric mean of nu when ``d_n <= C0 exp(-c0 n^alpha)``."""
    if n < 2:
        raise ValueError("the exponential bound holds for n >= 2")
    c1 = 2.0 ** (-(2.0 + alpha)) * c0
    return math.sqrt(2.0 * max(1.0, C0)) * math.exp(-c1 * n**alpha)


def greedy_error_bound(n: int, beta: float, alpha: float, C0: float, c0: float | None = None,
                       residual_norm: float = 1.0) -> float:
    """Upper bound on ``min_{n<i<=2n} ||r_i||_inf`` for a beta-greedy run.

    Algebraic width decay ``C0 n^-alpha`` when ``c0`` is None, otherwise
    exponential decay ``C0 exp(-c0 n^alpha)``.  ``beta = inf`` gives f/P-greedy.
    """
    a = min(1.0, beta)
    inv = 1.0 / max(1.0, beta)
    if c0 is None:
        if n < 3:
            raise ValueError("the algebraic bound holds for n >= 3")
        C = (2.0 ** (alpha + 0.5) * max(1.0, C0) * math.e**alpha) ** inv
        return C * n ** (-a / 2) * (math.log(n) / n) ** (alpha * inv) * residual_norm
    if n < 2:
        raise ValueError("the exponential bound holds for n >= 2")
    C = math.sqrt(2.0 * max(1.0, C0)) ** inv
    c1 = 2.0 ** (-(2.0 + alpha)) * c0 * inv
    return C * n ** (-a / 2) * math.exp(-c1 * n**alpha) * residual_norm


class SlopeFit(NamedTuple):
    slope: float
    intercept: float
    n_used: int
    n_skipped: int


def fit_loglog_slope(ns, values, window: tuple[float, float] | None = None) -> SlopeFit:
    """Least-squares line through ``(log n, log value)`` for ``lo <= n <= hi``.

    Nonpositive or non-finite values are skipped and counted.
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.shape != values.shape:
        raise ValueError("ns and values must have the same length")
    if window is not None:
        lo, hi = window
        keep = (ns >= lo) & (ns <= hi)
        ns, values = ns[keep], values[keep]
    ok = (values > 0) & np.isfinite(values) & (ns > 0)
    skipped = int(ns.size - ok.sum())
    if ok.sum() < 3:
        raise ValueError("need at least 3 positive values in the window")
    slope, intercept = np.polyfit(np.log(ns[ok]), np.log(values[ok]), 1)
    return SlopeFit(float(slope), float(intercept), int(ok.sum()), skipped)


def l1_error_segment(z1: float, z2: float, alpha: float) -> float:
    """L1 error of the chord of ``x^alpha`` over ``[z1, z2]``."""
    if not 0 <= z1 < z2:
        raise ValueError("need 0 <= z1 < z2")
    h = z2 - z1
    return ((z2 ** (1 + alpha) - z1 ** (1 + alpha)) / (1 + alpha)
            - 0.5 * (z2**alpha - z1**alpha) * h - z1**alpha * h)


def h_alpha(k: float, alpha: float) -> float:
    """Scaled chord error of ``x^alpha`` as a function of the ratio ``k = z2/z1 > 1``."""
    if not k > 1:
        raise ValueError("need k > 1")
    a1 = 1.0 / (1.0 + alpha)
    km = k ** (-alpha)
    # (1 - k^-alpha) / (k - 1) loses all digits as k -> 1 unless expm1/log1p are used
    t = math.log1p(k - 1.0)
    ratio = -math.expm1(-alpha * t) / (k - 1.0)
    return a1 + a1 * ratio - (1.0 + km) / 2.0


def lower_bound_curves(n, alpha: float, variant: str = "uniform"):
    """Reference decay ``n^-alpha`` (uniform points) or ``n^-2`` (any points), constant 1."""
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr < 1):
        raise ValueError("n must be >= 1")
    if variant == "uniform":
        out = n_arr ** (-alpha)
    elif variant == "optimal":
        out = n_arr ** -2.0
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return float(out) if out.ndim == 0 else out


@dataclass
class RateReport:
    nu_window: tuple[np.ndarray, np.ndarray]
    sigma_window: tuple[np.ndarray, np.ndarray]
    fit: SlopeFit | None
    fit_column: str
    fit_window: tuple[float, float] | None
    checks: list[CheckResult] = field(default_factory=list)
    bound_curve: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def rate_report(trace: RunTrace, column: str = "max_residual",
                window: tuple[float, float] | None = None, f_norm_sq: float | None = None,
                rule=None, bound: dict | None = None) -> RateReport:
    """Collect window means, a slope fit of ``column`` and the applicable checks.

    ``bound`` holds user-supplied width parameters, e.g.
    ``{"alpha": 1.0, "C0": 1.0}`` or ``{"alpha": 1/3, "c0": 1.0, "C0": 1.0}``;
    the matching curve is sampled at the window-mean indices.
    """
    nu_w = geometric_mean_series(trace.nu)
    sigma_w = geometric_mean_series(trace.sigma)
    values = trace.column(column)
    try:
        fit = fit_loglog_slope(trace.n[1:], values[1:], window)
    except ValueError:
        fit = None
    checks = run_checks(trace, f_norm_sq, rule)
    curve = None
    if bound is not None:
        ns = nu_w[0]
        if "c0" in bound:
            ns = ns[ns >= 2]
            vals = [bound_exponential(int(n), bound["alpha"], bound["c0"], bound["C0"]) for n in ns]
        else:
            ns = ns[ns >= 3]
            vals = [bound_algebraic(int(n), bound["alpha"], bound["C0"]) for n in ns]
        curve = (ns, np.array(vals))
    return RateReport(nu_w, sigma_w, fit, column, window, checks, curve)
