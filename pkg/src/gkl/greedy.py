"""Greedy kernel interpolation with the beta-greedy family of selection rules.

The interpolant is kept in the Newton basis, i.e. the Gram-Schmidt
orthonormalization of the kernel translates at the selected points.  Adding a
point costs one kernel column plus one matrix-vector product over the
candidates, and the squared power function and the residual are updated in
place.  :func:`power_oracle` and :func:`interpolant_oracle` recompute the same
quantities from a dense Cholesky factorization and are used to check the
incremental path.

Both routes compute in ``np.longdouble`` by default.  Once points with power
values near 1e-5 are selected the Gaussian kernel matrix has a condition
number around 1e10, and double precision then only determines ``P^2`` to
about 1e-9.  On platforms where ``longdouble`` is plain double this silently
falls back to 64-bit arithmetic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .geometry import CandidateSet
from .kernels import KernelModel
from .trace import RunTrace

__all__ = [
    "SelectionRule",
    "StopCriteria",
    "GreedyState",
    "Exhausted",
    "NumericalBreakdown",
    "SingularKernelMatrix",
    "score_candidates",
    "select_next",
    "newton_update",
    "run_greedy",
    "power_oracle",
    "interpolant_oracle",
    "partial_native_norm",
]

log = logging.getLogger(__name__)

DEFAULT_POWER_FLOOR = 1e-13
WORK_DTYPE = np.longdouble


class Exhausted(Exception):
    """No eligible candidate is left."""


class NumericalBreakdown(ArithmeticError):
    """The Newton update would divide by a vanishing power function value."""


class SingularKernelMatrix(np.linalg.LinAlgError):
    """The dense kernel matrix could not be Cholesky factorized."""


@dataclass(frozen=True)
class SelectionRule:
    """How the next point is picked.

    ``variant`` is ``"beta"`` (score ``|r|^beta * P^(1 - beta)``),
    ``"f_over_p"`` (score ``|r| / P``, the beta = infinity member) or
    ``"random"`` (uniform among eligible candidates, seeded by ``seed``).
    Candidates with ``P^2 <= power_floor`` are never eligible.
    """

    variant: str = "beta"
    beta: float = 0.0
    seed: int = 0
    power_floor: float = DEFAULT_POWER_FLOOR

    def __post_init__(self):
        if self.variant not in ("beta", "f_over_p", "random"):
            raise ValueError(f"unknown selection variant {self.variant!r}")
        if self.variant == "beta" and not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError("beta must be a finite number >= 0; use FOverP for infinity")
        if self.power_floor < 0:
            raise ValueError("power_floor must be >= 0")

    @classmethod
    def Beta(cls, beta: float, power_floor: float = DEFAULT_POWER_FLOOR) -> "SelectionRule":
        return cls("beta", float(beta), power_floor=power_floor)

    @classmethod
    def FOverP(cls, power_floor: float = DEFAULT_POWER_FLOOR) -> "SelectionRule":
        return cls("f_over_p", power_floor=power_floor)

    @classmethod
    def Random(cls, seed: int, power_floor: float = DEFAULT_POWER_FLOOR) -> "SelectionRule":
        return cls("random", seed=int(seed), power_floor=power_floor)

    @property
    def effective_beta(self) -> float:
        """beta as a number (``inf`` for f/P); NaN for the random rule."""
        if self.variant == "beta":
            return self.beta
        if self.variant == "f_over_p":
            return math.inf
        return math.nan

    @property
    def uses_target(self) -> bool:
        return self.variant == "f_over_p" or (self.variant == "beta" and self.beta > 0)

    @property
    def label(self) -> str:
        if self.variant == "beta":
            return f"beta={self.beta:g}"
        if self.variant == "f_over_p":
            return "beta=inf"
        return f"random(seed={self.seed})"


@dataclass(frozen=True)
class StopCriteria:
    max_points: int = 300
    power_tol: float = 1e-5
    residual_tol: float = 1e-14

    def __post_init__(self):
        if int(self.max_points) != self.max_points or self.max_points < 1:
            raise ValueError("max_points must be an integer >= 1")
        if self.power_tol < 0 or self.residual_tol < 0:
            raise ValueError("tolerances must be >= 0")


class GreedyState:
    """Incremental interpolation state over a fixed candidate array.

    Attributes
    ----------
    points : (N, d) array
    f_values : (N,) array or None
        Target values; ``None`` for target-free runs (power function only).
    selected : list of int
        Candidate indices in selection order.
    coefficients : list of float
        Newton coefficients ``c_j = r_{j-1}(x_j) / P_{j-1}(x_j)``.
    power_sq : (N,) array
        Current squared power function, clamped at 0.
    power_sq_raw : (N,) array
        The same before clamping, from the latest update only.
    residual : (N,) array
        Current residual ``f - s_n`` (zeros without a target).
    selectable : (N,) bool array
        Candidates the rule may pick; the others only enter the diagnostics.

    All arrays except ``points`` use the working precision ``dtype``.
    """

    def __init__(self, model: KernelModel, points, f_values=None, selectable=None,
                 capacity: int = 64, dtype=WORK_DTYPE):
        self.model = model
        self.dtype = np.dtype(dtype)
        self.points = np.asarray(points.points if isinstance(points, CandidateSet) else points,
                                 dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        self._xpoints = self.points.astype(self.dtype)
        N = self.points.shape[0]
        if f_values is None:
            self.f_values = None
            self.residual = np.zeros(N, dtype=self.dtype)
        else:
            self.f_values = np.array(f_values, dtype=self.dtype)
            if self.f_values.shape != (N,):
                raise ValueError("f_values must have one entry per candidate")
            self.residual = self.f_values.copy()
        self.selectable = (np.ones(N, dtype=bool) if selectable is None
                           else np.asarray(selectable, dtype=bool).copy())
        if self.selectable.shape != (N,):
            raise ValueError("selectable mask must have one entry per candidate")
        self.power_sq = np.asarray(model.diag(self._xpoints), dtype=self.dtype)
        self.power_sq_raw = self.power_sq.copy()
        if np.any(self.power_sq > 1.0 + 1e-12):
            log.warning("kernel %s is not normalized: max k(x,x) = %g > 1",
                        model.name, self.power_sq.max())
        self.is_selected = np.zeros(N, dtype=bool)
        self.selected: list[int] = []
        self.coefficients: list = []
        self._newton = np.zeros((N, max(1, capacity)), dtype=self.dtype)

    @property
    def n(self) -> int:
        return len(self.selected)

    @property
    def n_candidates(self) -> int:
        return self.points.shape[0]

    @property
    def newton_values(self) -> np.ndarray:
        """``(N, n)`` array with the Newton basis ``v_j`` evaluated at the candidates."""
        return self._newton[:, : self.n]

    @property
    def power(self) -> np.ndarray:
        return np.sqrt(self.power_sq)

    @property
    def selected_points(self) -> np.ndarray:
        return self.points[self.selected]

    def eligible(self, power_floor: float) -> np.ndarray:
        return self.selectable & ~self.is_selected & (self.power_sq > power_floor)


def score_candidates(state: GreedyState, rule: SelectionRule) -> np.ndarray:
    """Selection score at every candidate; ineligible ones get ``-inf``.

    The random rule has no score and gets 0 at eligible candidates.
    """
    ok = state.eligible(rule.power_floor)
    if not ok.any():
        raise Exhausted("no eligible candidate left")
    if rule.uses_target and state.f_values is None:
        raise ValueError(f"rule {rule.label} needs target values")
    scores = np.full(state.n_candidates, -np.inf)
    P = np.sqrt(state.power_sq[ok])
    r = np.abs(state.residual[ok])
    if rule.variant == "beta":
        b = rule.beta
        if b == 0:
            scores[ok] = P
        elif b == 1:
            scores[ok] = r
        else:
            scores[ok] = r**b * P ** (1.0 - b)
    elif rule.variant == "f_over_p":
        scores[ok] = r / P
    else:
        scores[ok] = 0.0
    return scores


def select_next(state: GreedyState, rule: SelectionRule, rng=None) -> tuple[int, float]:
    """Index of the next point and its score; ties go to the lowest index."""
    scores = score_candidates(state, rule)
    if rule.variant == "random":
        if rng is None:
            rng = np.random.default_rng(rule.seed)
        idx = int(rng.choice(np.flatnonzero(scores > -np.inf)))
        return idx, math.nan
    idx = int(np.argmax(scores))
    return idx, float(scores[idx])


def newton_update(state: GreedyState, new_index: int,
                  power_floor: float = DEFAULT_POWER_FLOOR) -> GreedyState:
    """Add candidate ``new_index`` to the interpolation set (in place)."""
    p2 = state.power_sq[new_index]
    if not p2 > power_floor:
        raise NumericalBreakdown(
            f"P^2 = {p2:.3e} <= {power_floor:.1e} at candidate {new_index}; "
            "the Newton basis update is unstable"
        )
    n = state.n
    if n == state._newton.shape[1]:
        state._newton = np.concatenate([state._newton, np.zeros_like(state._newton)], axis=1)
    V = state._newton[:, :n]
    X = state._xpoints
    kcol = state.model(X, X[new_index : new_index + 1])[:, 0]
    p = np.sqrt(p2)
    v = (kcol - V @ V[new_index]) / p
    coef = state.residual[new_index] / p

    state._newton[:, n] = v
    state.power_sq_raw = state.power_sq - v * v
    state.power_sq = np.maximum(state.power_sq_raw, 0.0)
    state.power_sq[new_index] = 0.0
    if state.f_values is not None:
        state.residual = state.residual - coef * v
    state.selected.append(int(new_index))
    state.coefficients.append(coef)
    state.is_selected[new_index] = True
    return state


def partial_native_norm(state: GreedyState) -> float:
    """Squared native norm of the current interpolant, ``sum_j c_j^2``."""
    c = np.asarray(state.coefficients, dtype=state.dtype)
    return float(np.dot(c, c))


def run_greedy(model: KernelModel, candidates, f_values=None,
               rule: SelectionRule = SelectionRule(), stop: StopCriteria = StopCriteria(),
               selectable=None, meta: dict | None = None, dtype=WORK_DTYPE) -> RunTrace:
    """Run a greedy selection until a stop criterion fires.

    Stop reasons, in the order they are tested at each state: ``residual_tol``
    (largest residual below tolerance, only with a target), ``exhausted`` (no
    eligible candidate), ``max_points``, ``power_tol`` (the proposed point has
    ``P_n(x_{n+1}) < power_tol``) and ``breakdown``.
    """
    state = GreedyState(model, candidates, f_values, selectable,
                        capacity=min(stop.max_points, 1024), dtype=dtype)
    rng = np.random.default_rng(rule.seed) if rule.variant == "random" else None
    has_target = state.f_values is not None
    rows = {k: [] for k in ("idx", "nu", "sigma", "ras", "maxres", "crit", "coef", "pnn")}
    coords = []
    nan = math.nan

    def add_row(idx, nu, ras, crit, coef):
        rows["idx"].append(idx)
        coords.append(state.points[idx] if idx >= 0 else np.full(state.points.shape[1], nan))
        rows["nu"].append(nu)
        rows["ras"].append(ras)
        rows["crit"].append(crit)
        rows["coef"].append(coef)
        rows["sigma"].append(float(np.sqrt(state.power_sq.max())))
        rows["maxres"].append(float(np.abs(state.residual).max()) if has_target else nan)
        rows["pnn"].append(partial_native_norm(state))

    while True:
        if has_target and np.abs(state.residual).max() < stop.residual_tol:
            reason = "residual_tol"
            add_row(-1, nan, nan, nan, nan)
            break
        try:
            idx, crit = select_next(state, rule, rng)
        except Exhausted:
            reason = "exhausted"
            add_row(-1, nan, nan, nan, nan)
            break
        nu = float(np.sqrt(state.power_sq[idx]))
        ras = float(abs(state.residual[idx])) if has_target else nan
        if state.n >= stop.max_points:
            reason = "max_points"
        elif nu < stop.power_tol:
            reason = "power_tol"
        else:
            reason = None
        if reason is not None:
            add_row(-1, nu, ras, crit, nan)
            break
        # diagnostics describe the state before the update
        sigma = float(np.sqrt(state.power_sq.max()))
        maxres = float(np.abs(state.residual).max()) if has_target else nan
        pnn = partial_native_norm(state)
        try:
            newton_update(state, idx, rule.power_floor)
        except NumericalBreakdown as exc:
            log.warning("run stopped: %s", exc)
            reason = "breakdown"
            add_row(-1, nu, ras, crit, nan)
            break
        rows["idx"].append(idx)
        coords.append(state.points[idx])
        rows["nu"].append(nu)
        rows["ras"].append(ras)
        rows["crit"].append(crit)
        rows["coef"].append(float(state.coefficients[-1]) if has_target else nan)
        rows["sigma"].append(sigma)
        rows["maxres"].append(maxres)
        rows["pnn"].append(pnn)

    info = {
        "kernel": model.name,
        "rule": rule.label,
        "stop_reason": reason,
        "n_selected": state.n,
        "n_candidates": state.n_candidates,
        "dim": state.points.shape[1],
    }
    if meta:
        info.update(meta)
    return RunTrace(
        selected_index=rows["idx"],
        coords=np.array(coords),
        nu=rows["nu"],
        sigma=rows["sigma"],
        residual_at_selected=rows["ras"],
        max_residual=rows["maxres"],
        criterion_value=rows["crit"],
        coefficient=rows["coef"],
        partial_native_norm=rows["pnn"],
        meta=info,
        state=state,
    )


def _cholesky(A: np.ndarray) -> np.ndarray:
    # plain column Cholesky; LAPACK has no extended precision
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        pivot = A[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > 0:
            raise SingularKernelMatrix(
                f"kernel matrix of {n} points is numerically singular (pivot {j})"
            )
        L[j, j] = np.sqrt(pivot)
        L[j + 1 :, j] = (A[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def _forward(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    W = np.zeros_like(B)
    for j in range(L.shape[0]):
        W[j] = (B[j] - L[j, :j] @ W[:j]) / L[j, j]
    return W


def _backward(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    # solves L^T X = B
    n = L.shape[0]
    X = np.zeros_like(B)
    for j in range(n - 1, -1, -1):
        X[j] = (B[j] - L[j + 1 :, j] @ X[j + 1 :]) / L[j, j]
    return X


def _prepare(model: KernelModel, selected, query, dtype):
    S = np.asarray(selected, dtype=float)
    if S.ndim == 1:
        S = S.reshape(-1, 1) if model.dim in (None, 1) and S.size else S.reshape(1, -1)
    Q = np.asarray(query, dtype=float)
    single = Q.ndim <= 1
    # a scalar or 1-D array is one point, a 2-D array is a list of points
    Q = Q.reshape(1, -1) if single else Q
    return S.astype(dtype), Q.astype(dtype), single


def power_oracle(model: KernelModel, selected, query, dtype=WORK_DTYPE):
    """Power function ``sqrt(k(q,q) - k_q^T A^{-1} k_q)`` by a dense Cholesky solve.

    ``selected`` is an ``(n, d)`` array of pairwise distinct points, ``query``
    one point or an ``(m, d)`` array.  Negative radicands are clamped to 0.
    """
    S, Q, single = _prepare(model, selected, query, dtype)
    kqq = np.asarray(model.diag(Q), dtype=dtype)
    if len(S) == 0:
        out = np.sqrt(np.maximum(kqq, 0))
    else:
        L = _cholesky(model(S, S))
        W = _forward(L, model(S, Q))
        out = np.sqrt(np.maximum(kqq - np.einsum("ij,ij->j", W, W), 0))
        # exact zeros at the nodes instead of sqrt(rounding noise)
        at_node = (Q[:, None, :] == S[None, :, :]).all(axis=2).any(axis=1)
        out[at_node] = 0
    out = out.astype(float)
    return float(out[0]) if single else out


def interpolant_oracle(model: KernelModel, selected, f_at_selected, query, dtype=WORK_DTYPE):
    """Kernel interpolant of ``f_at_selected`` evaluated at ``query`` (dense solve)."""
    S, Q, single = _prepare(model, selected, query, dtype)
    if len(S) == 0:
        out = np.zeros(Q.shape[0])
    else:
        L = _cholesky(model(S, S))
        rhs = np.asarray(f_at_selected, dtype=dtype).reshape(-1, 1)
        alpha = _backward(L, _forward(L, rhs))[:, 0]
        out = (model(Q, S) @ alpha).astype(float)
    return float(out[0]) if single else out
