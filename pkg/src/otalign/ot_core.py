"""Cosine-distance costs, entropic optimal transport, sparse alignments.

The per-stock-day alignment pipeline: cosine similarities between the two
languages' sentence embeddings define a min-max scaled cost matrix; a
log-domain Sinkhorn solve yields a transport plan under uniform marginals;
row-argmax hits that land in the top fraction of their column give a forward
mask, the transposed plan gives the backward mask, and the final alignment is
their intersection gated by a raw-similarity threshold. Softmax and 1.5-entmax
row normalizations of the similarity matrix serve as dense baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .embed_io import EmbeddingMatrixPair
from .errors import (
    NumericalError,
    OracleTooLarge,
    ParameterError,
    SchemaError,
)

DEFAULT_EPSILON = 0.05
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10_000
DEFAULT_TOP_FRAC = 0.05
DEFAULT_XI_THRES = 0.6

# Below this spread the min-max scaling is degenerate: a constant cost carries
# no alignment signal, so the scaled cost is set to all zeros and filtering is
# left to the similarity gate.
DEGENERATE_RANGE = 1e-12

ORACLE_MAX_CELLS = 64


@dataclass(frozen=True)
class CostMatrix:
    """Min-max scaled cosine-distance costs plus the raw similarities."""

    values: np.ndarray
    raw_similarity: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.raw_similarity.shape:
            raise SchemaError("cost and similarity shapes differ")


@dataclass(frozen=True)
class TransportPlan:
    gamma: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    epsilon: float
    iterations: int
    converged: bool

    @property
    def marginal_violation(self) -> float:
        row_err = np.abs(self.gamma.sum(axis=1) - self.row_marginal).max()
        col_err = np.abs(self.gamma.sum(axis=0) - self.col_marginal).max()
        return float(max(row_err, col_err))


@dataclass(frozen=True)
class AlignmentMatrix:
    """Final mask plus the directional masks it intersects."""

    mask: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    xi_thres: float


@dataclass(frozen=True)
class AlignmentParams:
    epsilon: float = DEFAULT_EPSILON
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    top_frac: float = DEFAULT_TOP_FRAC
    xi_thres: float = DEFAULT_XI_THRES


@dataclass(frozen=True)
class AlignmentResult:
    cost: CostMatrix
    plan: TransportPlan
    alignment: AlignmentMatrix
    params: AlignmentParams

    @property
    def aligned_pairs(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(self.alignment.mask)
        return list(zip(rows.tolist(), cols.tolist()))


def cost_matrix(pair: EmbeddingMatrixPair) -> CostMatrix:
    """Pairwise cosine distance, min-max scaled to [0, 1] over the matrix."""
    xi = pair.x_e @ pair.x_f.T
    pre = 1.0 - xi
    lo, hi = pre.min(), pre.max()
    if hi - lo < DEGENERATE_RANGE:
        scaled = np.zeros_like(pre)
    else:
        scaled = (pre - lo) / (hi - lo)
    return CostMatrix(values=scaled, raw_similarity=xi)


def uniform_marginals(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    return np.full(n, 1.0 / n), np.full(m, 1.0 / m)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    mx = a.max(axis=axis, keepdims=True)
    out = np.log(np.exp(a - mx).sum(axis=axis)) + np.squeeze(mx, axis=axis)
    return out


def sinkhorn(
    cost,
    epsilon: float = DEFAULT_EPSILON,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    p: np.ndarray | None = None,
    q: np.ndarray | None = None,
) -> TransportPlan:
    """Entropically regularized OT via log-domain Sinkhorn scaling.

    Solves for gamma = diag(u) K diag(v), K = exp(-cost/epsilon), with the
    scalings tracked as log-domain potentials so small epsilon cannot
    overflow. Marginals default to uniform. Stops when the max row-marginal
    violation drops to ``tol`` (column marginals are exact by construction
    after each sweep) or after ``max_iter`` sweeps with ``converged=False``.
    """
    if epsilon <= 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon}")
    c = cost.values if isinstance(cost, CostMatrix) else np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise SchemaError("cost must be a 2-D matrix")
    if not np.isfinite(c).all():
        raise NumericalError("cost matrix contains non-finite entries")
    n, m = c.shape
    if p is None or q is None:
        p, q = uniform_marginals(n, m)

    log_p = np.log(p)
    log_q = np.log(q)
    neg_c = -c / epsilon

    u = log_p - _logsumexp(neg_c, axis=1)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        v = log_q - _logsumexp(u[:, None] + neg_c, axis=0)
        row_lse = _logsumexp(v[None, :] + neg_c, axis=1)
        row_err = np.abs(np.exp(u + row_lse) - p).max()
        if row_err <= tol:
            converged = True
            break
        u = log_p - row_lse

    gamma = np.exp(u[:, None] + v[None, :] + neg_c)
    return TransportPlan(
        gamma=gamma,
        row_marginal=p,
        col_marginal=q,
        epsilon=epsilon,
        iterations=iterations,
        converged=converged,
    )


def exact_ot_oracle(cost: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Exact optimal plan of the discrete problem via linear programming.

    Test oracle for tiny instances only (n*m <= 64); the entropic solver is
    checked against this, never the other way around.
    """
    from scipy.optimize import linprog

    c = np.asarray(cost, dtype=np.float64)
    n, m = c.shape
    if n * m > ORACLE_MAX_CELLS:
        raise OracleTooLarge(f"{n}x{m} exceeds the {ORACLE_MAX_CELLS}-cell oracle cap")
    a_eq = np.zeros((n + m, n * m))
    for i in range(n):
        a_eq[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        a_eq[n + j, j::m] = 1.0
    b_eq = np.concatenate([p, q])
    res = linprog(c.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise NumericalError(f"LP oracle failed: {res.message}")
    return res.x.reshape(n, m)


def directional_alignment(gamma: np.ndarray, top_frac: float = DEFAULT_TOP_FRAC) -> np.ndarray:
    """Row-argmax mask, kept only when the hit ranks in the top of its column.

    For each row i the argmax column j* (ties: smallest j) is marked iff
    gamma[i, j*] is among the ceil(top_frac * n) largest entries of column j*,
    ties at the cutoff included.
    """
    if not 0 < top_frac <= 1:
        raise ParameterError(f"top_frac must be in (0, 1], got {top_frac}")
    g = np.asarray(gamma, dtype=np.float64)
    n, m = g.shape
    k = min(n, math.ceil(top_frac * n))
    # k-th largest value per column is the admission cutoff
    cutoffs = np.partition(g, n - k, axis=0)[n - k, :]
    out = np.zeros((n, m), dtype=np.int8)
    j_star = np.argmax(g, axis=1)
    hits = g[np.arange(n), j_star] >= cutoffs[j_star]
    out[np.flatnonzero(hits), j_star[hits]] = 1
    return out


def intersect_alignments(
    forward: np.ndarray,
    backward: np.ndarray,
    xi: np.ndarray,
    xi_thres: float = DEFAULT_XI_THRES,
) -> AlignmentMatrix:
    """Elementwise product of both directional masks and the similarity gate."""
    a = np.asarray(forward)
    b = np.asarray(backward)
    x = np.asarray(xi)
    if a.shape != x.shape or b.shape != (x.shape[1], x.shape[0]):
        raise SchemaError(
            f"inconsistent shapes: forward {a.shape}, backward {b.shape}, xi {x.shape}"
        )
    mask = (a * b.T * (x >= xi_thres)).astype(np.int8)
    return AlignmentMatrix(mask=mask, forward=a, backward=b, xi_thres=xi_thres)


def baseline_normalize(
    xi: np.ndarray, method: str, temperature: float = 1.0
) -> np.ndarray:
    """Dense row-stochastic baselines over the similarity matrix."""
    if temperature <= 0:
        raise ParameterError(f"temperature must be positive, got {temperature}")
    x = np.asarray(xi, dtype=np.float64)
    if not np.isfinite(x).all():
        raise NumericalError("similarity matrix contains non-finite entries")
    z = x / temperature
    if method == "softmax":
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)
    if method == "entmax15":
        return np.apply_along_axis(_entmax15_row, 1, z)
    raise ParameterError(f"unknown baseline method {method!r}")


def _entmax15_row(z: np.ndarray) -> np.ndarray:
    """Exact 1.5-entmax via the sort-based threshold, no iterative solver.

    With s = z/2 sorted descending, the threshold over a support of size k is
    tau_k = mean_k - sqrt((1 - k*var_k)/k); the support is the largest k whose
    sorted value still clears tau_k, and p = max(0, s - tau)^2.
    """
    s = np.sort(z / 2.0)[::-1]
    k = np.arange(1, s.size + 1)
    mean = np.cumsum(s) / k
    mean_sq = np.cumsum(s**2) / k
    ss = k * (mean_sq - mean**2)
    delta = np.maximum((1.0 - ss) / k, 0.0)
    tau = mean - np.sqrt(delta)
    support = int(np.sum(tau <= s))
    tau_star = tau[support - 1]
    return np.maximum(z / 2.0 - tau_star, 0.0) ** 2


def global_top_fraction(matrix: np.ndarray, frac: float = DEFAULT_TOP_FRAC) -> np.ndarray:
    """Mask of the ceil(frac * size) largest entries, ties at cutoff included."""
    if not 0 < frac <= 1:
        raise ParameterError(f"frac must be in (0, 1], got {frac}")
    m = np.asarray(matrix, dtype=np.float64)
    k = min(m.size, math.ceil(frac * m.size))
    cutoff = np.partition(m.ravel(), m.size - k)[m.size - k]
    return (m >= cutoff).astype(np.int8)


def align_pair(pair: EmbeddingMatrixPair, params: AlignmentParams | None = None) -> AlignmentResult:
    """Full alignment of one stock-day's embedding matrices.

    The backward plan is the transpose of the forward plan: transposing the
    cost and swapping the (uniform) marginals transposes the Sinkhorn
    solution, so one solve serves both directions.
    """
    params = params or AlignmentParams()
    cost = cost_matrix(pair)
    plan = sinkhorn(cost, params.epsilon, params.tol, params.max_iter)
    forward = directional_alignment(plan.gamma, params.top_frac)
    backward = directional_alignment(plan.gamma.T, params.top_frac)
    alignment = intersect_alignments(forward, backward, cost.raw_similarity, params.xi_thres)
    return AlignmentResult(cost=cost, plan=plan, alignment=alignment, params=params)
