"""Splitting into bounded and small parts.

* :func:`threshold_split` cuts an ``L^p`` function at a height ``K`` so the
  part above ``K`` is small in ``L^p'`` for any ``p' < p``.
* :func:`rank1_split` does the same for rank-one tensors while keeping every
  piece rank one.
* :func:`top_k_sparsify` keeps the ``k`` largest entries of a vector in the
  unit ball of ``l^p``; the rest is small in ``l^q`` for ``q > p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .errors import PreconditionError
from .seminorms import SeminormFamily, family_membership
from .tensorspace import (
    INF,
    Measure,
    StepTensor,
    as_exponent,
    lp_norm,
    rank1,
    weighted_lp,
)

NORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TruncationSplit:
    bounded: StepTensor
    tail: StepTensor
    threshold_K: float
    tail_norm_bound: float


def threshold_exponent_constant(p: float, p_prime: float, eps: float) -> float:
    """Height ``K`` with ``K**(1 - p/p_prime) == eps``."""
    if p == INF:
        return 1.0
    return eps ** (p_prime / (p_prime - p))


def threshold_split(f: StepTensor, p, p_prime, eps: float) -> TruncationSplit:
    """Split ``f`` into ``f*1{|f|<=K} + f*1{|f|>K}``.

    For ``||f||_p <= 1`` on a probability space the tail obeys
    ``||tail||_{p'} <= K**((p'-p)/p') = eps``.
    """
    p, p_prime = as_exponent(p), as_exponent(p_prime)
    if f.measure is not Measure.PROBABILITY:
        raise PreconditionError("threshold_split needs the probability measure")
    if not p > p_prime:
        raise PreconditionError(f"need p > p' >= 1, got p={p}, p'={p_prime}")
    if p_prime == INF:
        raise PreconditionError("p' must be finite")
    if not eps > 0:
        raise PreconditionError("epsilon must be positive")
    norm = lp_norm(f, p)
    if norm > 1 + NORM_TOL:
        raise PreconditionError(f"||f||_p = {norm} exceeds 1")
    K = threshold_exponent_constant(p, p_prime, eps)
    big = np.abs(f.values) > K
    tail = np.where(big, f.values, 0.0)
    bounded = np.where(big, 0.0, f.values)
    return TruncationSplit(f.with_values(bounded), f.with_values(tail), K, eps)


# --- rank-one splits -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Rank1Term:
    """One rank-one piece: ``tag`` is ``"bounded"`` (``bound`` caps the sup
    norm) or ``"small"`` (``bound`` caps the ``L^s`` norm)."""

    tag: str
    factors: tuple
    bound: float

    def tensor(self) -> StepTensor:
        return rank1(self.factors, Measure.PROBABILITY)


@dataclass(frozen=True, eq=False)
class Rank1Split:
    terms: List[Rank1Term]
    constant: float
    small_budget: float
    p_prime: float
    delta: float
    eta: float

    @property
    def bounded_terms(self):
        return [t for t in self.terms if t.tag == "bounded"]

    @property
    def small_terms(self):
        return [t for t in self.terms if t.tag == "small"]

    def reconstruct(self) -> StepTensor:
        total = None
        for t in self.terms:
            x = t.tensor()
            total = x if total is None else total + x
        return total

    def check_memberships(self, eps: float, s) -> bool:
        """Every bounded term lies in ``C*R^inf`` and every small term in ``eps*R^s``."""
        if not self.terms:
            return True
        n, l = self.terms[0].factors[0].size, len(self.terms[0].factors)
        sup_family = SeminormFamily.holder(INF, l, n)
        s_family = SeminormFamily.holder(s, l, n)
        for t in self.terms:
            fam, scale = (sup_family, self.constant) if t.tag == "bounded" else (s_family, eps)
            if not family_membership(fam, t.tensor(), scale=scale, tol=1e-9):
                return False
        return True


def middle_exponent(s: float, p: float) -> float:
    """Exponent ``p'`` with ``1/p' = (1/s + 1/p)/2``; strictly between ``s`` and ``p``."""
    inv = 0.5 * (1.0 / s + (0.0 if p == INF else 1.0 / p))
    return 1.0 / inv


def _balanced(factors, p: float):
    """Rescale factors to unit ``p``-norm; returns ``(factors, product of norms)``."""
    w = 1.0 / factors[0].size
    norms = [weighted_lp(f, p, w) for f in factors]
    scale = math.prod(norms)
    if scale == 0.0:
        return None, 0.0
    return [f / nrm for f, nrm in zip(factors, norms)], scale


def _scaled(factors, c: float):
    return [factors[0] * c] + list(factors[1:])


def _split(factors, p: float, s: float, eps: float):
    """Recursive split; returns ``(bounded, small, delta, eta)`` where bounded
    items are ``(factors, sup bound)`` and small items ``(factors, s-norm bound)``."""
    if len(factors) == 1:
        f = factors[0]
        K = threshold_exponent_constant(p, s, eps)
        big = np.abs(f) > K
        bounded, small = [], []
        head = np.where(big, 0.0, f)
        tail = np.where(big, f, 0.0)
        if head.any():
            bounded.append(([head], K))
        if tail.any():
            small.append(([tail], eps))
        return bounded, small, None, None

    pm = middle_exponent(s, p)
    delta = math.sqrt(eps / 3.0)
    LB, LS, _, _ = _split(factors[:-1], p, pm, delta)
    RB, RS, _, _ = _split(factors[-1:], p, pm, delta)
    c1 = max([sum(b for _, b in LB), sum(b for _, b in RB), 1.0])
    eta = eps / (3.0 * c1 * delta)

    bounded, small = [], []
    for lf, lb in LB:
        for rf, rb in RB:
            bounded.append((lf + rf, lb * rb))
    # small x small lands in delta^2 R^{p'} which sits inside R^s
    for lf, lbud in LS:
        for rf, rbud in RS:
            small.append((lf + rf, lbud * rbud))
    # bounded x small: split the small side again from p' down to s
    for rf, rbud in RS:
        unit, scale = _balanced(rf, pm)
        if unit is None:
            continue
        b2, s2, _, _ = _split(unit, pm, s, eta)
        for lf, lb in LB:
            for f2, c2 in b2:
                bounded.append((lf + _scaled(f2, scale), lb * scale * c2))
            for f2, e2 in s2:
                small.append((lf + _scaled(f2, scale), lb * scale * e2))
    for lf, lbud in LS:
        unit, scale = _balanced(lf, pm)
        if unit is None:
            continue
        b2, s2, _, _ = _split(unit, pm, s, eta)
        for rf, rb in RB:
            for f2, c2 in b2:
                bounded.append((_scaled(f2, scale) + rf, scale * c2 * rb))
            for f2, e2 in s2:
                small.append((_scaled(f2, scale) + rf, scale * e2 * rb))
    return bounded, small, delta, eta


def rank1_split(factors: Sequence, p, s, eps: float) -> Rank1Split:
    """Write ``f_1 ⊗ ... ⊗ f_l`` (each ``f_j`` in the unit ball of ``L^p``) as a
    sum of rank-one terms that are either bounded in sup norm or small in
    ``L^s``; the small budgets add up to at most ``eps``.

    For ``l > 1`` the first and last ``l-1`` factors are split recursively
    at the intermediate exponent ``p'`` with tolerance ``delta = sqrt(eps/3)``;
    the cross terms are split once more from ``p'`` to ``s`` with tolerance
    ``eta = eps / (3 * C1 * delta)``.  ``constant`` is the sum of the
    bounded terms' sup bounds, so every bounded term (and their sum) lies in
    ``constant * R^inf``.
    """
    p, s = as_exponent(p), as_exponent(s)
    if not p > s:
        raise PreconditionError(f"need p > s >= 1, got p={p}, s={s}")
    if s == INF:
        raise PreconditionError("s must be finite")
    if not eps > 0:
        raise PreconditionError("epsilon must be positive")
    vecs = [np.asarray(f, dtype=np.float64).ravel() for f in factors]
    if not vecs:
        raise PreconditionError("need at least one factor")
    n = vecs[0].size
    if any(v.size != n for v in vecs):
        raise PreconditionError("factor lengths differ")
    for j, v in enumerate(vecs):
        nrm = weighted_lp(v, p, 1.0 / n)
        if nrm > 1 + NORM_TOL:
            raise PreconditionError(f"factor {j} has p-norm {nrm} > 1")
    bounded, small, delta, eta = _split(vecs, p, s, eps)
    terms = [Rank1Term("bounded", tuple(f), b) for f, b in bounded]
    terms += [Rank1Term("small", tuple(f), b) for f, b in small]
    constant = sum(b for _, b in bounded)
    budget = sum(b for _, b in small)
    pm = middle_exponent(s, p) if len(vecs) > 1 else s
    return Rank1Split(terms, constant, budget, pm, delta or 0.0, eta or 0.0)


# --- sparsification --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SparsifyResult:
    support: np.ndarray
    sparse: StepTensor
    k_bound_used: int
    achieved_error: float
    error_bound: float = field(default=0.0)


def k_bound(p, q, eps: float) -> int:
    """Support size guaranteeing ``||x - x_K||_q <= eps`` on the unit ball of ``l^p``.

    ``q = inf`` gives ``ceil(eps**-p)``.  For finite ``q`` the tail
    ``sum_{i>k} i**(-q/p)`` is bounded by ``k**(1-q/p) / (q/p - 1)`` and the
    smallest ``k`` making that at most ``eps**q`` is returned; this
    over-approximates the least sufficient ``k``.
    """
    p, q = as_exponent(p), as_exponent(q)
    if p == INF:
        raise PreconditionError("p must be finite")
    if not q > p:
        raise PreconditionError(f"need q > p (no uniform k exists for q <= p), got p={p}, q={q}")
    if not eps > 0:
        raise PreconditionError("epsilon must be positive")
    if eps > 1:
        raise PreconditionError("epsilon must lie in (0, 1]")
    if q == INF:
        v = eps ** (-p)
        r = round(v)
        return max(1, int(r if abs(v - r) <= 1e-12 * max(1.0, v) else math.ceil(v)))
    r = q / p
    log_k = (q * math.log(eps) + math.log(r - 1)) / (1 - r)
    if log_k > 700:
        raise PreconditionError("k_bound overflows for these parameters")
    k = max(1, math.ceil(math.exp(log_k) * (1 - 1e-12)))

    def ok(k):
        return k ** (1 - r) / (r - 1) <= eps**q

    while not ok(k):
        k += 1
    while k > 1 and ok(k - 1):
        k -= 1
    return k


def top_k_sparsify(x: StepTensor, p, q, eps: float) -> SparsifyResult:
    """Keep the ``k_bound(p, q, eps)`` largest entries of ``x`` in magnitude
    (ties to the lowest flat index)."""
    p, q = as_exponent(p), as_exponent(q)
    if x.measure is not Measure.COUNTING:
        raise PreconditionError("top_k_sparsify needs the counting measure")
    norm = lp_norm(x, p)
    if norm > 1 + NORM_TOL:
        raise PreconditionError(f"||x||_p = {norm} exceeds 1")
    k = k_bound(p, q, eps)
    support, sparse = top_k(x, k)
    err = lp_norm(x - sparse, q)
    return SparsifyResult(support, sparse, k, err, eps)


def top_k(x: StepTensor, k: int):
    """``(support, x_K)``: the ``k`` largest entries in magnitude, ties to the
    lowest flat index; ``support`` is sorted."""
    if k < 0:
        raise PreconditionError("k must be nonnegative")
    flat = x.flat
    order = np.argsort(-np.abs(flat), kind="stable")
    support = np.sort(order[: min(k, flat.size)])
    kept = np.zeros_like(flat)
    kept[support] = flat[support]
    return support, x.with_values(kept)


def flat_counterexample(n: int, p: float) -> StepTensor:
    """``x(i) = 1/n`` on the first ``n**p`` coordinates: unit ``l^p`` norm, yet no
    fixed support size approximates it in ``l^p``."""
    m = int(round(n**p))
    return StepTensor(np.full(m, 1.0 / n), Measure.COUNTING)


# --- low-rank approximation in the sup norm --------------------------------


def _sup_fit(U: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Columns ``v_j`` minimising ``max_i |M_ij - (U v_j)_i|`` for every ``j``.

    The columns decouple, so one linear program minimising the sum of the
    per-column errors optimises each column (and hence the maximum).
    """
    from scipy.optimize import linprog
    from scipy.sparse import block_diag, csr_matrix, hstack, kron, identity, vstack

    n, r = U.shape
    m = M.shape[1]
    A_v = block_diag([U] * m, format="csr")
    A_t = kron(identity(m), np.ones((n, 1)), format="csr")
    A_ub = vstack([hstack([A_v, -A_t]), hstack([-A_v, -A_t])], format="csr")
    b = M.T.ravel()
    b_ub = np.concatenate([b, -b])
    c = np.concatenate([np.zeros(r * m), np.ones(m)])
    bounds = [(None, None)] * (r * m) + [(0, None)] * m
    res = linprog(c, A_ub=csr_matrix(A_ub), b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"sup-norm fit failed: {res.message}")
    return res.x[: r * m].reshape(m, r)


def low_rank_sup_approx(M, rank: int, restarts: int = 64, seed: int = 0, max_iter: int = 30, tol: float = 1e-9):
    """Alternating minimisation of ``max |M - U V^T|`` over rank-``rank`` factors.

    Restart 0 starts from the truncated SVD, the others from seeded Gaussian
    factors.  Returns ``(best error, U, V, per-restart errors)``; the error is
    attained by ``U V^T``, so it can only overestimate the true minimum.
    """
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    if not 1 <= rank <= min(M.shape):
        raise PreconditionError(f"rank must lie in [1, {min(M.shape)}]")
    best = (math.inf, None, None)
    errors = []
    for restart in range(restarts):
        if restart == 0:
            u, sv, _ = np.linalg.svd(M)
            U = u[:, :rank] * sv[:rank]
        else:
            U = np.random.default_rng(seed ^ restart).standard_normal((n, rank))
        run = (math.inf, U, None)
        for _ in range(max_iter):
            V = _sup_fit(U, M)
            U = _sup_fit(V, M.T)
            err = float(np.abs(M - U @ V.T).max())
            improved = err < run[0] - tol
            if err < run[0]:
                run = (err, U, V)
            if not improved:
                break
        errors.append(run[0])
        if run[0] < best[0]:
            best = run
    return best[0], best[1], best[2], errors
