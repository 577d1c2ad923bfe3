"""Relabelings of the grid, orbit pseudometrics ``inf_g ||a - g b||_R``,
greedy epsilon-nets under them, and interpolation exponents."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from ._parallel import parallel_map
from .errors import BudgetExceeded, PreconditionError
from .seminorms import (
    EXACT,
    MAX_ENUMERATION,
    Exact,
    Heuristic,
    Mode,
    SeminormFamily,
    exact_values_batch,
    operator_norm,
    r_seminorm,
)
from .tensorspace import INF, StepTensor, as_exponent, dual_exponent, lp_norm

EXACT_ORBIT_MAX_N = 8
ANOMALY_TOL = 1e-3


@dataclass(frozen=True, eq=False)
class BlockPermutation:
    perm: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm)
        if perm.ndim != 1 or not np.issubdtype(perm.dtype, np.integer) and perm.size:
            raise PreconditionError("a permutation is a 1-d integer index array")
        perm = perm.astype(np.int64)
        if not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise PreconditionError("permutation must list every index exactly once")
        perm.setflags(write=False)
        object.__setattr__(self, "perm", perm)

    @classmethod
    def identity(cls, n: int):
        return cls(np.arange(n))

    @classmethod
    def random(cls, n: int, seed: int = 0):
        return cls(np.random.default_rng(seed).permutation(n))

    def __len__(self):
        return self.perm.size

    def inverse(self) -> "BlockPermutation":
        return BlockPermutation(np.argsort(self.perm))

    def compose(self, other: "BlockPermutation") -> "BlockPermutation":
        """``self ∘ other``: apply ``other`` first."""
        return BlockPermutation(self.perm[other.perm])

    def __eq__(self, other):
        return isinstance(other, BlockPermutation) and np.array_equal(self.perm, other.perm)

    def __hash__(self):
        return hash(self.perm.tobytes())


def _act(values: np.ndarray, inv: np.ndarray) -> np.ndarray:
    return values[np.ix_(*([inv] * values.ndim))]


def apply_permutation(t: StepTensor, g: BlockPermutation) -> StepTensor:
    """``(g t)(i_1..i_l) = t(g^-1 i_1, .., g^-1 i_l)``."""
    if len(g) != t.resolution:
        raise PreconditionError(f"permutation has length {len(g)}, tensor resolution is {t.resolution}")
    return t.with_values(_act(t.values, np.argsort(g.perm)))


@dataclass(frozen=True, eq=False)
class OrbitDistanceResult:
    distance: float
    aligner: BlockPermutation
    exact: bool
    inner_exact: bool = True


def _batchable(family: SeminormFamily) -> bool:
    return family.order == 2 and family.factor_type != "holder"


def _exact_orbit(a: StepTensor, b: StepTensor, family: SeminormFamily) -> OrbitDistanceResult:
    n = a.resolution
    if n > EXACT_ORBIT_MAX_N:
        raise BudgetExceeded(f"exact orbit distance enumerates n! relabelings; n={n} exceeds {EXACT_ORBIT_MAX_N}")
    invs = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    if _batchable(family):
        stack = a.values[None] - b.values[invs[:, :, None], invs[:, None, :]]
        vals = exact_values_batch(family, stack, a.weight)
    else:
        vals = np.array([r_seminorm(family, a - b.with_values(_act(b.values, inv)), EXACT) for inv in invs])
    i = int(np.argmin(vals))
    g = BlockPermutation(np.argsort(invs[i]))
    dist = r_seminorm(family, a - apply_permutation(b, g), EXACT)
    return OrbitDistanceResult(dist, g, True, True)


def _inner_mode(family: SeminormFamily, n: int, mode: Heuristic, inner: Optional[Mode]) -> Mode:
    if inner is not None:
        return inner
    if n <= EXACT_ORBIT_MAX_N and family.enumeration_size() <= MAX_ENUMERATION:
        return EXACT
    return Heuristic(restarts=4, seed=mode.seed)


def _local_search(a, b, family, inv, inner, max_sweeps, stop_below):
    def value(inv):
        return r_seminorm(family, a - b.with_values(_act(b.values, inv)), inner)

    n = inv.size
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    cur = value(inv)
    batch = isinstance(inner, Exact) and _batchable(family)
    for _ in range(max_sweeps):
        if stop_below is not None and cur <= stop_below:
            break
        if batch:
            cands = np.repeat(inv[None], len(pairs), axis=0)
            for r, (i, j) in enumerate(pairs):
                cands[r, i], cands[r, j] = inv[j], inv[i]
            stack = a.values[None] - b.values[cands[:, :, None], cands[:, None, :]]
            vals = exact_values_batch(family, stack, a.weight)
            r = int(np.argmin(vals))
            if not vals[r] < cur - 1e-12:
                break
            inv, cur = cands[r], value(cands[r])
            continue
        improved = False
        for i, j in pairs:
            cand = inv.copy()
            cand[i], cand[j] = inv[j], inv[i]
            v = value(cand)
            if v < cur - 1e-12:
                inv, cur, improved = cand, v, True
                if stop_below is not None and cur <= stop_below:
                    break
        if not improved:
            break
    return inv, cur


def marginal_alignment(a: StepTensor, b: StepTensor) -> np.ndarray:
    """Inverse relabeling matching ranks of the first-axis marginals of ``a`` and ``b``."""
    axes = tuple(range(1, a.order))
    ma = a.values.sum(axis=axes) if axes else a.values
    mb = b.values.sum(axis=axes) if axes else b.values
    sa = np.argsort(ma, kind="stable")
    sb = np.argsort(mb, kind="stable")
    inv = np.empty(a.resolution, dtype=np.int64)
    inv[sa] = sb
    return inv


def orbit_distance(
    a: StepTensor,
    b: StepTensor,
    family: SeminormFamily,
    mode: Mode = EXACT,
    inner: Optional[Mode] = None,
    max_sweeps: int = 50,
    stop_below: Optional[float] = None,
) -> OrbitDistanceResult:
    """``inf_g ||a - g b||_R`` over relabelings ``g`` of the grid.

    Exact mode enumerates all ``n!`` relabelings (``n <= 8``) with the exact
    seminorm.  Heuristic mode (``restarts`` random starts plus the
    marginal-sorting start) runs transposition local search and returns the
    best relabeling found, an upper bound on the orbit distance whenever the
    inner seminorm is exact.  ``stop_below`` ends the search early once the
    value drops to that level.
    """
    if not a.same_space(b):
        raise PreconditionError("orbit distance needs tensors of one shape and measure")
    family.check_tensor(a)
    if isinstance(mode, Exact):
        return _exact_orbit(a, b, family)
    if not isinstance(mode, Heuristic):
        raise PreconditionError(f"unknown mode {mode!r}")
    n = a.resolution
    inner_mode = _inner_mode(family, n, mode, inner)
    starts = [marginal_alignment(a, b)]
    starts += [np.random.default_rng(mode.seed ^ r).permutation(n) for r in range(mode.restarts)]
    best_inv, best = None, math.inf
    for inv in starts:
        inv, val = _local_search(a, b, family, inv, inner_mode, max_sweeps, stop_below)
        if val < best:
            best_inv, best = inv, val
        if stop_below is not None and best <= stop_below:
            break
    g = BlockPermutation(np.argsort(best_inv))
    return OrbitDistanceResult(best, g, False, isinstance(inner_mode, Exact))


@dataclass(frozen=True, eq=False)
class CoverResult:
    net: List[int]
    assignment: np.ndarray
    distances: np.ndarray
    distance_mode: str
    inner_exact: bool
    eps: float

    def to_dict(self) -> dict:
        return {
            "net": list(map(int, self.net)),
            "assignment": self.assignment.tolist(),
            "distances": self.distances.tolist(),
            "distance_mode": self.distance_mode,
            "inner_exact": self.inner_exact,
            "epsilon": self.eps,
            "net_size": len(self.net),
        }


def greedy_cover(
    samples: Sequence[StepTensor],
    family: SeminormFamily,
    eps: float,
    mode: Mode = EXACT,
    max_sweeps: int = 50,
) -> CoverResult:
    """Farthest-point epsilon-net in the orbit pseudometric.

    The first sample seeds the net; the uncovered sample farthest from the
    net joins it until every sample is within ``eps`` of a net element.
    Distances are only refined for samples not yet covered, so a sample is
    assigned to the first net element found within ``eps``.  Exact distances
    are used only when requested and ``n <= 8``.
    """
    if not eps > 0:
        raise PreconditionError("epsilon must be positive")
    samples = list(samples)
    if not samples:
        return CoverResult([], np.zeros(0, dtype=np.int64), np.zeros(0), "none", True, eps)
    for s in samples[1:]:
        if not s.same_space(samples[0]):
            raise PreconditionError("cover samples must share one shape and measure")
    n = samples[0].resolution
    if isinstance(mode, Exact) and n <= EXACT_ORBIT_MAX_N:
        dmode, label = EXACT, "exact"
    else:
        dmode = mode if isinstance(mode, Heuristic) else Heuristic(restarts=2, seed=0)
        label = "heuristic"
    inner_exact = True

    def dist(i, j):
        nonlocal inner_exact
        res = orbit_distance(samples[i], samples[j], family, dmode, max_sweeps=max_sweeps,
                             stop_below=None if label == "exact" else eps)
        inner_exact = inner_exact and res.inner_exact
        return res.distance

    m = len(samples)
    net = [0]
    assignment = np.zeros(m, dtype=np.int64)
    dists = np.full(m, math.inf)
    dists[0] = 0.0
    todo = list(range(1, m))
    newest = 0
    while True:
        vals = parallel_map(lambda i: dist(i, newest), todo)
        for i, v in zip(todo, vals):
            if v < dists[i]:
                dists[i], assignment[i] = v, newest
        todo = [i for i in todo if dists[i] > eps]
        if not todo:
            break
        newest = max(todo, key=lambda i: (dists[i], -i))
        net.append(newest)
        assignment[newest], dists[newest] = newest, 0.0
        todo.remove(newest)
        if not todo:
            break
    return CoverResult(net, assignment, dists, label, inner_exact, eps)


# --- interpolation ---------------------------------------------------------


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


def _recip(x) -> Fraction:
    if x == INF:
        return Fraction(0)
    return 1 / _frac(x)


def _from_recip(r: Fraction):
    return INF if r == 0 else 1 / r


def interp_exponents(p, q, theta):
    """Exponents with ``1/p_t = (1-t)/p* + t/q`` and ``1/q_t = (1-t)/p + t/q*``.

    Finite results come back as ``Fraction``; infinity as ``math.inf``.
    """
    pe, qe = as_exponent(p), as_exponent(q)
    if not (pe > 1 and qe > 1):
        raise PreconditionError("p and q must lie in (1, inf]")
    if not qe > dual_exponent(pe):
        raise PreconditionError("need q > p*")
    t = _frac(theta)
    if not 0 < t < 1:
        raise PreconditionError(f"theta must lie in (0, 1), got {theta}")
    p_, q_ = (pe if pe == INF else p), (qe if qe == INF else q)
    inv_p, inv_q = _recip(p_), _recip(q_)
    inv_pt = (1 - t) * (1 - inv_p) + t * inv_q
    inv_qt = (1 - t) * inv_p + t * (1 - inv_q)
    return _from_recip(inv_pt), _from_recip(inv_qt)


@dataclass(frozen=True)
class RieszThorinReport:
    p_theta: float
    q_theta: float
    lhs_lower: float
    rhs_norm: float
    rhs_power: float
    anomaly: bool
    slack: float = field(default=0.0)


def riesz_thorin_check(W: StepTensor, p, q, theta, mode: Mode = None, tol: float = ANOMALY_TOL) -> RieszThorinReport:
    """Compare a lower bound for ``||W||_{p_t -> q_t}`` with the best found
    ``||W||_{q -> q*} ** theta``.

    Both sides come from the heuristic optimiser, so ``anomaly`` marks a
    numerical observation to investigate, never a disproof.
    """
    if mode is None:
        mode = Heuristic(restarts=64)
    if not isinstance(mode, Heuristic):
        raise PreconditionError("riesz_thorin_check runs on heuristic operator norms")
    if W.order != 2:
        raise PreconditionError("riesz_thorin_check needs an order-2 tensor")
    pe, qe = as_exponent(p), as_exponent(q)
    norm = lp_norm(W, pe)
    if norm > 1 + 1e-12:
        raise PreconditionError(f"||W||_p = {norm} exceeds 1")
    pt, qt = interp_exponents(p, q, theta)
    th = float(_frac(theta))
    lhs = operator_norm(W, float(pt), float(qt), mode)
    rhs = operator_norm(W, qe, dual_exponent(qe), mode)
    power = rhs**th
    return RieszThorinReport(float(pt), float(qt), lhs, rhs, power, lhs > power + tol, power - lhs)


# --- non-compactness fixture -----------------------------------------------


def corner_block(i: int, n: int) -> StepTensor:
    """``f_i = i`` on the corner square ``[0, 1/i)^2``, zero elsewhere.

    ``||f_i||_1 = 1/i`` and ``||f_i||_2 = 1``; ``n`` must be a multiple of ``i``.
    """
    if i < 1 or n % i:
        raise PreconditionError(f"resolution {n} must be a multiple of i={i}")
    vals = np.zeros((n, n))
    vals[: n // i, : n // i] = float(i)
    return StepTensor(vals)


def lp_orbit_distance(a: StepTensor, b: StepTensor, p=2) -> float:
    """``min_g ||a - g b||_p`` over all ``n!`` relabelings (order 2, ``n <= 8``)."""
    if not a.same_space(b) or a.order != 2:
        raise PreconditionError("lp_orbit_distance needs order-2 tensors in the same space")
    n = a.resolution
    if n > EXACT_ORBIT_MAX_N:
        raise BudgetExceeded(f"n={n} exceeds {EXACT_ORBIT_MAX_N}")
    p = as_exponent(p)
    invs = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    diff = np.abs(a.values[None] - b.values[invs[:, :, None], invs[:, None, :]]).reshape(len(invs), -1)
    if p == INF:
        return float(diff.max(axis=1).min())
    return float(((diff**p).sum(axis=1) * a.weight).min() ** (1.0 / p))
