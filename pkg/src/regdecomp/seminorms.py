"""Test families of rank-one functionals, their best-response oracles, the
induced seminorms ``||x||_R = sup_{r in R} |<x, r>|`` and ``p -> q`` operator
norms of kernel matrices.

Exact oracles enumerate every factor but the last, whose optimum is then
available in closed form.  Heuristic oracles run alternating maximisation
from seeded random starts; every value they report is attained by the
returned witness, so it is always a lower bound on the supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import BudgetExceeded, PreconditionError
from .tensorspace import (
    INF,
    Measure,
    StepTensor,
    as_exponent,
    dual_exponent,
    inner_product,
    lp_norm,
    rank1,
    weighted_lp,
)

MAX_ENUMERATION = 2**20
_CHUNK_ELEMENTS = 1 << 22

CUT = "cut"
RECTANGLE = "rectangle"
SIGN = "sign"
HOLDER = "holder"
_KINDS = (CUT, RECTANGLE, SIGN, HOLDER)


@dataclass(frozen=True)
class Exact:
    pass


@dataclass(frozen=True)
class Heuristic:
    restarts: int = 32
    seed: int = 0
    max_iter: int = 200

    def __post_init__(self):
        if self.restarts < 1:
            raise PreconditionError("heuristic mode needs at least one restart")


EXACT = Exact()
Mode = Union[Exact, Heuristic]


@dataclass(frozen=True)
class SeminormFamily:
    """A set ``R`` of rank-one test tensors on ``[n]^order``.

    ``cut`` and ``rectangle`` hold products of indicators (``cut`` is the
    order-2 case), ``sign`` holds products of ±1 vectors and ``holder``
    holds products of vectors in the unit ball of ``L^q``.
    """

    kind: str
    order: int
    resolution: int
    q: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise PreconditionError(f"unknown family {self.kind!r}")
        if self.order < 1 or self.resolution < 1:
            raise PreconditionError("family order and resolution must be positive")
        if self.kind == CUT and self.order != 2:
            raise PreconditionError("the cut family is defined for order 2 only")
        if self.kind == HOLDER:
            if self.q is None:
                raise PreconditionError("the Hölder family needs an exponent q")
            object.__setattr__(self, "q", as_exponent(self.q))
        elif self.q is not None:
            raise PreconditionError(f"family {self.kind} takes no exponent")

    @classmethod
    def cut(cls, resolution: int):
        return cls(CUT, 2, resolution)

    @classmethod
    def rectangle(cls, order: int, resolution: int):
        return cls(RECTANGLE, order, resolution)

    @classmethod
    def sign(cls, order: int, resolution: int):
        return cls(SIGN, order, resolution)

    @classmethod
    def holder(cls, q, order: int, resolution: int):
        return cls(HOLDER, order, resolution, as_exponent(q))

    @classmethod
    def parse(cls, text: str, order: int, resolution: int):
        """Build a family from ``cut``, ``rectangle``, ``sign`` or ``holder:Q``."""
        name, _, arg = text.strip().lower().partition(":")
        if name == HOLDER:
            if not arg:
                raise PreconditionError("holder family needs an exponent, e.g. holder:4")
            return cls.holder(arg, order, resolution)
        if arg:
            raise PreconditionError(f"family {name} takes no exponent")
        return cls(name, order, resolution)

    @property
    def label(self) -> str:
        if self.kind == HOLDER:
            return f"holder:{'inf' if self.q == INF else repr(self.q)}"
        return self.kind

    @property
    def factor_type(self) -> str:
        if self.kind in (CUT, RECTANGLE):
            return "indicator"
        if self.kind == SIGN or self.q == INF:
            return "sign"
        return "holder"

    @property
    def permutation_stable(self) -> bool:
        return True

    def enumeration_size(self) -> int:
        """Number of enumerated candidates for an exact oracle call."""
        if self.factor_type == "holder":
            if self.q == 1:
                return self.resolution**self.order
            return math.inf
        return 2 ** (self.resolution * (self.order - 1))

    def check_tensor(self, a: StepTensor):
        if a.order != self.order or a.resolution != self.resolution:
            raise PreconditionError(
                f"family is for order {self.order}, resolution {self.resolution}; "
                f"tensor has order {a.order}, resolution {a.resolution}"
            )


@dataclass(frozen=True, eq=False)
class OracleResult:
    witness: StepTensor
    value: float
    exact: bool
    factors: tuple = field(default=(), repr=False)


def _axis_weight(a: StepTensor) -> float:
    return 1.0 / a.resolution if a.measure is Measure.PROBABILITY else 1.0


def _subset_matrix(n: int, kind: str) -> np.ndarray:
    """Rows enumerate subsets of ``[n]`` by bitmask; bit ``i`` is element ``i``."""
    bits = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
    if kind == "indicator":
        return bits.astype(np.float64)
    return (1 - 2 * bits).astype(np.float64)


def dual_maximizer(h: np.ndarray, q: float, w: float) -> np.ndarray:
    """Vector ``v`` with weighted ``||v||_q <= 1`` maximising ``w * sum(h*v)``.

    The attained value is the dual norm ``||h||_{q*}``.
    """
    h = np.asarray(h, dtype=np.float64)
    n = h.size
    if q == INF:
        return np.where(h < 0, -1.0, 1.0)
    if q == 1:
        v = np.zeros(n)
        i = int(np.argmax(np.abs(h)))
        v[i] = (1.0 if h[i] >= 0 else -1.0) / w
        return v
    qs = dual_exponent(q)
    norm = weighted_lp(h, qs, w)
    if norm == 0.0:
        return np.full(n, (w * n) ** (-1.0 / q))
    return np.sign(h) * (np.abs(h) / norm) ** (qs - 1)


def _best_factor(factor_type: str, g: np.ndarray, q, w: float) -> np.ndarray:
    if factor_type == "indicator":
        pos = g[g > 0].sum()
        neg = -g[g < 0].sum()
        return (g > 0).astype(np.float64) if pos >= neg else (g < 0).astype(np.float64)
    if factor_type == "sign":
        return np.where(g < 0, -1.0, 1.0)
    return dual_maximizer(g / w, q, w)


def _contract_except(arr: np.ndarray, factors, j: int) -> np.ndarray:
    t = arr
    for ax in reversed(range(arr.ndim)):
        if ax != j:
            t = np.tensordot(t, factors[ax], axes=([ax], [0]))
    return t


def _result(family: SeminormFamily, a: StepTensor, factors, exact: bool) -> OracleResult:
    witness = rank1(factors, a.measure)
    value = abs(inner_product(a, witness))
    return OracleResult(witness, value, exact, tuple(np.asarray(f) for f in factors))


def _exact_enumerate(family: SeminormFamily, a: StepTensor) -> OracleResult:
    n, l = a.resolution, a.order
    ftype = family.factor_type
    if l == 1:
        return _result(family, a, [_best_factor(ftype, a.values, family.q, 1.0)], True)
    V = _subset_matrix(n, ftype)
    m = V.shape[0]
    rest = a.values.reshape(n, -1)
    best_val, best_idx = -1.0, None
    per_first = m ** (l - 2) * n
    chunk = max(1, _CHUNK_ELEMENTS // max(per_first, 1))
    for start in range(0, m, chunk):
        block = V[start:start + chunk] @ rest
        g = block.reshape((-1,) + (n,) * (l - 1))
        for k in range(l - 2):
            g = np.tensordot(g, V, axes=([1 + k], [1]))
            g = np.moveaxis(g, -1, 1 + k)
        g = g.reshape(-1, n)
        if ftype == "indicator":
            vals = np.maximum(np.clip(g, 0, None).sum(axis=1), np.clip(-g, 0, None).sum(axis=1))
        else:
            vals = np.abs(g).sum(axis=1)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_idx = float(vals[i]), start * m ** (l - 2) + i
    masks = np.unravel_index(best_idx, (m,) * (l - 1))
    factors = [V[int(k)] for k in masks]
    g_last = _contract_except(a.values, factors + [None], l - 1)
    factors.append(_best_factor(ftype, g_last, family.q, 1.0))
    return _result(family, a, factors, True)


def _exact_holder_one(family: SeminormFamily, a: StepTensor) -> OracleResult:
    w = _axis_weight(a)
    idx = np.unravel_index(int(np.argmax(np.abs(a.values))), a.shape)
    factors = []
    for j, i in enumerate(idx):
        v = np.zeros(a.resolution)
        v[i] = 1.0 / w
        factors.append(v)
    if a.values[idx] < 0:
        factors[0] = -factors[0]
    return _result(family, a, factors, True)


def _random_factor(rng, factor_type, n, q, w):
    if factor_type == "indicator":
        v = rng.integers(0, 2, n).astype(np.float64)
        if not v.any():
            v[rng.integers(n)] = 1.0
        return v
    if factor_type == "sign":
        return rng.choice([-1.0, 1.0], n)
    v = rng.standard_normal(n)
    return v / weighted_lp(v, q, w)


def _heuristic(family: SeminormFamily, a: StepTensor, mode: Heuristic) -> OracleResult:
    n, l = a.resolution, a.order
    ftype = family.factor_type
    w = _axis_weight(a)
    arr = a.values
    best = None
    for restart in range(mode.restarts):
        rng = np.random.default_rng(mode.seed ^ restart)
        factors = [_random_factor(rng, ftype, n, family.q, w) for _ in range(l)]
        prev = -1.0
        for _ in range(mode.max_iter):
            for j in range(l):
                g = _contract_except(arr, factors, j)
                factors[j] = _best_factor(ftype, g, family.q, w)
            val = abs(float(np.dot(g, factors[l - 1]))) * a.weight
            if val <= prev * (1 + 1e-13) + 1e-300:
                break
            prev = val
        res = _result(family, a, factors, False)
        if best is None or res.value > best.value:
            best = res
    return best


def best_response(family: SeminormFamily, a: StepTensor, mode: Mode = EXACT) -> OracleResult:
    """The family member maximising ``|<a, r>|``.

    Exact mode ties go to the first candidate in enumeration order (factor
    bitmasks in increasing order, positive part before negative part for
    the closed-form last factor).
    """
    family.check_tensor(a)
    if isinstance(mode, Exact):
        size = family.enumeration_size()
        if size == math.inf:
            raise PreconditionError(
                f"no exact oracle for the Hölder family with q={family.q}; use heuristic mode"
            )
        if size > MAX_ENUMERATION:
            raise BudgetExceeded(
                f"exact oracle needs {size} candidates, budget is {MAX_ENUMERATION}"
            )
        if family.factor_type == "holder":
            return _exact_holder_one(family, a)
        return _exact_enumerate(family, a)
    if not isinstance(mode, Heuristic):
        raise PreconditionError(f"unknown mode {mode!r}")
    return _heuristic(family, a, mode)


def r_seminorm(family: SeminormFamily, a: StepTensor, mode: Mode = EXACT) -> float:
    return best_response(family, a, mode).value


def cut_norm(a: StepTensor, mode: Mode = EXACT) -> float:
    if a.order != 2:
        raise PreconditionError("the cut norm is defined for order-2 tensors")
    return r_seminorm(SeminormFamily.cut(a.resolution), a, mode)


def exact_values_batch(family: SeminormFamily, stack: np.ndarray, weight: float) -> np.ndarray:
    """Exact seminorm values for a stack of order-2 arrays of shape (B, n, n)."""
    if family.order != 2 or family.factor_type == "holder":
        raise PreconditionError("batched exact values cover order-2 cut/rectangle/sign families")
    n = family.resolution
    if family.enumeration_size() > MAX_ENUMERATION:
        raise BudgetExceeded(f"exact oracle needs 2**{n} candidates, budget is {MAX_ENUMERATION}")
    V = _subset_matrix(n, family.factor_type)
    out = np.empty(stack.shape[0])
    chunk = max(1, _CHUNK_ELEMENTS // (V.shape[0] * n))
    for s in range(0, stack.shape[0], chunk):
        g = np.einsum("mi,bij->bmj", V, stack[s:s + chunk])
        if family.factor_type == "indicator":
            vals = np.maximum(np.clip(g, 0, None).sum(axis=2), np.clip(-g, 0, None).sum(axis=2))
        else:
            vals = np.abs(g).sum(axis=2)
        out[s:s + chunk] = vals.max(axis=1)
    return out * weight


def _kernel_apply(W: np.ndarray, f: np.ndarray, w: float) -> np.ndarray:
    return w * (W @ f)


def operator_norm_search(W: StepTensor, p0, q0, mode: Mode = EXACT):
    """Return ``(value, f)`` with ``value = ||W f||_q0`` and ``||f||_p0 = 1``."""
    if W.order != 2:
        raise PreconditionError("operator norms are defined for order-2 tensors")
    p0, q0 = as_exponent(p0), as_exponent(q0)
    w = _axis_weight(W)
    arr = W.values
    if isinstance(mode, Exact):
        if (p0, q0) != (INF, 1.0):
            raise PreconditionError("exact operator norm is available for inf -> 1 only")
        res = best_response(SeminormFamily.sign(2, W.resolution), W, EXACT)
        f = res.factors[1]
        return weighted_lp(_kernel_apply(arr, f, w), 1.0, w), f
    if not isinstance(mode, Heuristic):
        raise PreconditionError(f"unknown mode {mode!r}")
    n = W.resolution
    qs = dual_exponent(q0)
    best_val, best_f = -1.0, None
    for restart in range(mode.restarts):
        rng = np.random.default_rng(mode.seed ^ restart)
        f = rng.standard_normal(n)
        f /= weighted_lp(f, p0, w)
        prev = -1.0
        for _ in range(mode.max_iter):
            h = _kernel_apply(arr, f, w)
            val = weighted_lp(h, q0, w)
            if val <= prev * (1 + 1e-13) + 1e-300:
                break
            prev = val
            g = dual_maximizer(h, qs, w)
            k = _kernel_apply(arr.T, g, w)
            f = dual_maximizer(k, p0, w)
        fn = weighted_lp(f, p0, w)
        val = weighted_lp(_kernel_apply(arr, f, w), q0, w) / fn if fn > 0 else 0.0
        if val > best_val:
            best_val, best_f = val, f / fn if fn > 0 else f
    return best_val, best_f


def operator_norm(W: StepTensor, p0, q0, mode: Mode = EXACT) -> float:
    """``sup ||W f||_q0`` over ``||f||_p0 = 1`` for the kernel ``(Wf)(x) = ∫ W(x,y) f(y)``."""
    return operator_norm_search(W, p0, q0, mode)[0]


def _rank1_factors(x: np.ndarray, tol: float):
    """Factors of ``x`` if it is rank one (within ``tol``), else ``None``."""
    scale = float(np.abs(x).max()) if x.size else 0.0
    if scale == 0.0:
        return [np.zeros(x.shape[0]) for _ in range(x.ndim)]
    idx = np.unravel_index(int(np.argmax(np.abs(x))), x.shape)
    pivot = x[idx]
    factors = []
    for j in range(x.ndim):
        sl = list(idx)
        sl[j] = slice(None)
        factors.append(np.array(x[tuple(sl)], dtype=np.float64))
    recon = factors[0]
    for f in factors[1:]:
        recon = np.multiply.outer(recon, f)
    recon = recon / pivot ** (x.ndim - 1)
    if np.max(np.abs(recon - x)) > tol * max(1.0, scale):
        return None
    return factors


def family_membership(family: SeminormFamily, r: StepTensor, scale: float = 1.0, tol: float = 1e-12) -> bool:
    """Whether ``r / scale`` belongs to the family (within ``tol``)."""
    family.check_tensor(r)
    if scale < 0:
        raise PreconditionError("membership scale must be nonnegative")
    if scale == 0:
        return bool(np.all(r.values == 0)) and family.kind != SIGN
    x = r.values / scale
    if _rank1_factors(x, tol) is None:
        return False
    if family.kind in (CUT, RECTANGLE):
        return bool(np.all((np.abs(x) <= tol) | (np.abs(x - 1) <= tol)))
    if family.kind == SIGN:
        return bool(np.all(np.abs(np.abs(x) - 1) <= tol))
    return lp_norm(StepTensor(x, r.measure), family.q) <= 1 + tol
