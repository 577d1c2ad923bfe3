"""Greedy weak-regularity decompositions and the approximation pipelines
built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .errors import PreconditionError
from .seminorms import (
    CUT,
    EXACT,
    RECTANGLE,
    Exact,
    Mode,
    SeminormFamily,
    best_response,
)
from .tensorspace import Measure, StepTensor, as_exponent, inner_product, lp_norm, zeros
from .truncation import threshold_split

NORM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class GreedyDecomposition:
    terms: List[Tuple[float, StepTensor]]
    residual: StepTensor
    k_requested: int
    certified: bool
    residual_r_bound: float
    residual_norms: List[float] = field(default_factory=list)

    @property
    def approximant(self) -> StepTensor:
        out = zeros(self.residual.order, self.residual.resolution, self.residual.measure)
        for coef, w in self.terms:
            out = out + coef * w
        return out


def greedy_decompose(a: StepTensor, family: SeminormFamily, k: int, mode: Mode = EXACT) -> GreedyDecomposition:
    """Peel off family members while the oracle finds one correlating more
    than ``1/sqrt(k)`` with the residual.

    Each accepted step ``a <- a - <a,r> r`` lowers ``||a||_2**2`` by more than
    ``1/k``, so at most ``k`` steps are taken; with an exact oracle the
    final residual has seminorm at most ``1/sqrt(k)``.
    """
    if a.measure is not Measure.PROBABILITY:
        raise PreconditionError("greedy decomposition needs the probability measure")
    if k < 1:
        raise PreconditionError("k must be a positive integer")
    if family.factor_type == "holder" and family.q < 2:
        raise PreconditionError("family members must lie in the L2 unit ball (need q >= 2)")
    family.check_tensor(a)
    norm = lp_norm(a, 2)
    if norm > 1 + NORM_TOL:
        raise PreconditionError(f"||a||_2 = {norm} exceeds 1")
    threshold = 1.0 / math.sqrt(k)
    exact = isinstance(mode, Exact)
    resid = a
    terms = []
    norms = [norm]
    while True:
        res = best_response(family, resid, mode)
        if not res.value > threshold or len(terms) >= k:
            break
        coef = inner_product(resid, res.witness)
        resid = resid - coef * res.witness
        terms.append((coef, res.witness))
        norms.append(lp_norm(resid, 2))
    return GreedyDecomposition(
        terms=terms,
        residual=resid,
        k_requested=k,
        certified=exact and res.exact and res.value <= threshold,
        residual_r_bound=res.value,
        residual_norms=norms,
    )


@dataclass(frozen=True, eq=False)
class PipelineApprox:
    bounded_part: StepTensor
    approximant: StepTensor
    scale_c: float
    terms: List[Tuple[float, StepTensor]]
    error_bound: float
    measured_error: float
    certified: bool
    k: int


def weak_banach_approx(w: StepTensor, p, family: SeminormFamily, eps: float, mode: Mode = EXACT) -> PipelineApprox:
    """Approximate ``w`` in the unit ball of ``L^p`` by ``c * sum(alpha_i x_i)``
    with ``|alpha_i| <= 1`` and ``x_i`` family members.

    ``w`` is cut at height ``c`` (its ``L^1`` tail is at most ``eps``); the
    bounded part divided by ``c`` sits in the ``L^2`` unit ball and is
    decomposed greedily with ``k = ceil((c/eps)**2)``.  Both halves cost at
    most ``eps`` in the seminorm, hence ``error_bound = 2*eps``.
    """
    p = as_exponent(p)
    if not p > 1:
        raise PreconditionError("the pipeline needs p > 1")
    if family.kind not in (CUT, RECTANGLE):
        raise PreconditionError("the pipeline supports the cut and rectangle families")
    if not eps > 0:
        raise PreconditionError("epsilon must be positive")
    family.check_tensor(w)
    split = threshold_split(w, p, 1, eps)
    c = split.threshold_K
    k = max(1, math.ceil((c / eps) ** 2))
    scaled = split.bounded * (1.0 / c)
    dec = greedy_decompose(scaled, family, k, mode)
    terms = [(coef, x) for coef, x in dec.terms]
    approx = dec.approximant * c
    measured = best_response(family, w - approx, mode).value
    return PipelineApprox(
        bounded_part=split.bounded,
        approximant=approx,
        scale_c=c,
        terms=terms,
        error_bound=2 * eps,
        measured_error=measured,
        certified=dec.certified,
        k=k,
    )


def _validate_partition(parts: Sequence[Sequence[int]], n: int) -> np.ndarray:
    label = np.full(n, -1)
    for b, block in enumerate(parts):
        if len(block) == 0:
            raise PreconditionError("partition blocks must be nonempty")
        for i in block:
            i = int(i)
            if not 0 <= i < n:
                raise PreconditionError(f"index {i} outside [0, {n})")
            if label[i] != -1:
                raise PreconditionError(f"index {i} appears in two blocks")
            label[i] = b
    if (label < 0).any():
        raise PreconditionError(f"partition misses indices {np.flatnonzero(label < 0).tolist()}")
    return label


def averaging_matrix(parts: Sequence[Sequence[int]], n: int) -> np.ndarray:
    label = _validate_partition(parts, n)
    same = label[:, None] == label[None, :]
    sizes = np.bincount(label)
    return same / sizes[label][:, None]


def partition_average(w: StepTensor, parts: Sequence[Sequence[int]]) -> StepTensor:
    """Conditional expectation onto the product partition: every cell is
    replaced by the mean over its block product."""
    E = averaging_matrix(parts, w.resolution)
    out = w.values
    for ax in range(w.order):
        out = np.moveaxis(np.tensordot(E, out, axes=([1], [ax])), 0, ax)
    return w.with_values(out)


def refine_partition(parts, vectors) -> List[List[int]]:
    """Common refinement of ``parts`` with the level sets of each vector."""
    n = sum(len(b) for b in parts)
    keys = [[] for _ in range(n)]
    for b, block in enumerate(parts):
        for i in block:
            keys[i].append(b)
    for v in vectors:
        for i in range(n):
            keys[i].append(float(v[i]))
    groups = {}
    for i in range(n):
        groups.setdefault(tuple(keys[i]), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


@dataclass(frozen=True, eq=False)
class StrongDecomposition:
    w_prime: StepTensor
    y: StepTensor
    m: int
    partition: List[List[int]]
    r_error: float
    l2_error: float
    rounds: int
    k: int
    certified: bool


def strong_decompose(
    w: StepTensor,
    family: SeminormFamily,
    eps: float,
    h: Callable[[float, int], float],
    mode: Mode = EXACT,
    max_rounds: int = 10_000,
) -> StrongDecomposition:
    """Find ``w'`` and an ``m``-block step function ``y`` with
    ``||w - w'||_R <= h(eps, m)`` and ``||w' - y||_2 <= eps``.

    ``y`` averages ``w`` over a partition ``P`` of ``[n]``; the candidate
    ``w'`` averages ``w`` over the refinement of ``P`` by the level sets of a
    greedy decomposition's witnesses.  If ``w'`` is far from ``y`` in ``L^2``
    the partition advances (the energy ``||y||_2**2`` grows by more than
    ``eps**2``, which can happen fewer than ``1/eps**2`` times); if ``w'`` is
    not ``R``-close enough to ``w`` the greedy ``k`` doubles.
    """
    if w.order != 2:
        raise PreconditionError("strong_decompose works on order-2 tensors")
    if not eps > 0:
        raise PreconditionError("epsilon must be positive")
    family.check_tensor(w)
    norm = lp_norm(w, 2)
    if norm > 1 + NORM_TOL:
        raise PreconditionError(f"||w||_2 = {norm} exceeds 1")
    n = w.resolution
    exact = isinstance(mode, Exact)
    parts = [list(range(n))]
    y = partition_average(w, parts)
    k = 4
    for rounds in range(1, max_rounds + 1):
        m = len(parts)
        target = h(eps, m)
        if not 0 < target < 1:
            raise PreconditionError(f"h(eps, m) must lie in (0, 1), got {target}")
        dec = greedy_decompose(w, family, k, mode)
        vectors = [f for _, x in dec.terms for f in _witness_factors(x)]
        finer = refine_partition(parts, vectors)
        w_prime = partition_average(w, finer)
        r_err = best_response(family, w - w_prime, mode)
        l2_err = lp_norm(w_prime - y, 2)
        if r_err.value <= target and l2_err <= eps:
            return StrongDecomposition(w_prime, y, m, parts, r_err.value, l2_err, rounds, k,
                                       exact and r_err.exact)
        if l2_err > eps:
            parts, y = finer, w_prime
        if r_err.value > target:
            k *= 2
    raise RuntimeError(f"strong_decompose did not settle within {max_rounds} rounds")


def _witness_factors(x: StepTensor):
    """Row and column profiles of a rank-one order-2 witness."""
    v = x.values
    i, j = np.unravel_index(int(np.argmax(np.abs(v))), v.shape)
    return [v[:, j], v[i, :]]
