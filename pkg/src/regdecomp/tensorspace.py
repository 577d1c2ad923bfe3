"""Step tensors on uniform grids and their measure-aware norms.

An order-``l`` tensor of resolution ``n`` is a function on ``[n]^l``.  Under
the probability convention every cell has weight ``n**-l`` (a step function
on the unit cube), under the counting convention every cell has weight 1
(a finitely supported element of an ``l^p`` space).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import PreconditionError

INF = math.inf


class Measure(str, enum.Enum):
    PROBABILITY = "probability"
    COUNTING = "counting"


def as_exponent(p) -> float:
    """Coerce ``p`` to an exponent in ``[1, inf]``.

    Accepts numbers, ``Fraction`` and the strings ``"inf"``/``"infinity"``.
    Infinity is kept as ``math.inf`` and always dispatched on explicitly.
    """
    if isinstance(p, str):
        s = p.strip().lower()
        if s in ("inf", "infinity", "oo"):
            return INF
        try:
            if "/" in s:
                num, den = s.split("/")
                p = float(num) / float(den)
            else:
                p = float(s)
        except ValueError:
            raise PreconditionError(f"cannot parse exponent {p!r}") from None
    p = float(p)
    if math.isnan(p) or p < 1:
        raise PreconditionError(f"exponent must lie in [1, inf], got {p}")
    return p


def dual_exponent(p) -> float:
    """Hölder conjugate: ``p/(p-1)``, with ``1 <-> inf``."""
    p = as_exponent(p)
    if p == 1:
        return INF
    if p == INF:
        return 1.0
    return p / (p - 1)


@dataclass(frozen=True, eq=False)
class StepTensor:
    values: np.ndarray
    measure: Measure = Measure.PROBABILITY

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim == 0:
            raise PreconditionError("a step tensor needs order >= 1")
        n = vals.shape[0]
        if n < 1 or any(s != n for s in vals.shape):
            raise PreconditionError(f"all axes must share one resolution, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise PreconditionError("step tensor values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "measure", Measure(self.measure))

    @classmethod
    def from_flat(cls, order: int, resolution: int, values, measure=Measure.PROBABILITY):
        flat = np.asarray(values, dtype=np.float64).ravel()
        if order < 1 or resolution < 1:
            raise PreconditionError("order and resolution must be positive")
        if flat.size != resolution**order:
            raise PreconditionError(
                f"expected {resolution}**{order} = {resolution**order} values, got {flat.size}"
            )
        return cls(flat.reshape((resolution,) * order), measure)

    @property
    def order(self) -> int:
        return self.values.ndim

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def weight(self) -> float:
        """Mass of a single grid cell."""
        if self.measure is Measure.PROBABILITY:
            return float(self.resolution) ** -self.order
        return 1.0

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def with_values(self, values) -> "StepTensor":
        return StepTensor(np.asarray(values, dtype=np.float64).reshape(self.shape), self.measure)

    def same_space(self, other: "StepTensor") -> bool:
        return self.shape == other.shape and self.measure is other.measure

    def __add__(self, other):
        _check_same(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_same(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar):
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def __eq__(self, other):
        if not isinstance(other, StepTensor):
            return NotImplemented
        return self.same_space(other) and bool(np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.shape, self.measure, self.values.tobytes()))

    def __repr__(self):
        return f"StepTensor(order={self.order}, resolution={self.resolution}, measure={self.measure.value})"


def _check_same(a: StepTensor, b: StepTensor):
    if not a.same_space(b):
        raise PreconditionError(
            f"tensors live in different spaces: {a.shape}/{a.measure.value} vs {b.shape}/{b.measure.value}"
        )


def zeros(order: int, resolution: int, measure=Measure.PROBABILITY) -> StepTensor:
    return StepTensor(np.zeros((resolution,) * order), measure)


def ones(order: int, resolution: int, measure=Measure.PROBABILITY) -> StepTensor:
    return StepTensor(np.ones((resolution,) * order), measure)


def weighted_lp(values: np.ndarray, p: float, weight: float) -> float:
    """``(sum weight*|v|^p)^(1/p)``, or ``max|v|`` for ``p = inf``.

    Values are rescaled by their maximum first so large exponents do not
    overflow.
    """
    a = np.abs(np.asarray(values, dtype=np.float64)).ravel()
    if a.size == 0:
        return 0.0
    m = float(a.max())
    if m == 0.0:
        return 0.0
    if p == INF:
        return m
    if p == 1:
        return float(weight * a.sum())
    if p == 2:
        return float(math.sqrt(weight * np.dot(a, a)))
    return m * float(weight * np.sum((a / m) ** p)) ** (1.0 / p)


def lp_norm(t: StepTensor, p) -> float:
    return weighted_lp(t.values, as_exponent(p), t.weight)


def inner_product(a: StepTensor, b: StepTensor) -> float:
    _check_same(a, b)
    return float(a.weight * np.dot(a.flat, b.flat))


def rank1(factors: Sequence, measure=Measure.PROBABILITY) -> StepTensor:
    """Outer product ``f_1 ⊗ ... ⊗ f_l`` of equal-length vectors."""
    vecs = [np.asarray(f, dtype=np.float64).ravel() for f in factors]
    if not vecs:
        raise PreconditionError("rank1 needs at least one factor")
    n = vecs[0].size
    if any(v.size != n for v in vecs):
        raise PreconditionError(f"factor lengths differ: {[v.size for v in vecs]}")
    out = vecs[0]
    for v in vecs[1:]:
        out = np.multiply.outer(out, v)
    return StepTensor(out, measure)


def random_ball_sample(order: int, resolution: int, p, measure=Measure.PROBABILITY, seed: int = 0) -> StepTensor:
    """Gaussian tensor pushed into the closed unit ball of ``L^p``."""
    p = as_exponent(p)
    rng = np.random.default_rng(seed)
    t = StepTensor(rng.standard_normal((resolution,) * order), measure)
    norm = lp_norm(t, p)
    return t.with_values(t.values / max(1.0, norm))
