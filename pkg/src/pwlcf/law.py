"""Min-max piecewise-linear speed-spacing laws.

A law has the two-level form ``V(y) = max(lower_1(y), ..., lower_p(y), min(upper_1(y), ..., upper_q(y)))``
where every piece is affine.  Velocities are in meters per time step
(one step is 0.5 s) and spacings in meters.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import (
    AboveFreeSpeedError,
    BelowMinimumError,
    InputError,
    NegativeSpacingWarning,
    ParseError,
)

__all__ = [
    "AffineSegment",
    "BehaviorLaw",
    "SegmentRef",
    "evaluate",
    "inverse_spacing",
    "solve_spacing",
    "check_stability_condition",
    "active_segment",
    "breakpoints",
    "read_law",
    "write_law",
    "six_segment_law",
    "fitted_four_segment_law",
]


@dataclass(frozen=True)
class AffineSegment:
    alpha: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError(f"segment coefficients must be finite: {self}")

    def __call__(self, y):
        return self.alpha * y + self.beta


class SegmentRef(NamedTuple):
    """Names one piece of a law: ``group`` is ``"lower"`` or ``"upper"``."""

    group: str
    index: int


@dataclass(frozen=True)
class BehaviorLaw:
    lower: tuple[AffineSegment, ...]
    upper: tuple[AffineSegment, ...]
    _arrays: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lower = tuple(_as_segment(s) for s in self.lower)
        upper = tuple(_as_segment(s) for s in self.upper)
        if not lower or not upper:
            raise ValueError("a behavior law needs at least one lower and one upper segment")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        arrays = tuple(
            np.array(vals, dtype=np.float64)
            for vals in (
                [s.alpha for s in lower],
                [s.beta for s in lower],
                [s.alpha for s in upper],
                [s.beta for s in upper],
            )
        )
        for a in arrays:
            a.flags.writeable = False
        object.__setattr__(self, "_arrays", arrays)

    @classmethod
    def from_pairs(cls, lower: Iterable[Sequence[float]], upper: Iterable[Sequence[float]]):
        return cls(tuple(AffineSegment(a, b) for a, b in lower), tuple(AffineSegment(a, b) for a, b in upper))

    @property
    def arrays(self):
        """``(lower_alpha, lower_beta, upper_alpha, upper_beta)`` as read-only float64 arrays."""
        return self._arrays

    @property
    def segments(self) -> list[tuple[SegmentRef, AffineSegment]]:
        out = [(SegmentRef("lower", i), s) for i, s in enumerate(self.lower)]
        out += [(SegmentRef("upper", i), s) for i, s in enumerate(self.upper)]
        return out

    def segment(self, ref: SegmentRef) -> AffineSegment:
        return getattr(self, ref.group)[ref.index]

    def __call__(self, y):
        return evaluate(self, y)


def _as_segment(s) -> AffineSegment:
    if isinstance(s, AffineSegment):
        return s
    a, b = s
    return AffineSegment(a, b)


def evaluate(law: BehaviorLaw, y, warn: bool = True):
    """Evaluate the law at spacing ``y`` (scalar or array).

    Negative spacings are evaluated like any other value but trigger a
    :class:`NegativeSpacingWarning` unless ``warn`` is false.
    """
    if np.ndim(y) == 0:
        y = float(y)
        if warn and y < 0:
            warnings.warn(f"law evaluated at negative spacing {y!r}", NegativeSpacingWarning, stacklevel=2)
        hi = max(s.alpha * y + s.beta for s in law.lower)
        lo = min(s.alpha * y + s.beta for s in law.upper)
        return max(hi, lo)

    y = np.asarray(y, dtype=np.float64)
    if warn and np.any(y < 0):
        warnings.warn("law evaluated at negative spacing", NegativeSpacingWarning, stacklevel=2)
    la, lb, ua, ub = law.arrays
    shape = (-1,) + (1,) * y.ndim
    hi = (la.reshape(shape) * y + lb.reshape(shape)).max(axis=0)
    lo = (ua.reshape(shape) * y + ub.reshape(shape)).min(axis=0)
    return np.maximum(hi, lo)


def active_segment(law: BehaviorLaw, y: float) -> SegmentRef:
    """Return the piece whose value equals ``evaluate(law, y)``.

    Ties go to the first lower piece, then to the first upper piece.
    """
    y = float(y)
    hi_vals = [s(y) for s in law.lower]
    lo_vals = [s(y) for s in law.upper]
    hi = max(hi_vals)
    lo = min(lo_vals)
    if hi >= lo:
        return SegmentRef("lower", hi_vals.index(hi))
    return SegmentRef("upper", lo_vals.index(lo))


def breakpoints(law: BehaviorLaw) -> list[float]:
    """Sorted points in ``[0, inf)`` between which the law is affine.

    Every kink of the law is an intersection of two of its lines, so the
    candidate set is 0 plus all positive pairwise intersections.
    """
    segs = [s for _, s in law.segments]
    pts = {0.0}
    for i, s in enumerate(segs):
        for t in segs[i + 1 :]:
            if s.alpha != t.alpha:
                y = (t.beta - s.beta) / (s.alpha - t.alpha)
                if y > 0 and math.isfinite(y):
                    pts.add(y)
    return sorted(pts)


def _pieces(law: BehaviorLaw):
    """Yield ``(a, b, segment)`` with ``b = inf`` on the last piece."""
    pts = breakpoints(law)
    ends = pts[1:] + [math.inf]
    for a, b in zip(pts, ends):
        mid = a + 1.0 if math.isinf(b) else 0.5 * (a + b)
        yield a, b, law.segment(active_segment(law, mid))


def supremum(law: BehaviorLaw) -> float:
    """Least upper bound of the law on ``[0, inf)``."""
    pieces = list(_pieces(law))
    _, _, last = pieces[-1]
    if last.alpha > 0:
        return math.inf
    return max(evaluate(law, a) for a, _, _ in pieces)


def solve_spacing(law: BehaviorLaw, v: float) -> tuple[float, bool]:
    """Smallest ``y >= 0`` with ``evaluate(law, y) == v``, plus a non-uniqueness flag.

    The flag is set when the law is flat at ``v`` just to the right of the
    returned spacing, so every spacing on that flat stretch solves too.
    """
    v = float(v)
    v0 = evaluate(law, 0.0)
    if v < v0:
        raise BelowMinimumError(f"velocity {v} is below the law's value {v0} at zero spacing")
    sup = supremum(law)
    if v >= sup:
        raise AboveFreeSpeedError(f"velocity {v} is not below the free-flow value {sup}")

    pieces = list(_pieces(law))
    for k, (a, b, seg) in enumerate(pieces):
        if seg.alpha == 0.0:
            if seg.beta == v:
                return a, True
            continue
        y = (v - seg.beta) / seg.alpha
        # the crossing computed from the active line may sit a few ulps outside [a, b]
        slack = 1e-12 * max(1.0, abs(a), abs(b) if math.isfinite(b) else 0.0)
        if a - slack <= y <= b + slack and seg.alpha > 0:
            y = max(y, a)
            flat_next = (
                k + 1 < len(pieces)
                and abs(y - b) <= slack
                and pieces[k + 1][2].alpha == 0.0
                and pieces[k + 1][2].beta == v
            )
            return y, flat_next
    raise AboveFreeSpeedError(f"velocity {v} is never reached by the law")


def inverse_spacing(law: BehaviorLaw, v: float) -> float:
    """Stationary spacing for velocity ``v`` (the smallest one if several exist)."""
    return solve_spacing(law, v)[0]


def check_stability_condition(law: BehaviorLaw) -> tuple[bool, list[tuple[SegmentRef, AffineSegment]]]:
    """Check that every slope lies in ``[0, 1]``; return the flag and the offending pieces."""
    bad = [(ref, s) for ref, s in law.segments if not (0.0 <= s.alpha <= 1.0)]
    return not bad, bad


def read_law(path) -> BehaviorLaw:
    """Read a law from a ``group,alpha,beta`` CSV file."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot open law file {path}: {exc}") from exc
    lower, upper = [], []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["group", "alpha", "beta"]:
            raise ParseError(f"{path}: expected header 'group,alpha,beta'", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ParseError(f"{path}: expected 3 fields, got {len(row)}", line=lineno)
            group = row[0].strip()
            try:
                seg = AffineSegment(float(row[1]), float(row[2]))
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from exc
            if group == "lower":
                lower.append(seg)
            elif group == "upper":
                upper.append(seg)
            else:
                raise ParseError(f"{path}: unknown group {group!r}", line=lineno)
    try:
        return BehaviorLaw(tuple(lower), tuple(upper))
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_law(law: BehaviorLaw, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["group", "alpha", "beta"])
        for ref, s in law.segments:
            w.writerow([ref.group, repr(s.alpha), repr(s.beta)])


def six_segment_law() -> BehaviorLaw:
    """Six-piece law ``max{0, min{...}}`` approximating a measured speed-spacing curve."""
    return BehaviorLaw.from_pairs(
        lower=[(0.0, 0.0)],
        upper=[(0.54, -8.1), (0.32, -1.47), (0.13, 6.11), (0.34, 10.6), (0.0, 14.0)],
    )


def fitted_four_segment_law() -> BehaviorLaw:
    """Four-piece law fitted on US-101 data with two leaders and discount 1.5."""
    return BehaviorLaw.from_pairs(
        lower=[(0.0, 0.0)],
        upper=[(0.38, -1.90), (0.11, 2.95), (0.0, 10.0)],
    )
