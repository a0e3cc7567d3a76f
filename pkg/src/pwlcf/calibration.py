"""Identify the anticipation parameters and the behavior law from trajectories.

For each follower and step the anticipated spacing

    y_tilde = min_{j <= m} (1+lam)^(j-1) * dx_j / j

is paired with the displacement over the next step.  The scatter is cut
into unit-width bins along ``y_tilde`` and fitted by contiguous runs of
least-squares lines, choosing the runs by dynamic programming with a
penalty ``phi`` per line.  The grid search repeats this for every
``(m, lam)`` and keeps the cheapest fit.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from ._backend import kernels
from .dynamics import AnticipationConfig, DiscountMode
from .errors import (
    DomainError,
    EmptyProblemError,
    NonRepresentableShapeError,
    SlopeClampedWarning,
    TooManyBinsError,
)
from .law import AffineSegment, BehaviorLaw, evaluate
from .trajectory_io import Dataset


class SpacingVelocitySample(NamedTuple):
    y_tilde: float
    v: float
    car: object
    t: float


@dataclass
class SampleSet:
    y_tilde: np.ndarray
    v: np.ndarray
    car: np.ndarray   # external vehicle ids
    t: np.ndarray     # seconds
    skipped: dict = field(default_factory=dict)

    def __len__(self):
        return int(self.y_tilde.shape[0])

    def records(self) -> Iterator[SpacingVelocitySample]:
        for y, v, c, t in zip(self.y_tilde, self.v, self.car, self.t):
            yield SpacingVelocitySample(float(y), float(v), c.item() if hasattr(c, "item") else c, float(t))


def _check_units(ds: Dataset):
    if not ds.model_ready:
        raise DomainError(
            f"dataset must be in meters on a 0.5 s grid (units={ds.units!r}, dt={ds.dt_seconds}); resample it first"
        )


@dataclass
class _Rows:
    rows: np.ndarray   # dataset rows kept as samples
    v: np.ndarray      # displacement over the next step
    gaps: np.ndarray   # (depth, n) distance to the j-th leader, nan beyond the chain
    depth: np.ndarray  # number of leaders available per row
    skipped: dict


def _follower_rows(ds: Dataset, m: int, cars=None) -> _Rows:
    """Rows usable as samples, with gaps to up to ``m`` leaders.

    A row is kept when the car is observed at the next step, has at least
    one leader, and keeps the same immediate leader over that step.  Which
    rows are kept does not depend on ``m``.
    """
    _check_units(ds)
    rows = np.arange(len(ds))
    if cars is not None:
        want = np.isin(ds.vehicle_ids[ds.veh], np.asarray(list(cars)))
        rows = rows[want]
    nxt = ds.row_of(ds.veh[rows], ds.k[rows] + 1)
    skipped = {}
    has_next = nxt >= 0
    skipped["missing_velocity"] = int(np.count_nonzero(~has_next))
    rows, nxt = rows[has_next], nxt[has_next]
    lead = ds.leader[rows]
    has_lead = lead >= 0
    skipped["insufficient_leaders"] = int(np.count_nonzero(~has_lead))
    rows, nxt, lead = rows[has_lead], nxt[has_lead], lead[has_lead]
    same = ds.leader[nxt] == lead
    skipped["leader_changed"] = int(np.count_nonzero(~same))
    rows, nxt = rows[same], nxt[same]

    x = ds.x[rows]
    v = ds.x[nxt] - x
    gaps = np.full((m, rows.shape[0]), np.nan)
    depth = np.zeros(rows.shape[0], dtype=np.int64)
    cur = rows
    alive = np.ones(rows.shape[0], dtype=bool)
    for j in range(m):
        lv = np.where(alive, ds.leader[np.maximum(cur, 0)], -1)
        lrow = ds.row_of(lv, ds.k[rows])
        alive = alive & (lv >= 0) & (lrow >= 0)
        gaps[j, alive] = ds.x[lrow[alive]] - x[alive]
        depth[alive] += 1
        cur = np.where(alive, lrow, -1)
    return _Rows(rows, v, gaps, depth, skipped)


def _anticipated(gaps: np.ndarray, depth: np.ndarray, m: int, lam: float) -> np.ndarray:
    disc = AnticipationConfig(m, lam).discounts()
    y = np.full(gaps.shape[1], np.inf)
    for j in range(1, m + 1):
        ok = depth >= j
        term = disc[j - 1] * (gaps[j - 1, ok] / j)
        y[ok] = np.minimum(y[ok], term)
    return y


def compute_samples(ds: Dataset, m: int, lam: float, cars=None) -> SampleSet:
    """Anticipated spacing / next-step displacement pairs for every usable row.

    Rows with fewer than ``m`` leaders use the leaders they have.  Samples
    with a negative anticipated spacing are dropped and counted.
    """
    AnticipationConfig(m, lam)
    fr = _follower_rows(ds, m, cars)
    y = _anticipated(fr.gaps, fr.depth, m, lam)
    keep = y >= 0
    skipped = dict(fr.skipped)
    skipped["negative_spacing"] = int(np.count_nonzero(~keep))
    rows = fr.rows[keep]
    return SampleSet(
        y_tilde=y[keep],
        v=fr.v[keep],
        car=ds.vehicle_ids[ds.veh[rows]],
        t=ds.times[rows],
        skipped=skipped,
    )


def dominance_prune(ds: Dataset, lam: float, m_max: int, cars=None) -> int:
    """Smallest depth beyond which no leader ever attains the minimum.

    Leaders deeper than the returned ``m`` never lower any sample, so
    ``compute_samples`` gives identical output for ``m`` and ``m_max``.
    """
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    fr = _follower_rows(ds, m_max, cars)
    if not fr.rows.size:
        return 1
    disc = AnticipationConfig(m_max, lam).discounts()
    terms = np.full(fr.gaps.shape, np.inf)
    for j in range(1, m_max + 1):
        ok = fr.depth >= j
        terms[j - 1, ok] = disc[j - 1] * (fr.gaps[j - 1, ok] / j)
    # argmin returns the first index attaining the minimum, i.e. the shallowest binding leader
    return max(1, int(np.argmin(terms, axis=0).max()) + 1)


# --- segmentation -------------------------------------------------------------

@dataclass
class SegmentationProblem:
    """Samples binned along the spacing axis.

    ``count, sum_y, sum_v, sum_yy, sum_yv, sum_vv`` are the raw least-squares
    sums per bin; the centered moments next to them feed the cost matrix.
    """

    y: np.ndarray
    v: np.ndarray
    bin_width: float
    phi: float
    y_max: float
    members: list
    count: np.ndarray
    sum_y: np.ndarray
    sum_v: np.ndarray
    sum_yy: np.ndarray
    sum_yv: np.ndarray
    sum_vv: np.ndarray
    mean_y: np.ndarray
    mean_v: np.ndarray
    c_yy: np.ndarray
    c_yv: np.ndarray
    c_vv: np.ndarray

    @property
    def n_bins(self) -> int:
        return int(self.count.shape[0])

    @property
    def nonempty(self) -> np.ndarray:
        return np.flatnonzero(self.count > 0)

    def bin_edges(self) -> np.ndarray:
        return np.arange(self.n_bins + 1) * self.bin_width

    @classmethod
    def from_samples(cls, samples, phi: float | None = None, bin_width: float = 1.0):
        if isinstance(samples, SampleSet):
            y, v = samples.y_tilde, samples.v
        else:
            y, v = samples
        return cls.from_arrays(y, v, phi=phi, bin_width=bin_width)

    @classmethod
    def from_arrays(cls, y, v, phi: float | None = None, bin_width: float = 1.0):
        y = np.asarray(y, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        if y.shape != v.shape or y.ndim != 1:
            raise ValueError("y and v must be 1-d arrays of equal length")
        if not y.size:
            raise EmptyProblemError("no samples to segment")
        if np.any(y < 0) or not np.all(np.isfinite(y)) or not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite with y >= 0")
        if not bin_width > 0:
            raise ValueError("bin_width must be positive")
        n_bins = max(1, math.ceil(float(y.max()) / bin_width))
        y_max = n_bins * bin_width
        idx = np.minimum((y // bin_width).astype(np.int64), n_bins - 1)
        order = np.argsort(idx, kind="stable")
        counts = np.bincount(idx, minlength=n_bins)
        members = np.split(order, np.cumsum(counts)[:-1])
        if phi is None:
            phi = default_phi(y, v)
        cnt = counts.astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            sy = np.bincount(idx, y, n_bins)
            sv = np.bincount(idx, v, n_bins)
            my = np.where(counts > 0, sy / np.maximum(cnt, 1), 0.0)
            mv = np.where(counts > 0, sv / np.maximum(cnt, 1), 0.0)
        dy = y - my[idx]
        dv = v - mv[idx]
        return cls(
            y=y, v=v, bin_width=float(bin_width), phi=float(phi), y_max=float(y_max), members=members,
            count=counts,
            sum_y=sy, sum_v=sv,
            sum_yy=np.bincount(idx, y * y, n_bins),
            sum_yv=np.bincount(idx, y * v, n_bins),
            sum_vv=np.bincount(idx, v * v, n_bins),
            mean_y=my, mean_v=mv,
            c_yy=np.bincount(idx, dy * dy, n_bins),
            c_yv=np.bincount(idx, dy * dv, n_bins),
            c_vv=np.bincount(idx, dv * dv, n_bins),
        )

    def cost_matrix(self) -> np.ndarray:
        """Line-fit error of every run of non-empty bins (indices into ``nonempty``)."""
        ne = self.nonempty
        return kernels.cost_matrix(
            self.count[ne].astype(np.float64), self.mean_y[ne], self.mean_v[ne],
            self.c_yy[ne], self.c_yv[ne], self.c_vv[ne],
        )


DEFAULT_PHI_FRACTION = 0.002


def default_phi(y, v) -> float:
    """Penalty worth a fixed fraction of the error left by one global line.

    Each extra segment must remove at least 0.2% of the single-line SSE.
    This scales with both the sample count and the velocity units, and on
    jittered closed-loop data it sits well inside the band of penalties
    that recover the generating pieces.
    """
    return DEFAULT_PHI_FRACTION * ols(y, v)[2]


@dataclass(frozen=True)
class FitSegment:
    lo: float
    hi: float
    alpha: float
    beta: float
    sse: float
    count: int
    probes: tuple  # midpoints of the occupied bins in [lo, hi)

    def __call__(self, y):
        return self.alpha * y + self.beta


@dataclass
class PiecewiseFit:
    segments: list[FitSegment]
    total_cost: float
    phi: float
    bin_width: float

    @property
    def sse(self) -> float:
        return float(sum(s.sse for s in self.segments))

    def __call__(self, y):
        y = np.asarray(y, dtype=np.float64)
        out = np.full(y.shape, np.nan)
        for s in self.segments:
            mask = (y >= s.lo) & (y < s.hi)
            out[mask] = s(y[mask])
        last = self.segments[-1]
        out[y >= last.hi] = last(y[y >= last.hi])
        return out


def ols(y, v) -> tuple[float, float, float]:
    """Least-squares line ``v = alpha*y + beta``; returns ``(alpha, beta, sse)``.

    A run whose spacings are all equal (one sample included) gets
    ``alpha = 0`` and ``beta = mean(v)``.
    """
    y = np.asarray(y, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    my, mv = y.mean(), v.mean()
    dy, dv = y - my, v - mv
    syy = float(dy @ dy)
    if syy > 0.0:
        alpha = float(dy @ dv) / syy
    else:
        alpha = 0.0
    beta = float(mv - alpha * my)
    r = v - (alpha * y + beta)
    return alpha, beta, float(r @ r)


def _assemble(problem: SegmentationProblem, ends: list[int], cost: np.ndarray) -> PiecewiseFit:
    """Build the fit for runs of non-empty bins ending at ``ends`` (inclusive)."""
    ne = problem.nonempty
    edges = problem.bin_edges()
    starts = [0] + [e + 1 for e in ends[:-1]]
    segments = []
    for run, (i, j) in enumerate(zip(starts, ends)):
        lo = 0.0 if run == 0 else float(edges[ne[i]])
        hi = problem.y_max if j + 1 >= ne.shape[0] else float(edges[ne[j + 1]])
        members = np.concatenate([problem.members[b] for b in ne[i : j + 1]])
        alpha, beta, _ = ols(problem.y[members], problem.v[members])
        probes = tuple(float(edges[b]) + 0.5 * problem.bin_width for b in ne[i : j + 1])
        segments.append(FitSegment(lo, hi, alpha, beta, float(cost[i, j]), int(members.size), probes))
    return PiecewiseFit(segments, _nested_total(cost, starts, ends, problem.phi), problem.phi, problem.bin_width)


def _nested_total(cost, starts, ends, phi) -> float:
    # accumulate from the last run backwards, exactly as the recursion does
    total = 0.0
    for i, j in zip(reversed(starts), reversed(ends)):
        total = (float(cost[i, j]) + phi) + total
    return total


def segment_regress(problem: SegmentationProblem) -> PiecewiseFit:
    """Penalized piecewise-linear fit by dynamic programming over bins.

    Minimizes ``sum(run SSE) + phi * runs`` over all ways of cutting the
    occupied bins into contiguous runs.  Empty bins join the run on their
    left; the first run starts at 0 and the last one ends at ``y_max``.
    """
    if not problem.nonempty.size:
        raise EmptyProblemError("no samples to segment")
    cost = problem.cost_matrix()
    end, _, _ = kernels.partition(cost, problem.phi)
    ends = []
    i = 0
    while i < cost.shape[0]:
        ends.append(int(end[i]))
        i = int(end[i]) + 1
    return _assemble(problem, ends, cost)


def brute_force_segment(problem: SegmentationProblem, max_bins: int = 20) -> PiecewiseFit:
    """Exhaustive search over every cut of the occupied bins (test oracle)."""
    B = problem.nonempty.shape[0]
    if B == 0:
        raise EmptyProblemError("no samples to segment")
    if B > max_bins:
        raise TooManyBinsError(f"{B} occupied bins exceeds the enumeration cap of {max_bins}")
    cost = problem.cost_matrix()
    best_key, best_ends = None, None
    for cuts in itertools.product((False, True), repeat=B - 1):
        ends = [i for i, c in enumerate(cuts) if c] + [B - 1]
        starts = [0] + [e + 1 for e in ends[:-1]]
        key = (_nested_total(cost, starts, ends, problem.phi), len(ends), tuple(-e for e in ends))
        if best_key is None or key < best_key:
            best_key, best_ends = key, ends
    return _assemble(problem, best_ends, cost)


# --- min-max reconstruction ---------------------------------------------------

def fit_min_max(fit: PiecewiseFit, tolerance: float) -> BehaviorLaw:
    """Turn fitted runs into a law ``max{lower, min{upper}}``.

    Leading runs go to the lower group and the rest to the upper group; the
    smallest lower group that reproduces every run at its bin midpoints
    within ``tolerance`` wins, and an empty lower group is tried last.
    Slopes outside ``[0, 1]`` are clamped about the run's center.
    """
    if not fit.segments:
        raise NonRepresentableShapeError("empty fit")
    segs = []
    for s in fit.segments:
        a = min(max(s.alpha, 0.0), 1.0)
        b = s.beta
        if a != s.alpha:
            center = float(np.mean(s.probes)) if s.probes else 0.5 * (s.lo + s.hi)
            b = s.beta + (s.alpha - a) * center
            warnings.warn(f"slope {s.alpha:.4g} on [{s.lo}, {s.hi}) clamped to {a}", SlopeClampedWarning, stacklevel=2)
        segs.append(AffineSegment(a, b))
    if len(segs) == 1:
        return BehaviorLaw((segs[0],), (segs[0],))

    probes = np.array([p for s in fit.segments for p in s.probes])
    target = np.array([s(p) for s in fit.segments for p in s.probes])
    for k in list(range(1, len(segs))) + [0]:
        upper = tuple(segs[k:])
        if k:
            lower = tuple(segs[:k])
        else:
            lower = (AffineSegment(0.0, min(u.beta for u in upper)),)
        law = BehaviorLaw(lower, upper)
        if np.all(np.abs(evaluate(law, probes, warn=False) - target) <= tolerance):
            return law
    raise NonRepresentableShapeError(
        f"no split of the {len(segs)} fitted runs into max{{lower, min{{upper}}}} matches within {tolerance}"
    )


# --- grid search --------------------------------------------------------------

@dataclass(frozen=True)
class GridCell:
    m: int
    lam: float
    total_error: float
    segments: int


@dataclass
class GridResult:
    m: int
    lam: float
    law: BehaviorLaw | None
    fit: PiecewiseFit
    samples: SampleSet
    surface: list[GridCell]
    phi: float


def lambda_grid(lam_min: float, lam_max: float, step: float) -> list[float]:
    if step <= 0 or lam_max < lam_min or lam_min < 0:
        raise ValueError("need 0 <= lam_min <= lam_max and step > 0")
    n = int(math.floor((lam_max - lam_min) / step + 1e-9)) + 1
    return [round(lam_min + i * step, 12) for i in range(n)]


def grid_search(
    ds: Dataset,
    m_range=None,
    lam_range=(0.0, 5.0, 0.1),
    phi: float | None = None,
    bin_width: float = 1.0,
    tolerance: float | None = None,
    cars=None,
    m_max: int = 10,
) -> GridResult:
    """Fit every ``(m, lam)`` on the grid and keep the lowest total cost.

    ``m_range`` defaults to ``1..dominance_prune(ds, 0, m_max)``.  The
    penalty defaults to :func:`default_phi` on the one-leader samples and is
    shared by all cells.  Exact ties go to the smaller ``m``, then the
    smaller ``lam``.  The law is rebuilt at the optimum with
    :func:`fit_min_max`; with ``tolerance=None`` it is four times the fit's
    residual RMS, and ``law`` is ``None`` if no min-max shape matches.
    """
    lams = lambda_grid(*lam_range)
    if m_range is None:
        m_range = range(1, dominance_prune(ds, 0.0, m_max, cars) + 1)
    m_values = sorted(set(int(m) for m in m_range))
    if not m_values or m_values[0] < 1:
        raise ValueError("m_range must hold positive integers")
    ref = compute_samples(ds, 1, 0.0, cars)
    if not len(ref):
        raise EmptyProblemError("no follower samples in the dataset")
    if phi is None:
        phi = SegmentationProblem.from_samples(ref, bin_width=bin_width).phi

    surface = []
    best = None
    for m in m_values:
        for lam in lams:
            samples = ref if m == 1 else compute_samples(ds, m, lam, cars)
            fit = segment_regress(SegmentationProblem.from_samples(samples, phi=phi, bin_width=bin_width))
            surface.append(GridCell(m, lam, fit.total_cost, len(fit.segments)))
            if best is None or fit.total_cost < best[0]:
                best = (fit.total_cost, m, lam, fit, samples)
    _, m, lam, fit, samples = best
    if tolerance is None:
        n = max(len(samples), 1)
        tolerance = 4.0 * math.sqrt(fit.sse / n)
    try:
        law = fit_min_max(fit, tolerance)
    except NonRepresentableShapeError:
        law = None
    return GridResult(m, lam, law, fit, samples, surface, phi)


# --- validation ---------------------------------------------------------------

@dataclass
class ValidationReport:
    rmse: dict          # vehicle id -> one-step position RMSE (m)
    overall: float
    samples: int


def validate(ds: Dataset, law: BehaviorLaw, config: AnticipationConfig, cars=None) -> ValidationReport:
    """One-step-ahead position error of the model on every usable row."""
    fr = _follower_rows(ds, config.m, cars)
    if config.mode is DiscountMode.ON_SPACING:
        pred = evaluate(law, _anticipated(fr.gaps, fr.depth, config.m, config.lam), warn=False)
    else:
        disc = config.discounts()
        pred = np.full(fr.rows.shape[0], np.inf)
        for j in range(1, config.m + 1):
            ok = fr.depth >= j
            pred[ok] = np.minimum(pred[ok], disc[j - 1] * evaluate(law, fr.gaps[j - 1, ok] / j, warn=False))
    err = pred - fr.v
    ids = ds.vehicle_ids[ds.veh[fr.rows]]
    rmse = {}
    for vid in np.unique(ids):
        e = err[ids == vid]
        rmse[vid.item() if hasattr(vid, "item") else vid] = float(np.sqrt(np.mean(e * e)))
    overall = float(np.sqrt(np.mean(err * err))) if err.size else math.nan
    return ValidationReport(rmse, overall, int(err.size))
