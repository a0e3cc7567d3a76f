"""Trajectory datasets: loading, resampling to the model step, CSV exports.

A :class:`Dataset` is a long table with one row per (vehicle, time step),
sorted by vehicle then step.  Leader links point to the vehicle directly
ahead in the same lane; a link is kept only when the leader is observed at
the same step and is strictly ahead.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .dynamics import DT_SECONDS, Trajectory
from .errors import InputError, MissingColumnError, NonMonotoneTimeError, ParseError

FEET = 0.3048

# NGSIM trajectory column names (matched case-insensitively)
NGSIM_COLUMNS = {
    "vehicle_id": "vehicle_id",
    "frame": "frame_id",
    "x": "local_y",
    "speed": "v_vel",
    "lane": "lane_id",
    "leader": "preceding",
}
NGSIM_FRAME_SECONDS = 0.1

_TIME_TOL = 1e-6


@dataclass
class Dataset:
    vehicle_ids: np.ndarray  # (V,) external ids
    veh: np.ndarray          # (N,) index into vehicle_ids
    k: np.ndarray            # (N,) step index; time = t0 + k * dt_seconds
    x: np.ndarray            # (N,) position along the lane
    leader: np.ndarray       # (N,) vehicle index of the car ahead or -1
    dt_seconds: float
    t0: float = 0.0
    units: str = "m"
    speed: np.ndarray | None = None  # (N,) units per second
    lane: np.ndarray | None = None
    dropped: dict = field(default_factory=dict)

    def __post_init__(self):
        order = np.lexsort((self.k, self.veh))
        if not np.array_equal(order, np.arange(order.shape[0])):
            for name in ("veh", "k", "x", "leader", "speed", "lane"):
                arr = getattr(self, name)
                if arr is not None:
                    setattr(self, name, np.asarray(arr)[order])
        self._kmax = int(self.k.max()) + 2 if self.k.size else 1
        self._keys = self.veh.astype(np.int64) * self._kmax + self.k.astype(np.int64)

    def __len__(self):
        return int(self.veh.shape[0])

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.k * self.dt_seconds

    @property
    def model_ready(self) -> bool:
        """Meters and 0.5 s steps, as the model expects."""
        return self.units == "m" and abs(self.dt_seconds - DT_SECONDS) < 1e-12

    def row_of(self, veh, k) -> np.ndarray:
        """Row index of ``(veh, k)`` pairs, ``-1`` where absent."""
        veh = np.asarray(veh, dtype=np.int64)
        k = np.asarray(k, dtype=np.int64)
        ok = (veh >= 0) & (k >= 0) & (k < self._kmax)
        key = np.where(ok, veh * self._kmax + k, -1)
        pos = np.searchsorted(self._keys, key)
        pos = np.minimum(pos, max(len(self) - 1, 0))
        found = ok & (len(self) > 0)
        if len(self):
            found &= self._keys[pos] == key
        return np.where(found, pos, -1)

    def leader_chain(self, vehicle_id, step: int, depth: int) -> list:
        """External ids of up to ``depth`` leaders of ``vehicle_id`` at ``step``."""
        idx = np.flatnonzero(self.vehicle_ids == vehicle_id)
        if not idx.size:
            raise KeyError(vehicle_id)
        chain = []
        row = int(self.row_of(idx[0], step))
        while row >= 0 and len(chain) < depth:
            lv = int(self.leader[row])
            if lv < 0:
                break
            chain.append(self.vehicle_ids[lv].item())
            row = int(self.row_of(lv, step))
        return chain


def _sanitize_leaders(veh, k, x, leader) -> tuple[np.ndarray, int]:
    """Drop links whose leader is missing at that step or not strictly ahead."""
    n = veh.shape[0]
    if n == 0:
        return leader, 0
    kmax = int(k.max()) + 2
    keys = veh.astype(np.int64) * kmax + k
    order = np.argsort(keys, kind="stable")
    skeys = keys[order]
    want = np.where(leader >= 0, leader.astype(np.int64) * kmax + k, -1)
    pos = np.minimum(np.searchsorted(skeys, want), n - 1)
    hit = (leader >= 0) & (skeys[pos] == want)
    lrow = order[pos]
    ahead = hit & (x[lrow] > x)
    broken = int(np.count_nonzero((leader >= 0) & ~ahead))
    return np.where(ahead, leader, -1), broken


def _leaders_by_position(veh, k, x, lane) -> np.ndarray:
    """Car directly ahead within the same lane and step."""
    lane = np.zeros_like(veh) if lane is None else lane
    order = np.lexsort((-x, lane, k))
    leader = np.full(veh.shape[0], -1, dtype=np.int64)
    same = (k[order][1:] == k[order][:-1]) & (lane[order][1:] == lane[order][:-1])
    follower = order[1:][same]
    leader[follower] = veh[order[:-1][same]]
    return leader


def _grid(t: np.ndarray, dt: float | None):
    uniq = np.unique(t)
    t0 = float(uniq[0]) if uniq.size else 0.0
    if dt is None:
        diffs = np.diff(uniq)
        dt = float(diffs.min()) if diffs.size else DT_SECONDS
    steps = (t - t0) / dt
    k = np.rint(steps).astype(np.int64)
    off = np.abs(steps - k) > _TIME_TOL
    if np.any(off):
        bad = int(np.argmax(off))
        raise ParseError(f"time {t[bad]!r} is not on a regular grid of step {dt}", line=bad + 2)
    return t0, dt, k


def _build(ids, t, x, speed, lane, leader_ids, dt, units, dropped=None) -> Dataset:
    vehicle_ids, veh = np.unique(ids, return_inverse=True)
    veh = veh.astype(np.int64)
    t0, dt, k = _grid(t, dt)
    keys = veh * (int(k.max()) + 2 if k.size else 1) + k
    if np.unique(keys).shape[0] != keys.shape[0]:
        raise NonMonotoneTimeError("a vehicle has several records at the same time")
    dropped = dict(dropped or {})
    if leader_ids is not None:
        known = np.isin(leader_ids, vehicle_ids) & ~pd.isna(leader_ids)
        lidx = np.full(veh.shape[0], -1, dtype=np.int64)
        lidx[known] = np.searchsorted(vehicle_ids, leader_ids[known])
        dropped["unknown_leader"] = int(np.count_nonzero(~known & ~pd.isna(leader_ids)))
    else:
        lidx = _leaders_by_position(veh, k, x, lane)
    lidx, broken = _sanitize_leaders(veh, k, x, lidx)
    dropped["broken_leader_chain"] = broken
    return Dataset(
        vehicle_ids=vehicle_ids, veh=veh, k=k, x=np.asarray(x, dtype=np.float64), leader=lidx,
        dt_seconds=dt, t0=t0, units=units, speed=speed, lane=lane, dropped=dropped,
    )


def _numeric(df: pd.DataFrame, col: str, path) -> np.ndarray:
    vals = pd.to_numeric(df[col], errors="coerce")
    bad = vals.isna() & df[col].notna() & (df[col].astype(str).str.strip() != "")
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(f"{path}: column {col!r}: cannot parse {df[col].iloc[row]!r}", line=row + 2)
    return vals.to_numpy(dtype=np.float64)


def _read_csv(path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    try:
        df = pd.read_csv(path, dtype=str, skipinitialspace=True)
        if df.shape[1] == 1 and " " in str(df.columns[0]).strip():
            df = pd.read_csv(path, dtype=str, sep=r"\s+")
    except pd.errors.ParserError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    df.columns = [str(c).strip().lower() for c in df.columns]
    return df


def load_trajectories(path, format: str = "internal", dt: float | None = None) -> Dataset:
    """Load ``internal`` (``vehicle_id,t,x[,v,lane,leader_id]``, t in s, x in m) or ``ngsim`` CSV.

    NGSIM positions (``Local_Y``) and speeds are converted from feet to
    meters, and frames are 0.1 s apart.  Without a leader column, leaders are
    found by sorting positions within each lane and step.
    """
    df = _read_csv(path)
    if format in ("internal", "internal-csv"):
        if "vehicle_id" not in df.columns and "car" in df.columns:
            df = df.rename(columns={"car": "vehicle_id"})
        for col in ("vehicle_id", "t", "x"):
            if col not in df.columns:
                raise MissingColumnError(f"{path}: missing column {col!r}")
        ids = _numeric(df, "vehicle_id", path)
        t = _numeric(df, "t", path)
        x = _numeric(df, "x", path)
        for arr, col in ((ids, "vehicle_id"), (t, "t"), (x, "x")):
            if np.isnan(arr).any():
                raise ParseError(f"{path}: empty {col!r}", line=int(np.flatnonzero(np.isnan(arr))[0]) + 2)
        speed = _numeric(df, "v", path) if "v" in df.columns else None
        lane = _numeric(df, "lane", path).astype(np.int64) if "lane" in df.columns else None
        leader = None
        if "leader_id" in df.columns:
            leader = _numeric(df, "leader_id", path)
            leader = np.where(np.isnan(leader) | (leader < 0), np.nan, leader)
        return _build(_as_ids(ids), t, x, speed, lane, _as_ids(leader), dt, "m")

    if format in ("ngsim", "ngsim-csv"):
        cols = NGSIM_COLUMNS
        for key in ("vehicle_id", "frame", "x", "lane"):
            if cols[key] not in df.columns:
                raise MissingColumnError(f"{path}: missing NGSIM column {cols[key]!r}")
        ids = _numeric(df, cols["vehicle_id"], path)
        frame = _numeric(df, cols["frame"], path)
        x = _numeric(df, cols["x"], path) * FEET
        speed = _numeric(df, cols["speed"], path) * FEET if cols["speed"] in df.columns else None
        lane = _numeric(df, cols["lane"], path).astype(np.int64)
        leader = None
        if cols["leader"] in df.columns:
            leader = _numeric(df, cols["leader"], path)
            leader = np.where(leader > 0, leader, np.nan)
        return _build(_as_ids(ids), frame * NGSIM_FRAME_SECONDS, x, speed, lane, _as_ids(leader),
                      NGSIM_FRAME_SECONDS if dt is None else dt, "m")

    raise ValueError(f"unknown trajectory format {format!r}")


def _as_ids(arr):
    """Integral float ids become int64; ``nan`` survives in a float array."""
    if arr is None:
        return None
    if np.isnan(arr).any():
        return arr
    if np.all(arr == np.round(arr)):
        return arr.astype(np.int64)
    return arr


def resample(ds: Dataset, dt: float = DT_SECONDS) -> Dataset:
    """Linearly interpolate every vehicle onto the grid of multiples of ``dt``.

    Each vehicle keeps only grid times inside its observed span.  Leaders
    and lanes are carried from the last source record at or before the
    target time; speeds become forward differences of position.
    """
    if abs(ds.dt_seconds - dt) < 1e-12 and abs(ds.t0 / dt - round(ds.t0 / dt)) < _TIME_TOL:
        return ds
    t = ds.times
    out_veh, out_k, out_x, out_lead, out_lane = [], [], [], [], []
    bounds = np.flatnonzero(np.diff(ds.veh)) + 1
    for rows in np.split(np.arange(len(ds)), bounds):
        if not rows.size:
            continue
        tv = t[rows]
        if np.any(np.diff(tv) <= 0):
            raise NonMonotoneTimeError(f"vehicle {ds.vehicle_ids[ds.veh[rows[0]]]!r}: times not increasing")
        lo = math.ceil(tv[0] / dt - _TIME_TOL)
        hi = math.floor(tv[-1] / dt + _TIME_TOL)
        if hi < lo:
            continue
        kk = np.arange(lo, hi + 1)
        tt = kk * dt
        out_veh.append(np.full(kk.shape[0], ds.veh[rows[0]]))
        out_k.append(kk)
        out_x.append(np.interp(tt, tv, ds.x[rows]))
        src = np.clip(np.searchsorted(tv, tt + _TIME_TOL, side="right") - 1, 0, rows.size - 1)
        out_lead.append(ds.leader[rows][src])
        if ds.lane is not None:
            out_lane.append(ds.lane[rows][src])
    cat = (lambda parts, dtype: np.concatenate(parts) if parts else np.zeros(0, dtype=dtype))
    veh = cat(out_veh, np.int64)
    k = cat(out_k, np.int64)
    x = cat(out_x, np.float64)
    leader, broken = _sanitize_leaders(veh, k, x, cat(out_lead, np.int64))
    lane = cat(out_lane, np.int64) if ds.lane is not None else None
    dropped = dict(ds.dropped)
    dropped["broken_leader_chain"] = dropped.get("broken_leader_chain", 0) + broken
    kmin = int(k.min()) if k.size else 0
    res = Dataset(ds.vehicle_ids, veh, k - kmin, x, leader, dt, t0=kmin * dt, units=ds.units, lane=lane, dropped=dropped)
    res.speed = _forward_speed(res)
    return res


def _forward_speed(ds: Dataset) -> np.ndarray:
    nxt = ds.row_of(ds.veh, ds.k + 1)
    return np.where(nxt >= 0, (ds.x[np.maximum(nxt, 0)] - ds.x) / ds.dt_seconds, np.nan)


def dataset_from_trajectory(traj: Trajectory, jitter: float = 0.0, rng=None) -> Dataset:
    """View a simulated trajectory as a dataset; car ``n`` follows car ``n - 1``.

    ``jitter`` adds Gaussian noise (std in meters) to every position.  On a
    ring the head car's link is dropped because positions are unwrapped.
    """
    cars, cols = traj.positions.shape
    veh = np.repeat(np.arange(cars), cols)
    k = np.tile(np.arange(cols), cars)
    x = traj.positions.reshape(-1).copy()
    if jitter:
        rng = np.random.default_rng(rng)
        x = x + rng.normal(0.0, jitter, size=x.shape)
    leader = np.where(veh > 0, veh - 1, -1)
    leader, broken = _sanitize_leaders(veh, k, x, leader)
    ds = Dataset(np.arange(cars), veh, k, x, leader, traj.dt_seconds, dropped={"broken_leader_chain": broken})
    ds.speed = _forward_speed(ds)
    return ds


# --- exports -----------------------------------------------------------------

def _writer(path):
    fh = Path(path).open("w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def _num(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def export_trajectories(traj: Trajectory, path) -> None:
    """Write ``car,t,x,v`` rows (t in s, x in m, v in m/s; v empty on the last step)."""
    fh, w = _writer(path)
    with fh:
        w.writerow(["car", "t", "x", "v"])
        pos = traj.positions
        dt = traj.dt_seconds
        for n in range(pos.shape[0]):
            for t in range(pos.shape[1]):
                v = (pos[n, t + 1] - pos[n, t]) / dt if t + 1 < pos.shape[1] else None
                w.writerow([n, _num(t * dt), _num(pos[n, t]), _num(v)])


def write_dataset(ds: Dataset, path) -> None:
    """Write a dataset as internal CSV ``vehicle_id,t,x,leader_id``."""
    fh, w = _writer(path)
    with fh:
        w.writerow(["vehicle_id", "t", "x", "leader_id"])
        t = ds.times
        for i in range(len(ds)):
            lead = ds.leader[i]
            w.writerow([
                _num(ds.vehicle_ids[ds.veh[i]].item()),
                _num(float(t[i])),
                _num(float(ds.x[i])),
                _num(ds.vehicle_ids[lead].item()) if lead >= 0 else "",
            ])


def export_scatter(samples, path) -> None:
    """Write ``y_tilde,v,car,t`` rows (v in m per step, t in s)."""
    fh, w = _writer(path)
    with fh:
        w.writerow(["y_tilde", "v", "car", "t"])
        for s in samples.records():
            w.writerow([_num(s.y_tilde), _num(s.v), _num(s.car), _num(s.t)])


def export_surface(surface, path) -> None:
    """Write ``m,lambda,total_error,segments`` rows of a grid search."""
    fh, w = _writer(path)
    with fh:
        w.writerow(["m", "lambda", "total_error", "segments"])
        for cell in surface:
            w.writerow([cell.m, _num(cell.lam), _num(cell.total_error), cell.segments])


def export_positions(positions, path) -> None:
    """Write ``car,x`` rows (stationary configurations)."""
    fh, w = _writer(path)
    with fh:
        w.writerow(["car", "x"])
        for n, x in enumerate(positions):
            w.writerow([n, _num(float(x))])


def export_trajectories_wide(traj: Trajectory, path) -> None:
    """One row per car: ``car`` then the position at every step (``x0 .. xT``)."""
    fh, w = _writer(path)
    with fh:
        w.writerow(["car"] + [f"x{t}" for t in range(traj.positions.shape[1])])
        for n, row in enumerate(traj.positions):
            w.writerow([n] + [_num(float(x)) for x in row])
