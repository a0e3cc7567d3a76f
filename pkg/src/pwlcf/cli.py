"""Command-line front end: ``pwlcf {simulate,stationary,calibrate,validate,gen}``.

Every flag may also come from a JSON file given with ``--config``; keys are
flag names with dashes or underscores.  Flags on the command line win.

Exit codes: 0 success, 2 bad configuration, 3 input/output failure,
4 model-domain error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import grid_search, validate
from .dynamics import (
    AnticipationConfig,
    DiscountMode,
    LeaderProfile,
    Ring,
    Scenario,
    simulate,
    summary_stats,
)
from .errors import DomainError, InputError, PwlcfError
from .law import BehaviorLaw, fitted_four_segment_law, inverse_spacing, read_law, six_segment_law, write_law
from .stationary import open_stationary, ring_stationary, verify_fixed_point
from .trajectory_io import (
    dataset_from_trajectory,
    export_positions,
    export_scatter,
    export_surface,
    export_trajectories,
    export_trajectories_wide,
    load_trajectories,
    resample,
    write_dataset,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DOMAIN = 4

PRESETS = {"six-segment": six_segment_law, "fitted": fitted_four_segment_law}


class ConfigError(ValueError):
    """A flag or config value failed validation; the message names the field."""


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def _int_list(text: str) -> list[int]:
    """``"1,5,10"`` or ``"1-3"`` -> list of ints."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _lam_range(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in str(text).split(":")]
    if len(parts) != 3:
        raise ValueError("expected min:max:step")
    return parts[0], parts[1], parts[2]


# --- parser ------------------------------------------------------------------

def _add_law(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--law", help="law CSV (group,alpha,beta)")
    g.add_argument("--preset", choices=sorted(PRESETS), help="built-in law (default six-segment)")


def _add_anticipation(p):
    p.add_argument("--m", type=int, default=1, help="number of leaders anticipated")
    p.add_argument("--lam", type=float, default=0.0, help="discount parameter")
    p.add_argument("--mode", choices=[m.value for m in DiscountMode], default=DiscountMode.ON_VELOCITY.value)


def _add_scenario(p):
    p.add_argument("--topology", choices=["ring", "open"], default="open")
    p.add_argument("--cars", type=int, default=50)
    p.add_argument("--length", type=float, help="ring length (m)")
    p.add_argument("--leader", default="0:10", help="head-car profile step:speed,... (m/step)")
    p.add_argument("--spacing", type=float, help="initial open-road spacing (default: stationary for the first leader speed)")
    p.add_argument("--horizon", type=int, default=1000, help="steps of 0.5 s")


def _add_data(p):
    p.add_argument("--data", help="trajectory CSV")
    p.add_argument("--format", choices=["internal", "ngsim"], default="internal")
    p.add_argument("--dt", type=float, help="override the sampling period (s)")
    p.add_argument("--cars-subset", help="vehicle ids to use, comma separated")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pwlcf", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the car dynamics and write trajectories")
    _add_law(p)
    _add_anticipation(p)
    _add_scenario(p)
    p.add_argument("--m-sweep", help="comma-separated m values; one trajectory file per m")
    p.add_argument("--out", help="trajectory CSV (with --m-sweep, _m<m> is inserted before the suffix)")
    p.add_argument("--layout", choices=["long", "wide"], default="long")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stationary", help="compute the stationary regime")
    _add_law(p)
    _add_anticipation(p)
    p.add_argument("--topology", choices=["ring", "open"], default="ring")
    p.add_argument("--cars", type=int, default=50)
    p.add_argument("--length", type=float, help="ring length (m)")
    p.add_argument("--v1", type=float, help="head-car speed on an open road (m/step)")
    p.add_argument("--positions-out", help="write the regime positions as car,x CSV")
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("calibrate", help="fit (m, lambda) and the law from trajectories")
    _add_data(p)
    p.add_argument("--m-range", help="m values, e.g. 1-3 or 1,2,5 (default: pruned 1..m-max)")
    p.add_argument("--m-max", type=int, default=10)
    p.add_argument("--lam-range", default="0:5:0.1", help="min:max:step")
    p.add_argument("--phi", type=float, help="per-segment penalty")
    p.add_argument("--bin-width", type=float, default=1.0)
    p.add_argument("--tolerance", type=float, help="min-max reconstruction tolerance (m/step)")
    p.add_argument("--law-out", help="fitted law CSV")
    p.add_argument("--surface-out", help="error surface CSV")
    p.add_argument("--scatter-out", help="(y_tilde, v) samples of the best cell")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="one-step prediction error of a law on trajectories")
    _add_data(p)
    _add_law(p)
    _add_anticipation(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gen", help="write a synthetic trajectory dataset")
    _add_law(p)
    _add_anticipation(p)
    _add_scenario(p)
    p.add_argument("--jitter", type=float, default=0.0, help="position noise std (m)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="dataset CSV (vehicle_id,t,x,leader_id)")
    p.set_defaults(func=cmd_gen)
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices.get(name)
    return None


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    parser = build_parser()
    if known.config:
        try:
            cfg = json.loads(Path(known.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise InputError(f"cannot read config {known.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {known.config}: invalid JSON ({exc})") from exc
        if not isinstance(cfg, dict):
            raise ConfigError(f"config {known.config}: expected a JSON object")
        cmd = cfg.pop("command", None)
        if not any(a in ("simulate", "stationary", "calibrate", "validate", "gen") for a in rest) and cmd:
            rest = [cmd] + rest
        name = next((a for a in rest if not a.startswith("-")), None)
        sp = _subparser(parser, name)
        if sp is None:
            raise ConfigError("config: no subcommand given")
        dests = {a.dest for a in sp._actions}
        defaults = {}
        for key, value in cfg.items():
            dest = key.replace("-", "_")
            if dest not in dests or dest == "help":
                raise ConfigError(f"config: unknown field {key!r} for {name}")
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            defaults[dest] = value
        sp.set_defaults(**defaults)
    return parser.parse_args(rest)


# --- validation helpers --------------------------------------------------------

def _law(args) -> BehaviorLaw:
    if getattr(args, "law", None):
        return read_law(args.law)
    return PRESETS[getattr(args, "preset", None) or "six-segment"]()


def _anticipation(args, m=None) -> AnticipationConfig:
    m = args.m if m is None else m
    if not isinstance(m, int) or m < 1:
        raise ConfigError(f"m: must be a positive integer, got {m!r}")
    lam = float(args.lam)
    if not (math.isfinite(lam) and lam >= 0):
        raise ConfigError(f"lam: must be finite and >= 0, got {args.lam!r}")
    return AnticipationConfig(m, lam, DiscountMode(args.mode))


def _positive(name, value, integer=False):
    if value is None:
        raise ConfigError(f"{name}: required")
    if integer:
        if int(value) != value or value < 1:
            raise ConfigError(f"{name}: must be a positive integer, got {value!r}")
        return int(value)
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ConfigError(f"{name}: must be positive, got {value!r}")
    return value


def _scenario(args, law) -> Scenario:
    cars = _positive("cars", args.cars, integer=True)
    if args.topology == "ring":
        length = _positive("length", args.length)
        return Scenario.uniform_ring(length, cars)
    try:
        leader = LeaderProfile.parse(args.leader)
    except ValueError as exc:
        raise ConfigError(f"leader: {exc}") from exc
    spacing = args.spacing
    if spacing is None:
        spacing = inverse_spacing(law, leader.breakpoints[0][1])
    return Scenario.uniform_open(leader, cars, _positive("spacing", spacing))


def _dataset(args):
    if not args.data:
        raise ConfigError("data: required")
    if args.dt is not None:
        _positive("dt", args.dt)
    ds = load_trajectories(args.data, format=args.format, dt=args.dt)
    if not ds.model_ready:
        ds = resample(ds)
    return ds


def _cars(args):
    if not getattr(args, "cars_subset", None):
        return None
    try:
        return [int(c) for c in str(args.cars_subset).split(",") if c.strip()]
    except ValueError as exc:
        raise ConfigError(f"cars-subset: {exc}") from exc


def _with_suffix(path: str, m: int) -> Path:
    p = Path(path)
    return p.with_name(f"{p.stem}_m{m}{p.suffix}")


# --- commands ----------------------------------------------------------------

def cmd_simulate(args, out) -> int:
    law = _law(args)
    horizon = _positive("horizon", args.horizon, integer=True)
    scenario = _scenario(args, law)
    if args.m_sweep:
        try:
            ms = _int_list(args.m_sweep)
        except ValueError as exc:
            raise ConfigError(f"m-sweep: {exc}") from exc
    else:
        ms = [args.m]
    export = export_trajectories_wide if args.layout == "wide" else export_trajectories
    print("m\tfleet_accel_std\tfleet_mean_speed\tfleet_speed_var\tmin_spacing\tviolations", file=out)
    for m in ms:
        config = _anticipation(args, m)
        traj = simulate(scenario, law, config, horizon)
        if args.out:
            export(traj, _with_suffix(args.out, m) if args.m_sweep else Path(args.out))
        st = summary_stats(traj)
        print("\t".join([str(m), _fmt(st.fleet_accel_std), _fmt(st.fleet_mean_speed),
                         _fmt(st.fleet_speed_var), _fmt(st.fleet_min_spacing), str(len(traj.violations))]), file=out)
    return EXIT_OK


def cmd_stationary(args, out) -> int:
    law = _law(args)
    config = _anticipation(args)
    cars = _positive("cars", args.cars, integer=True)
    if args.topology == "ring":
        regime = ring_stationary(law, Ring(_positive("length", args.length), cars), config)
    else:
        if args.v1 is None:
            raise ConfigError("v1: required for an open road")
        regime = open_stationary(law, float(args.v1), cars, config)
    residual = verify_fixed_point(regime, law, config=config)
    print(f"v_bar\t{_fmt(regime.v_bar)}", file=out)
    print(f"spacing\t{_fmt(regime.spacing)}", file=out)
    print(f"residual\t{_fmt(residual)}", file=out)
    print(f"strategy\tj={regime.strategy.j} {regime.strategy.segment.group}[{regime.strategy.segment.index}]", file=out)
    print(f"non_unique\t{regime.non_unique}", file=out)
    print(f"hypothesis_ok\t{regime.hypothesis_ok}", file=out)
    if args.positions_out:
        export_positions(regime.positions, args.positions_out)
    return EXIT_OK


def cmd_calibrate(args, out) -> int:
    ds = _dataset(args)
    try:
        lam_range = _lam_range(args.lam_range)
    except ValueError as exc:
        raise ConfigError(f"lam-range: {exc}") from exc
    if lam_range[2] <= 0 or lam_range[0] < 0 or lam_range[1] < lam_range[0]:
        raise ConfigError(f"lam-range: need 0 <= min <= max and step > 0, got {args.lam_range!r}")
    try:
        m_range = _int_list(args.m_range) if args.m_range else None
    except ValueError as exc:
        raise ConfigError(f"m-range: {exc}") from exc
    if m_range is not None and (not m_range or min(m_range) < 1):
        raise ConfigError(f"m-range: must list positive integers, got {args.m_range!r}")
    if args.phi is not None and not (math.isfinite(args.phi) and args.phi >= 0):
        raise ConfigError(f"phi: must be >= 0, got {args.phi!r}")
    bin_width = _positive("bin-width", args.bin_width)
    result = grid_search(
        ds, m_range=m_range, lam_range=lam_range, phi=args.phi, bin_width=bin_width,
        tolerance=args.tolerance, cars=_cars(args), m_max=_positive("m-max", args.m_max, integer=True),
    )
    print(f"m\t{result.m}", file=out)
    print(f"lambda\t{_fmt(result.lam)}", file=out)
    print(f"phi\t{_fmt(result.phi)}", file=out)
    print(f"total_error\t{_fmt(result.fit.total_cost)}", file=out)
    print(f"samples\t{len(result.samples)}", file=out)
    for s in result.fit.segments:
        print(f"segment\t[{_fmt(s.lo)}, {_fmt(s.hi)})\talpha={_fmt(s.alpha)}\tbeta={_fmt(s.beta)}\tn={s.count}", file=out)
    if result.law is None:
        print("law\tnot representable as a min-max of the fitted pieces", file=out)
    else:
        for ref, s in result.law.segments:
            print(f"law\t{ref.group}\talpha={_fmt(s.alpha)}\tbeta={_fmt(s.beta)}", file=out)
        if args.law_out:
            write_law(result.law, args.law_out)
    if args.surface_out:
        export_surface(result.surface, args.surface_out)
    if args.scatter_out:
        export_scatter(result.samples, args.scatter_out)
    return EXIT_OK


def cmd_validate(args, out) -> int:
    ds = _dataset(args)
    law = _law(args)
    report = validate(ds, law, _anticipation(args), cars=_cars(args))
    print(f"overall_rmse\t{_fmt(report.overall)}", file=out)
    print(f"samples\t{report.samples}", file=out)
    for vid in sorted(report.rmse):
        print(f"car\t{vid}\t{_fmt(report.rmse[vid])}", file=out)
    return EXIT_OK


def cmd_gen(args, out) -> int:
    law = _law(args)
    if not args.out:
        raise ConfigError("out: required")
    if not (math.isfinite(args.jitter) and args.jitter >= 0):
        raise ConfigError(f"jitter: must be >= 0, got {args.jitter!r}")
    horizon = _positive("horizon", args.horizon, integer=True)
    traj = simulate(_scenario(args, law), law, _anticipation(args), horizon)
    ds = dataset_from_trajectory(traj, jitter=args.jitter, rng=np.random.default_rng(args.seed))
    write_dataset(ds, args.out)
    print(f"wrote\t{args.out}\t{len(ds)} rows", file=out)
    return EXIT_OK


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"pwlcf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"pwlcf: input error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args, out)
    except ConfigError as exc:
        print(f"pwlcf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, OSError) as exc:
        print(f"pwlcf: input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DomainError as exc:
        print(f"pwlcf: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except PwlcfError as exc:
        print(f"pwlcf: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        print(f"pwlcf: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
