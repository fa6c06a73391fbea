"""Command-line entry point: ``fingertip <command> [options]``.

Every command writes plot-ready CSV files into ``--out`` together with a
``manifest.json`` that echoes the resolved configuration. Exit status is 0 on
success, 1 on a runtime or numerical failure and 2 on a usage or config error.
"""

import argparse
import datetime
import json
import logging
import sys
from pathlib import Path

import numpy as np

log = logging.getLogger("fingertip")


class UsageError(Exception):
    pass


def _write_manifest(out, command, config, outputs):
    doc = {
        "command": command,
        "config": config,
        "outputs": sorted(str(Path(p).name) for p in outputs),
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    (out / "manifest.json").write_text(json.dumps(doc, indent=1, sort_keys=True, default=str) + "\n")


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# --- collide ----------------------------------------------------------------


def _axis(lo, hi, n, log_scale=False):
    if n == 1:
        return np.array([lo])
    return np.logspace(np.log10(lo), np.log10(hi), n) if log_scale else np.linspace(lo, hi, n)


def cmd_collide(args):
    from .collision import CollisionParams, sweep_eta, write_sweep_csv

    fixed = CollisionParams(
        m_f=args.mf, m_r=args.mr, k=args.k, v0=args.v0, t_l=args.tl, F_in=args.fin, control_sign=args.sign
    )
    tl_axis = _axis(args.tl_min, args.tl_max, args.n_tl) if args.tl_slice is None else np.array([args.tl_slice])
    k_axis = _axis(args.k_min, args.k_max, args.n_k, log_scale=True)
    v_axis = _axis(args.v0_min, args.v0_max, args.n_v0)
    outputs = []
    path = args.out / "eta_stiffness_latency.csv"
    write_sweep_csv(sweep_eta(k_axis, tl_axis, [args.v0], fixed), path)
    outputs.append(path)
    path = args.out / "eta_velocity_latency.csv"
    write_sweep_csv(sweep_eta([args.k], tl_axis, v_axis, fixed), path)
    outputs.append(path)
    for p in outputs:
        print(p)
    return outputs


# --- dataset / train / eval -------------------------------------------------


def cmd_dataset(args):
    from .sensor import generate_dataset, patch_grid, save_dataset

    ds = generate_dataset(
        patches=patch_grid(args.n_theta, args.n_phi),
        layers=args.layers,
        rays=args.rays,
        points_per_ray=args.points_per_ray,
        samples_per_state=args.samples_per_state,
        noise_std=args.noise,
        seed=args.seed,
    )
    data, meta = save_dataset(ds, args.out / "dataset.jsonl")
    print(f"{len(ds)} records -> {data}")
    return [data, meta]


def _report_rows(reports):
    return [[r.split, r.force_rmse, r.angle_rmse, *r.per_output] for r in reports]


def _write_report(out, reports):
    from ._io import write_csv

    header = ["split", "force_rmse_N", "angle_rmse_rad", "Fx", "Fy", "Fz", "theta", "phi"]
    path = out / "report.csv"
    write_csv(path, header, _report_rows(reports))
    print(f"{'':8}{'Forces (N)':>12}{'Angles (rad)':>14}")
    for r in reports:
        print(f"{r.split:8}{r.force_rmse:12.3f}{r.angle_rmse:14.4f}")
    return path


def cmd_train(args):
    from .estimator import save_model, train
    from .sensor import load_dataset

    ds = load_dataset(args.data)
    model, rep_train, rep_test = train(
        ds, epochs=args.epochs, batch=args.batch, seed=args.seed, lr=args.lr, lr_decay=args.lr_decay, log=log.info
    )
    model_path = args.out / "model.json"
    save_model(model, model_path)
    report = _write_report(args.out, [rep_train, rep_test])
    return [model_path, report]


def cmd_eval(args):
    from .estimator import MlpModel, evaluate, load_model
    from .sensor import load_dataset

    ds = load_dataset(args.data)
    if args.zero_model:
        model = MlpModel()
    elif args.model:
        model = load_model(args.model)
    else:
        raise UsageError("eval needs --model or --zero-model")
    splits = ["train", "test"] if args.split == "both" else [args.split]
    return [_write_report(args.out, [evaluate(model, ds, s) for s in splits])]


# --- latency ----------------------------------------------------------------


def cmd_latency(args):
    from .latency import TimeSeries, estimate_latency

    truth = TimeSeries.from_csv(args.truth, args.rate)
    measured = TimeSeries.from_csv(args.measured, args.measured_rate or args.rate)
    lag = estimate_latency(truth, measured, max_lag=args.max_lag, refine=args.refine)
    print(f"{lag * 1000.0:.3f}")
    path = args.out / "latency.json"
    path.write_text(json.dumps({"latency_s": lag, "latency_ms": round(lag * 1000.0, 3)}) + "\n")
    return [path]


# --- map --------------------------------------------------------------------


def _room_logs(out, removed):
    from .mapping import simulate_proximity, sweep_poses, three_wall_room, write_pose_log, write_proximity_log

    walls, objects = three_wall_room()
    boxes = walls + [o for o in objects if o.name not in removed]
    poses = sweep_poses()
    readings = [simulate_proximity(p, boxes).readings for p in poses]
    pose_path, prox_path = out / "poses.csv", out / "proximity.csv"
    write_pose_log(poses, pose_path)
    write_proximity_log([p.timestamp for p in poses], readings, prox_path)
    return pose_path, prox_path


def cmd_map(args):
    from .mapping import (
        BelowContactThreshold,
        ProximityArray,
        points_to_csv,
        project_contact,
        project_proximity,
        rasterize,
        read_contact_log,
        read_pose_log,
        read_proximity_log,
    )
    from .kinematics import ContactAngles, ContactForce
    from .sensor import ContactState

    outputs = []
    if args.scene == "room":
        args.poses, args.proximity = _room_logs(args.out, set(args.remove or []))
        outputs += [args.poses, args.proximity]
    if not (args.poses and args.proximity):
        raise UsageError("map needs --poses and --proximity (or --scene room)")

    poses = read_pose_log(args.poses)
    t_prox, readings = read_proximity_log(args.proximity)
    if len(t_prox) != len(poses) or not np.allclose(t_prox, [p.timestamp for p in poses]):
        raise UsageError(f"{args.proximity}: timestamps do not match the pose log {args.poses}")
    points = []
    for pose, r in zip(poses, readings):
        points += project_proximity(pose, ProximityArray(r))
    if args.contacts:
        t_c, targets = read_contact_log(args.contacts)
        stamps = np.array([p.timestamp for p in poses])
        for t, y in zip(t_c, targets):
            i = int(np.argmin(np.abs(stamps - t)))
            state = ContactState(ContactAngles(y[3], y[4]), ContactForce(*y[:3]))
            try:
                points.append(project_contact(poses[i], state, args.threshold))
            except BelowContactThreshold:
                continue

    if args.lower and args.upper:
        lower, upper = args.lower, args.upper
    elif points:
        xyz = np.array([p.position for p in points])
        lower, upper = xyz.min(axis=0) - args.cell, xyz.max(axis=0) + args.cell
    else:
        lower, upper = [-args.cell] * 3, [args.cell] * 3
    grid = rasterize(points, lower, upper, args.cell)
    cells, pts = args.out / "cells.csv", args.out / "points.csv"
    grid.to_csv(cells)
    points_to_csv(points, pts)
    if grid.out_of_bounds:
        log.warning("%d points fell outside the grid bounds", grid.out_of_bounds)
    print(f"{len(points)} points, {len(grid.counts)} occupied cells, {grid.out_of_bounds} out of bounds")
    return outputs + [cells, pts]


# --- sim --------------------------------------------------------------------


def cmd_sim(args):
    from . import reactive

    if args.scenario:
        try:
            scene, behavior, plant, sim = reactive.load_scenario(args.scenario)
        except reactive.SimulationError as exc:
            raise UsageError(str(exc)) from None
        try:
            logged = reactive.simulate(scene, behavior, plant=plant, seed=args.seed, **sim)
        except TypeError as exc:
            raise UsageError(f"{args.scenario}: bad sim section ({exc})") from None
    else:
        if args.behavior not in reactive.BEHAVIORS:
            raise UsageError(f"unknown behavior {args.behavior!r}; choose from {', '.join(reactive.BEHAVIORS)}")
        if args.behavior == "contact_following":
            logged = reactive.following_scene(latency=args.latency, seed=args.seed)
        elif args.behavior in ("potential_field", "none"):
            logged = reactive.approach_scene(field_on=args.behavior == "potential_field", latency=args.latency)
        else:
            from .collision import CollisionParams

            _, logged = reactive.collision_scene(CollisionParams(t_l=args.latency))
    path = args.out / "trajectory.csv"
    logged.to_csv(path)
    print(f"{len(logged.t)} steps -> {path}")
    return [path]


# --- repro ------------------------------------------------------------------


def cmd_repro(args):
    """Desk-scale reproductions of the impulse surfaces, the contact transition and the maps."""
    from . import latency as lat
    from .collision import CollisionParams, sweep_eta, write_sweep_csv
    from .mapping import map_scene, sweep_poses, three_wall_room

    out = args.out
    outputs = []
    fixed = CollisionParams()
    tl = np.linspace(0.0, 0.025, 26)
    for name, rows in (
        ("fig3_eta_stiffness_latency.csv", sweep_eta(np.logspace(2, 5, 31), tl, [fixed.v0], fixed)),
        ("fig3_eta_velocity_latency.csv", sweep_eta([fixed.k], tl, np.linspace(0.01, 1.0, 34), fixed)),
    ):
        write_sweep_csv(rows, out / name)
        outputs.append(out / name)

    rng = np.random.default_rng(args.seed)
    prox, force = lat.approach_press_profile(force_noise=0.05, prox_noise=0.5, rng=rng)
    prox_f = lat.zero_phase_moving_average(prox, 7)
    force_f = lat.zero_phase_moving_average(force, 15)
    event = lat.detect_transition(prox, force)
    from ._io import write_csv

    path = out / "fig5_transition.csv"
    write_csv(
        path,
        ["t_s", "proximity_mm", "proximity_filtered_mm", "normal_force_N", "normal_force_filtered_N"],
        zip(prox.times.tolist(), prox.values.tolist(), prox_f.values.tolist(), force.values.tolist(), force_f.values.tolist()),
    )
    outputs.append(path)
    print(f"contact at {event.contact_time:.3f} s, first force at {event.first_force_time:.3f} s")

    walls, objects = three_wall_room()
    poses = sweep_poses()
    for trial, keep in enumerate((objects, objects[1:], [])):
        grid, _ = map_scene(poses, walls + list(keep))
        path = out / f"fig6_room_trial{trial + 1}_cells.csv"
        grid.to_csv(path)
        outputs.append(path)
    for p in outputs:
        print(p)
    return outputs


# --- parser -----------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=Path, default=Path("out"))
    common.add_argument("--format", choices=["csv"], default="csv")
    common.add_argument("--config", type=Path, help="JSON file whose keys override the flags")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="fingertip", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collide", parents=[common], help="impulse-ratio sweeps")
    p.add_argument("--mf", type=float, default=0.005)
    p.add_argument("--mr", type=float, default=0.1)
    p.add_argument("--k", type=float, default=1500.0)
    p.add_argument("--v0", type=float, default=0.15)
    p.add_argument("--tl", type=float, default=0.007, help="nominal latency (s)")
    p.add_argument("--fin", type=float, default=10.0)
    p.add_argument("--sign", type=int, choices=[-1, 1], default=-1)
    p.add_argument("--tl-slice", type=float, help="sweep a single latency instead of the latency axis")
    p.add_argument("--k-min", type=float, default=100.0)
    p.add_argument("--k-max", type=float, default=1e5)
    p.add_argument("--n-k", type=int, default=31)
    p.add_argument("--tl-min", type=float, default=0.0)
    p.add_argument("--tl-max", type=float, default=0.025)
    p.add_argument("--n-tl", type=int, default=26)
    p.add_argument("--v0-min", type=float, default=0.01)
    p.add_argument("--v0-max", type=float, default=1.0)
    p.add_argument("--n-v0", type=int, default=34)
    p.set_defaults(func=cmd_collide)

    p = sub.add_parser("dataset", parents=[common], help="simulate the bowl data collection")
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--rays", type=int, default=8)
    p.add_argument("--points-per-ray", type=int, default=10)
    p.add_argument("--samples-per-state", type=int, default=2)
    p.add_argument("--n-theta", type=int, default=5)
    p.add_argument("--n-phi", type=int, default=5)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", parents=[common], help="train the contact estimator")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lr-decay", type=float, default=0.9, help="per-epoch step-size factor")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="RMSE of a model on a dataset")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--model", type=Path)
    p.add_argument("--zero-model", action="store_true", help="evaluate an all-zero network")
    p.add_argument("--split", choices=["train", "test", "both"], default="both")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("latency", parents=[common], help="cross-correlation latency between two t_s,value files")
    p.add_argument("truth", type=Path)
    p.add_argument("measured", type=Path)
    p.add_argument("--rate", type=float, help="sample rate of both files (Hz); inferred if omitted")
    p.add_argument("--measured-rate", type=float)
    p.add_argument("--max-lag", type=float, default=0.5)
    p.add_argument("--refine", action="store_true", help="parabolic sub-sample refinement of the peak")
    p.set_defaults(func=cmd_latency)

    p = sub.add_parser("map", parents=[common], help="coarse maps from pose/proximity/contact logs")
    p.add_argument("--poses", type=Path)
    p.add_argument("--proximity", type=Path)
    p.add_argument("--contacts", type=Path)
    p.add_argument("--scene", choices=["room"], help="generate the logs from the scripted 3-wall room")
    p.add_argument("--remove", action="append", choices=["object_1", "object_2"])
    p.add_argument("--cell", type=float, default=0.01)
    p.add_argument("--threshold", type=float, default=1.58)
    p.add_argument("--lower", type=_floats)
    p.add_argument("--upper", type=_floats)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("sim", parents=[common], help="reactive behaviour simulation")
    p.add_argument("--scenario", type=Path, help="JSON scenario file")
    p.add_argument("--behavior", default="contact_following")
    p.add_argument("--latency", type=float, default=0.007)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("repro", parents=[common], help="run the figure reproductions in one go")
    p.set_defaults(func=cmd_repro)
    return parser


def _apply_config(parser, args):
    try:
        doc = json.loads(args.config.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"{args.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.config}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{args.config}: top level must be an object")
    for key, value in doc.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest) or dest in ("func", "command", "config"):
            raise UsageError(f"{args.config}: unknown field {key!r} for {args.command}")
        default = getattr(args, dest)
        if isinstance(default, Path) or dest in ("data", "model", "poses", "proximity", "contacts", "scenario"):
            value = Path(value)
        setattr(args, dest, value)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        if args.config:
            _apply_config(parser, args)
        args.out = Path(args.out)
        args.out.mkdir(parents=True, exist_ok=True)
        outputs = args.func(args)
    except UsageError as exc:
        parser.exit(2, f"fingertip {args.command}: error: {exc}\n")
    except FileNotFoundError as exc:
        parser.exit(2, f"fingertip {args.command}: error: {exc.filename}: file not found\n")
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"fingertip {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    config = {k: v for k, v in vars(args).items() if k not in ("func",)}
    _write_manifest(args.out, args.command, config, outputs or [])
    return 0


if __name__ == "__main__":
    sys.exit(main())
