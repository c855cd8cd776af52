"""Command-line entry point: ``busched <subcommand> ...``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import io as bio
from .baselines import LnsConfig
from .experiments import (
    ABLATION_ARMS,
    REPORT_COLUMNS,
    ExperimentConfig,
    baseline_schedule,
    curve_csv,
    format_table,
    report_row,
    rows_to_csv,
    run_ablation,
    write_ablation,
)
from .gantt import render_gantt
from .generate import GeneratorConfig, derive_instance, generate_instance
from .model import TravelTimeOverride, compute_objectives, validate_schedule
from .online import (
    DISRUPTION_EXTRA,
    DISRUPTION_WINDOW,
    TimeWindowConfig,
    simulate_online,
    train_online,
)
from .ppo import Hyperparams, evaluate, load_params, save_params, train
from .sim import DispatchSim

OUT_ENV = "BUSCHED_OUT"


def _outdir() -> Path:
    return Path(os.environ.get(OUT_ENV, "."))


def _out_path(p, default_name):
    return Path(p) if p else _outdir() / default_name


def _hyperparams(a) -> Hyperparams:
    return Hyperparams(lr=a.lr, epochs=a.epochs, minibatch_size=a.minibatch or None,
                       episodes_per_iter=a.episodes_per_iter)


def _add_hp(p):
    d = Hyperparams()
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--minibatch", type=int, default=d.minibatch_size, help="0 for full batch")
    p.add_argument("--episodes-per-iter", type=int, default=d.episodes_per_iter)


def _write_report(rows, csv_path):
    print(format_table(rows))
    if csv_path:
        bio.write_atomic(csv_path, rows_to_csv(rows, REPORT_COLUMNS))


def cmd_gen(a):
    cfg = GeneratorConfig(
        n_lines=a.lines, departures_per_cp=a.departures, span_start=a.span[0], span_end=a.span[1],
        headway_bounds=tuple(a.headway), travel_time_bounds=tuple(a.travel), deadhead_bounds=tuple(a.deadhead),
        r_min=a.r_min, fleet_size=a.fleet, spare_buses=a.spare, target_set_capacity=a.n_s,
        deletion_fraction=a.deletion, seed=a.seed)
    inst = generate_instance(cfg)
    out = _out_path(a.out, f"instance_s{a.seed}.json")
    bio.save_instance(inst, out)
    print(f"wrote {out}: {inst.n_departures()} departures, fleet {inst.fleet_size}")


def cmd_derive(a):
    inst = derive_instance(bio.load_instance(a.instance), a.fraction, a.seed)
    out = _out_path(a.out, f"derived_s{a.seed}.json")
    bio.save_instance(inst, out)
    print(f"wrote {out}: {inst.n_departures()} departures")


def cmd_train(a):
    inst = bio.load_instance(a.instance)
    res = train(inst, "offline", _hyperparams(a), a.episodes, a.seed, algo=a.algo,
                reward_mode=a.reward_mode, screening=not a.no_screening)
    out = _out_path(a.out, "offline_model.npz")
    save_params(res.params, out, res.meta)
    curve = _out_path(a.curve, "offline_curve.csv")
    bio.write_atomic(curve, curve_csv({(a.algo, a.seed): res.curve}))
    _, report, _, _ = evaluate(inst, res.params, screening=not a.no_screening)
    _write_report([report_row(inst.name, a.algo, report)], a.csv)
    print(f"wrote {out} and {curve}")


def cmd_train_online(a):
    inst = bio.load_instance(a.instance)
    probe = DispatchSim(inst, "offline")
    offline, _ = load_params(a.offline_model, state_dim=probe.dim, n_slots=probe.n_slots)
    res = train_online(inst, offline, _hyperparams(a), a.episodes, a.seed,
                       window_cfg=TimeWindowConfig(a.window), disruptions=not a.no_disruptions)
    out = _out_path(a.out, "online_model.npz")
    save_params(res.params, out, res.meta)
    curve = _out_path(a.curve, "online_curve.csv")
    bio.write_atomic(curve, curve_csv({("online", a.seed): res.curve}))
    print(f"wrote {out} and {curve}")


def cmd_eval(a):
    inst = bio.load_instance(a.instance)
    if a.algo in ("greedy", "lns"):
        sched = baseline_schedule(inst, a.algo, LnsConfig(a.lns_iterations, a.destroy_fraction, a.seed))
    else:
        if not a.model:
            raise SystemExit("eval: --model is required for learned policies")
        probe = DispatchSim(inst, "offline", screening=not a.no_screening)
        params, _ = load_params(a.model, state_dim=probe.dim, n_slots=probe.n_slots)
        sched, _, _, _ = evaluate(inst, params, screening=not a.no_screening)
    report = compute_objectives(inst, sched)
    if a.schedule_out:
        bio.save_schedule(sched, a.schedule_out, report)
    _write_report([report_row(inst.name, a.algo, report)], a.csv)


def _scenario(inst, spec):
    lo, hi = DISRUPTION_WINDOW
    if spec == "none":
        return ()
    if spec == "window":
        return (TravelTimeOverride(None, lo, hi, DISRUPTION_EXTRA),)
    if spec.startswith("line:"):
        line = int(spec.split(":", 1)[1])
        inst.line(line)
        return (TravelTimeOverride(line, 0, 1440, DISRUPTION_EXTRA),)
    return bio.load_overrides(spec)


def cmd_simulate_online(a):
    inst = bio.load_instance(a.instance)
    probe = DispatchSim(inst, "offline")
    offline, _ = load_params(a.offline_model, state_dim=probe.dim, n_slots=probe.n_slots)
    online, _ = load_params(a.model, state_dim=probe.dim, n_slots=probe.n_slots)
    cfg = TimeWindowConfig(a.window)
    rows = []
    for spec in ["none"] + list(a.scenario):
        run = simulate_online(inst, online, offline, _scenario(inst, spec), cfg)
        rows.append(report_row(inst.name, "online", run.report, "original" if spec == "none" else spec))
        if a.log_dir:
            logdir = Path(a.log_dir)
            name = spec.replace(":", "_").replace("/", "_")
            cols = ("minute", "cp", "line", "bus", "slot", "deadhead", "reward")
            bio.write_atomic(logdir / f"decisions_{name}.csv", rows_to_csv(run.decisions, cols))
            bio.save_schedule(run.schedule, logdir / f"schedule_{name}.json", run.report)
    _write_report(rows, a.csv)


def cmd_ablate(a):
    inst = bio.load_instance(a.instance)
    seeds = [int(s) for s in a.seeds.split(",")]
    outdir = Path(a.outdir) if a.outdir else _outdir()
    for arms in a.arms:
        results = run_ablation(inst, arms, a.episodes, seeds, _hyperparams(a))
        paths = write_ablation(results, arms, outdir, inst.name)
        rows = [dict(report_row(inst.name, r.arm, r.report), scheme=f"seed {r.seed}", state_dim=r.state_dim,
                     sec_per_episode=f"{r.seconds / max(len(r.curve), 1):.4f}") for r in results]
        print(format_table(rows, ("algo", "scheme", "n_used", "deadhead_total", "n_uncovered",
                                  "state_dim", "sec_per_episode")))
        print("wrote " + ", ".join(str(p) for p in paths))


def cmd_plot(a):
    inst = bio.load_instance(a.instance)
    sched = bio.load_schedule(a.schedule)
    out = _out_path(a.out, "schedule.svg")
    render_gantt(sched, inst, out, title=a.title or inst.name)
    print(f"wrote {out}")


def cmd_validate(a):
    inst = bio.load_instance(a.instance)
    sched = bio.load_schedule(a.schedule)
    violations = validate_schedule(inst, sched, None if a.with_overrides else ())
    report = compute_objectives(inst, sched)
    for v in violations:
        print(v)
    print(f"{len(violations)} violation(s); N_u={report.n_used} T_d={report.deadhead_total} N_d={report.n_uncovered}")
    return 1 if violations else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="busched", description="Multi-line bus scheduling toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--config", help="experiment config JSON supplying defaults for train/ablate/eval")
    sub = ap.add_subparsers(dest="cmd", required=True)
    ap.subcommands = sub.choices

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lines", type=int, default=2, help="number of two-way routes")
    p.add_argument("--departures", type=int, default=10, help="departures per CP")
    p.add_argument("--span", type=int, nargs=2, default=(360, 1320))
    p.add_argument("--headway", type=int, nargs=2, default=(15, 30))
    p.add_argument("--travel", type=int, nargs=2, default=(25, 45))
    p.add_argument("--deadhead", type=int, nargs=2, default=(8, 20))
    p.add_argument("--r-min", type=int, default=5)
    p.add_argument("--fleet", type=int)
    p.add_argument("--spare", type=int, default=0)
    p.add_argument("--n-s", type=int, default=8)
    p.add_argument("--deletion", type=float, default=0.0)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("derive", help="delete a fraction of departures from an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_derive)

    p = sub.add_parser("train", help="train an offline policy")
    p.add_argument("--instance", required=True)
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--algo", choices=("ppo", "reinforce"), default="ppo")
    p.add_argument("--reward-mode", choices=("combined", "final_only"), default="combined")
    p.add_argument("--no-screening", action="store_true")
    p.add_argument("--out")
    p.add_argument("--curve")
    p.add_argument("--csv")
    _add_hp(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("train-online", help="train the online bus-selection policy")
    p.add_argument("--instance", required=True)
    p.add_argument("--offline-model", required=True)
    p.add_argument("--episodes", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=60)
    p.add_argument("--no-disruptions", action="store_true")
    p.add_argument("--out")
    p.add_argument("--curve")
    _add_hp(p)
    p.set_defaults(fn=cmd_train_online)

    p = sub.add_parser("eval", help="run a policy or baseline and report N_u, T_d, N_d")
    p.add_argument("--instance", required=True)
    p.add_argument("--algo", choices=("greedy", "lns", "ppo", "reinforce"), required=True)
    p.add_argument("--model")
    p.add_argument("--no-screening", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lns-iterations", type=int, default=200)
    p.add_argument("--destroy-fraction", type=float, default=0.3)
    p.add_argument("--schedule-out")
    p.add_argument("--csv")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("simulate-online", help="online run under disruption scenarios")
    p.add_argument("--instance", required=True)
    p.add_argument("--model", required=True, help="online policy")
    p.add_argument("--offline-model", required=True)
    p.add_argument("--scenario", action="append", default=[],
                   help="window | line:<id> | path to overrides JSON (repeatable)")
    p.add_argument("--window", type=int, default=60)
    p.add_argument("--log-dir")
    p.add_argument("--csv")
    p.set_defaults(fn=cmd_simulate_online)

    p = sub.add_parser("ablate", help="ablation arms with learning curves")
    p.add_argument("--instance", required=True)
    p.add_argument("--arms", action="append", choices=sorted(ABLATION_ARMS), required=True)
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--seeds", default="0")
    p.add_argument("--outdir")
    _add_hp(p)
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("plot", help="render a schedule as an SVG Gantt chart")
    p.add_argument("--instance", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--out")
    p.add_argument("--title")
    p.set_defaults(fn=cmd_plot)

    p = sub.add_parser("validate", help="check a schedule against the constraints")
    p.add_argument("--instance", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--with-overrides", action="store_true",
                   help="check service durations against the instance's travel-time overrides")
    p.set_defaults(fn=cmd_validate)
    return ap


def _config_defaults(cfg: ExperimentConfig) -> dict:
    out = {"episodes": cfg.episodes, "seed": cfg.seeds[0], "seeds": ",".join(map(str, cfg.seeds)),
           "reward_mode": cfg.reward_mode, "no_screening": not cfg.screening, "algo": cfg.algo,
           "outdir": cfg.output_dir}
    if cfg.instance:
        out["instance"] = cfg.instance
    return out


def main(argv=None) -> int:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            cfg = ExperimentConfig.from_file(known.config)
        except (OSError, ValueError, TypeError) as err:
            print(f"busched: bad config {known.config}: {err}", file=sys.stderr)
            return 2
        defaults = _config_defaults(cfg)
        for name, sp in parser.subcommands.items():
            dests = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in defaults.items() if k in dests})
            for act in sp._actions:
                if act.dest in defaults and act.required:
                    act.required = False
        os.environ.setdefault(OUT_ENV, cfg.output_dir)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args) or 0
    except (OSError, ValueError, KeyError) as err:
        print(f"busched {args.cmd}: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
