"""Command-line entry points.

    coilsim simulate --config cfg.json --out DIR [--seeds 1,2,3] [--format csv|json]
    coilsim stability --config cfg.json --out DIR   (or --preset fig6-stable)
    coilsim sweep --config cfg.json --vary-q I,J,LO,HI,STEPS --out DIR
    coilsim sweep --config cfg.json --vary-n 4,8 --out DIR
    coilsim reproduce --preset NAME --out DIR [--seeds ...] [--horizon N]

Exit code 0 on success; on failure a machine-readable JSON error object is
printed to stderr and the exit code is 2.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness, presets, stability
from .errors import CoilsimError, ConfigError


def _parse_seeds(text):
    try:
        return [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad seed list {text!r}", field="seeds") from exc


def _emit_error(exc):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError) and exc.field is not None:
        payload["field"] = exc.field
    json.dump(payload, sys.stderr)
    sys.stderr.write("\n")


def _load(args):
    if getattr(args, "preset", None):
        cfg = presets.preset_config(args.preset)
    elif getattr(args, "config", None):
        cfg = harness.load_config(args.config)
    else:
        raise ConfigError("either --config or --preset is required", field="config")
    if getattr(args, "seeds", None):
        cfg["seeds"] = _parse_seeds(args.seeds)
    if getattr(args, "horizon", None) is not None:
        cfg["horizon"] = args.horizon
    return harness.validate_config(cfg)


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args):
    cfg = _load(args)
    if not cfg["seeds"]:
        raise ConfigError("seed list is empty", field="seeds")
    out = _outdir(args)
    for seed, result in harness.run_many(cfg).items():
        if args.format == "csv":
            harness.write_trace_csv(result, out / f"trace_seed{seed}.csv")
        harness.write_summary_json(result, out / f"summary_seed{seed}.json")
        print(f"seed {seed}: avg expected cost "
              f"{result.summary['time_avg_expected_cost']:.6g}, "
              f"cum regret {result.summary['cum_regret']:.6g}")
    return 0


def cmd_stability(args):
    cfg = _load(args)
    stab = cfg.get("stability") or {}
    models = harness.build_models(cfg)
    q = np.asarray(cfg["link_quality"], dtype=float)
    report = stability.stability_report(
        models,
        q[:, 0],
        m_bar=stab.get("m_bar", 52),
        beta=stab.get("beta", 100.0),
        p=stab.get("p", 2.0),
        t0=stab.get("t0", 4),
    )
    out = _outdir(args)
    path = out / "stability_report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"verdict: {report['verdict']} (report: {path})")
    return 0


def cmd_sweep(args):
    base = _load(args)
    out = _outdir(args)
    rows = []
    if args.vary_q:
        parts = args.vary_q.split(",")
        if len(parts) != 5:
            raise ConfigError("--vary-q expects I,J,LO,HI,STEPS", field="vary-q")
        i, j = int(parts[0]), int(parts[1])
        lo, hi, steps = float(parts[2]), float(parts[3]), int(parts[4])
        for value in np.linspace(lo, hi, steps):
            cfg = json.loads(json.dumps(base))
            cfg["link_quality"][i][j] = float(value)
            rows.append(("q[%d][%d]=%.6g" % (i, j, value), harness.run_many(cfg)))
    elif args.vary_n:
        for n in _parse_seeds(args.vary_n):
            cfg = json.loads(json.dumps(base))
            template_subs = cfg["subsystems"]
            template_q = cfg["link_quality"]
            cfg["subsystems"] = [template_subs[k % len(template_subs)] for k in range(n)]
            cfg["link_quality"] = [template_q[k % len(template_q)] for k in range(n)]
            rows.append((f"N={n}", harness.run_many(cfg)))
    else:
        raise ConfigError("sweep needs --vary-q or --vary-n", field="sweep")
    aggregate = []
    for label, results in rows:
        costs = [r.summary["time_avg_expected_cost"] for r in results.values()]
        aggregate.append({
            "point": label,
            "mean_time_avg_expected_cost": float(np.mean(costs)),
            "seeds": sorted(results),
        })
        print(f"{label}: mean avg expected cost {np.mean(costs):.6g}")
    with open(out / "sweep_summary.json", "w", encoding="utf-8") as fh:
        json.dump(aggregate, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def cmd_reproduce(args):
    name = args.preset
    cfg = _load(args)
    out = _outdir(args)
    if name in ("fig6-stable", "fig7-unstable"):
        return cmd_stability(args)
    if name == "table1-learning":
        results = harness.run_many(cfg)
        plays = np.mean([r.play_counts for r in results.values()], axis=0)
        freq = plays / max(cfg["horizon"], 1)
        payload = {
            "preset": name,
            "play_frequency": freq.tolist(),
            "mean_cost_regret_per_slot": float(
                np.mean([r.summary["mean_cost_regret_per_slot"] for r in results.values()])
            ),
        }
        with open(out / "table1_learning.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print("play frequency (subsystem x channel):")
        print(np.array2string(freq, precision=3))
        return 0
    if name == "fig5-regret":
        payload = {"preset": name, "policies": {}}
        for policy in cfg.get("compare_policies", ["known-q", "coil-qhat"]):
            pcfg = json.loads(json.dumps({**cfg, "policy": policy}))
            pcfg.pop("compare_policies", None)
            results = harness.run_many(pcfg)
            payload["policies"][policy] = {
                "mean_regret_per_slot": float(
                    np.mean([r.summary["mean_regret_per_slot"] for r in results.values()])
                ),
                "mean_cost_regret_per_slot": float(
                    np.mean([r.summary["mean_cost_regret_per_slot"] for r in results.values()])
                ),
            }
            print(f"{policy}: regret/slot "
                  f"{payload['policies'][policy]['mean_regret_per_slot']:.5f}, "
                  f"cost regret/slot "
                  f"{payload['policies'][policy]['mean_cost_regret_per_slot']:.5g}")
        with open(out / "regret_comparison.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return 0
    raise ConfigError(f"preset {name!r} has no reproduce handler", field="preset")


def build_parser():
    parser = argparse.ArgumentParser(prog="coilsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, preset_required=False):
        p.add_argument("--config", help="path to a config JSON file")
        p.add_argument("--preset", choices=presets.PRESET_NAMES,
                       required=preset_required)
        p.add_argument("--seeds", help="comma-separated seed list override")
        p.add_argument("--seed", type=int, help="single seed override")
        p.add_argument("--horizon", type=int, help="horizon override")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("simulate", help="run the configured policy over seeds")
    common(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stability", help="build the age chain and certify stability")
    common(p)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("sweep", help="grid over a link quality or the subsystem count")
    common(p)
    p.add_argument("--vary-q", help="I,J,LO,HI,STEPS for one link entry")
    p.add_argument("--vary-n", help="comma-separated subsystem counts")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="run a named benchmark scenario")
    common(p, preset_required=True)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is not None and not getattr(args, "seeds", None):
        args.seeds = str(args.seed)
    try:
        return args.func(args)
    except CoilsimError as exc:
        _emit_error(exc)
        return 2
    except OSError as exc:
        _emit_error(ConfigError(str(exc)))
        return 2


if __name__ == "__main__":
    sys.exit(main())
