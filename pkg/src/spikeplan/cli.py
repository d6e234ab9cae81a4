"""Command-line entry point.

Subcommands::

    spikeplan run        run trials, write summary JSON and segment CSV
    spikeplan report     mean +- std table from a segment CSV or summary JSON
    spikeplan export-heatmap   per-neuron synaptic change grids from two models
    spikeplan histogram  learning-signal histogram from a segment CSV
    spikeplan save       train one trial (or none) and write the model file
    spikeplan load       validate a model file and print its header

Every ``TrialConfig`` field can be set in a key-value config file
(``key = value`` per line, ``#`` comments) and overridden with
``--set key=value`` on the command line.
"""

import argparse
import json
import sys
from dataclasses import asdict, fields
from pathlib import Path

from . import harness, persistence
from .environment import get_world
from .harness import TrialConfig


def _coerce(name, text):
    types = {f.name: f.type for f in fields(TrialConfig)}
    if name not in types:
        raise ValueError(f"unknown config key {name!r}")
    t = types[name]
    t = t if isinstance(t, type) else {"int": int, "float": float, "bool": bool, "str": str}[t]
    if t is bool:
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {text!r}")
    return t(text.strip())


def parse_config_text(text):
    """``key = value`` lines into a dict of typed TrialConfig fields."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _coerce(key, value)
    return out


def config_to_text(config):
    lines = ["# spikeplan trial config v1"]
    for k, v in asdict(config).items():
        lines.append(f"{k} = {int(v) if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"


def build_config(args):
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_text(Path(args.config).read_text()))
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = _coerce(k.strip(), v)
    for name in ("world", "kind", "segments", "trials", "seed"):
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return TrialConfig(**values)


def _add_config_flags(p):
    p.add_argument("--config", help="key-value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config field (repeatable)")
    p.add_argument("--world", help="preset name or world file")
    p.add_argument("--kind", choices=["global", "local", "constant", "none"])
    p.add_argument("--segments", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)


def cmd_run(args):
    config = build_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics = harness.run_trials(config, jobs=args.jobs)
    summary = harness.summarize(config, metrics)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    records = [r for m in metrics for r in m.records]
    (out / "segments.csv").write_text(harness.records_to_csv(records))
    (out / "config.txt").write_text(config_to_text(config))
    if args.save_models:
        base = config.network()
        for m in metrics:
            persistence.save_model(base.with_weights(m.W_initial), out / f"trial{m.trial}_initial.spk")
            persistence.save_model(base.with_weights(m.W_final), out / f"trial{m.trial}_final.spk")
    print(format_summary(summary))
    return 0


def format_summary(summary):
    cfg = summary.get("config", {})
    lines = [f"world={cfg.get('world')} kind={cfg.get('kind')} "
             f"trials={len(summary['trials'])} segments={cfg.get('segments')}"]
    for name in ("updates_triggered", "targets_reached", "planning_time", "expected_exec_time"):
        if name in summary:
            s = summary[name]
            lines.append(f"  {name:20s} {s['mean']:10.4f} +- {s['std']:.4f}")
    return "\n".join(lines)


def cmd_report(args):
    path = Path(args.path)
    if path.is_dir():
        path = path / "summary.json"
    if path.suffix == ".json":
        summary = json.loads(path.read_text())
        if summary.get("format") != "spikeplan-summary":
            raise ValueError(f"{path} is not a run summary")
        print(format_summary(summary))
        return 0
    records = harness.records_from_csv(path.read_text())
    blocked = args.blocked_target
    if blocked is None:
        blocked = harness.blocked_target_index(get_world(args.world))
    metrics = harness.metrics_from_records(records, blocked)
    for name in ("updates_triggered", "targets_reached"):
        mu, sd = harness.mean_std([getattr(m, name) for m in metrics])
        print(f"{name:20s} {mu:10.4f} +- {sd:.4f}  (n={len(metrics)})")
    return 0


def cmd_export_heatmap(args):
    before = persistence.load_model(args.before)
    after = persistence.load_model(args.after)
    if before.grid != after.grid:
        raise ValueError("models use different grids")
    inp, outp = harness.synaptic_change_report(before.W, after.W, before.grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = "# spikeplan-heatmap v1 rows=y cols=x\n"
    # lattice index order is (x, y); transpose so rows run along y
    (out / "input_change.csv").write_text(header + harness.grid_to_csv(inp.T))
    (out / "output_change.csv").write_text(header + harness.grid_to_csv(outp.T))
    print(f"wrote {out / 'input_change.csv'} and {out / 'output_change.csv'}")
    return 0


def cmd_histogram(args):
    records = harness.records_from_csv(Path(args.records).read_text())
    alphas = [a for r in records for a in r.alphas]
    h = harness.signal_histogram(alphas, bins=args.bins)
    text = "# spikeplan-histogram v1\n" + harness.histogram_to_csv(h)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"# signals={len(alphas)} mass={h.mass:.6g} top15_share={h.top_share:.4f} "
          f"max={h.max_value:.6g}", file=sys.stderr)
    return 0


def cmd_save(args):
    config = build_config(args)
    if args.segments_trained == 0:
        net = config.network()
    else:
        m = harness.run_trial(config, args.trial, segments=args.segments_trained)
        net = m.network
        print(f"trained trial {args.trial}: updates={m.updates_triggered} "
              f"targets={m.targets_reached}")
    persistence.save_model(net, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_load(args):
    net = persistence.load_model(args.path)
    g = net.grid
    print(f"grid={g.dims}d x {g.neurons_per_dim} bounds={g.bounds} tau={net.tau} "
          f"ramp={net.refractory_ramp} activation=({net.activation.offset}, {net.activation.scale})")
    W = net.W
    print(f"W {W.shape} min={W.min():.4f} max={W.max():.4f} mean={W.mean():.6f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="spikeplan", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run trials")
    _add_config_flags(p)
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel trial processes")
    p.add_argument("--save-models", action="store_true", help="write initial/final models")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarize a run")
    p.add_argument("path", help="run directory, summary.json or segments.csv")
    p.add_argument("--world", default="paper-sim", help="world for the blocked-target index")
    p.add_argument("--blocked-target", type=int)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export-heatmap", help="synaptic change grids between two models")
    p.add_argument("before")
    p.add_argument("after")
    p.add_argument("--out", default="heatmap")
    p.set_defaults(func=cmd_export_heatmap)

    p = sub.add_parser("histogram", help="histogram of learning signals")
    p.add_argument("records", help="segments.csv")
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("save", help="write a model file")
    _add_config_flags(p)
    p.add_argument("out")
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--segments-trained", type=int, default=0,
                   help="train this many segments first (0 saves the initial model)")
    p.set_defaults(func=cmd_save)

    p = sub.add_parser("load", help="validate and describe a model file")
    p.add_argument("path")
    p.set_defaults(func=cmd_load)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, persistence.ModelFormatError) as e:
        print(f"spikeplan: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
