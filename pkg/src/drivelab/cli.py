"""Command-line entry point.

Subcommands: gen-data, train, grid-search, eval, baseline, speed-limit,
verify. A key=value config file can pre-set any flag of a subcommand
(flags override the file); --seed is mandatory wherever randomness exists,
so no run ever depends on the wall clock. Every run writes its resolved
configuration next to its outputs. Exit codes: 0 success, 2 configuration
error, 3 divergence-only failures, 4 I/O or artifact integrity error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .closed_loop import (
    BaselineController,
    ClosedLoopConfig,
    NNController,
    TrackingMetrics,
    closed_loop_simulate,
)
from .dataset import (
    DatasetError,
    dataset_integrity_hash,
    export_csv,
    generate_dataset,
    read_dataset,
    write_dataset,
)
from .fileio import atomic_write_text
from .net.checkpoint import (
    CheckpointError,
    checkpoint_from_result,
    load_checkpoint,
    restore,
    save_checkpoint,
)
from .net.training import full_grid, grid_search, train
from .params import ConfigError, load_params, params_hash
from .svgplot import line_chart, track_chart
from .track import default_track, kinematic_speed_limit, load_track


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"config line {lineno}: expected key=value")
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}", 4) from exc
    return values


def _apply_config_defaults(parser: argparse.ArgumentParser, args: list[str]) -> list[str]:
    """Pull --config out of argv and turn file entries into defaults."""
    if "--config" not in args:
        return args
    idx = args.index("--config")
    if idx + 1 >= len(args):
        raise CliError("--config needs a path", 2)
    path = args[idx + 1]
    rest = args[:idx] + args[idx + 2:]
    entries = _read_config_file(path)
    valid = {a.dest for a in parser._actions}
    unknown = set(entries) - valid
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}", 2)
    parser.set_defaults(**{k: v for k, v in entries.items()})
    for action in parser._actions:
        if action.dest in entries:
            action.required = False
    return rest


def _write_run_config(out_path: str, command: str, args: argparse.Namespace,
                      extra: dict | None = None) -> None:
    resolved = {k: v for k, v in vars(args).items() if not callable(v)}
    doc = {"command": command, "version": __version__,
           "args": {k: v for k, v in sorted(resolved.items())}}
    if extra:
        doc.update(extra)
    atomic_write_text(out_path, json.dumps(doc, indent=2, sort_keys=True,
                                           default=str) + "\n")


def _parse_widths(text: str) -> tuple[int, ...]:
    try:
        widths = tuple(int(part) for part in text.replace("x", ",").split(",") if part)
    except ValueError as exc:
        raise CliError(f"bad widths {text!r}", 2) from exc
    if not widths:
        raise CliError("empty widths", 2)
    return widths


# ---------------------------------------------------------------- gen-data

def cmd_gen_data(args: argparse.Namespace) -> int:
    params = load_params(args.params)
    train_count = None
    if args.train_count is not None:
        train_count = int(args.train_count)
    elif args.train_frac is not None:
        train_count = round(int(args.n) * float(args.train_frac))
    dataset, stats = generate_dataset(int(args.n), int(args.seed), params=params,
                                      train_count=train_count,
                                      workers=int(args.workers))
    digest = write_dataset(dataset, args.out)
    if args.csv:
        export_csv(dataset, os.path.splitext(args.out)[0] + ".csv")
    _write_run_config(args.out + ".run.json", "gen-data", args,
                      {"param_hash": params_hash(params).hex(),
                       "integrity": digest,
                       "rejected": stats.rejected,
                       "streams_used": stats.streams_used})
    print(f"wrote {args.out}: {dataset.n} instances "
          f"(train {dataset.n_train} / test {dataset.n_test})")
    print(f"streams used {stats.streams_used}, rejected rollouts {stats.rejected}")
    print(f"integrity sha256 {digest}")
    return 0


# ------------------------------------------------------------------- train

def cmd_train(args: argparse.Namespace) -> int:
    params = load_params(args.params)
    try:
        dataset = read_dataset(args.data)
    except (OSError, DatasetError) as exc:
        raise CliError(f"cannot load dataset: {exc}", 4) from exc
    if dataset.param_hash != params_hash(params):
        print("warning: dataset was generated with different vehicle parameters",
              file=sys.stderr)
    result = train(args.model, dataset, epochs=int(args.epochs),
                   batch_size=int(args.batch_size), seed=int(args.seed),
                   hidden=_parse_widths(args.widths), params=params,
                   log=(lambda e, c: print(f"epoch {e}: train {c[0]:.6f} test {c[1]:.6f}"))
                   if args.verbose else None)
    ckpt = checkpoint_from_result(result, metadata={
        "dataset_hash": dataset_integrity_hash(args.data),
        "dataset_n": dataset.n,
    })
    digest = save_checkpoint(ckpt, args.out)
    curve_path = os.path.splitext(args.out)[0] + ".loss.csv"
    lines = ["epoch,train_loss,test_loss"]
    lines += [f"{i},{tr!r},{te!r}" for i, (tr, te) in enumerate(result.curve)]
    atomic_write_text(curve_path, "\n".join(lines) + "\n")
    _write_run_config(args.out + ".run.json", "train", args,
                      {"param_hash": params_hash(params).hex(),
                       "integrity": digest})
    print(f"wrote {args.out} (sha256 {digest}) and {curve_path}")
    print(f"final train loss {result.curve[-1][0]:.6f}, "
          f"test loss {result.curve[-1][1]:.6f}")
    return 0


# ------------------------------------------------------------- grid-search

def cmd_grid_search(args: argparse.Namespace) -> int:
    try:
        dataset = read_dataset(args.data)
    except (OSError, DatasetError) as exc:
        raise CliError(f"cannot load dataset: {exc}", 4) from exc
    if args.candidates:
        candidates = [_parse_widths(part) for part in args.candidates.split(";")]
    else:
        candidates = full_grid()
    ranked = grid_search(dataset, kind=args.model, epochs=int(args.epochs),
                         seed=int(args.seed), candidates=candidates,
                         batch_size=int(args.batch_size),
                         log=lambda i, w, l: print(
                             f"[{i + 1}/{len(candidates)}] {w} -> test loss {l:.6f}"))
    lines = ["rank,widths,test_loss"]
    lines += [f"{i},{'x'.join(map(str, w))},{loss!r}"
              for i, (w, loss) in enumerate(ranked)]
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    _write_run_config(args.out + ".run.json", "grid-search", args)
    best, best_loss = ranked[0]
    print(f"best widths {best} with test loss {best_loss:.6f}; "
          f"ranking written to {args.out}")
    return 0


# -------------------------------------------------------------------- eval

def _load_controller(name: str, args, cfg: ClosedLoopConfig, params):
    if name in ("mlp", "cnn"):
        ckpt_path = getattr(args, name)
        if not ckpt_path:
            raise CliError(f"controller {name!r} needs --{name} CHECKPOINT", 2)
        result = restore(load_checkpoint(ckpt_path))
        if result.model.kind != name:
            raise CliError(f"checkpoint {ckpt_path} holds a "
                           f"{result.model.kind} model, not {name}", 2)
        return NNController(result, cfg, label=name)
    if name in ("pp", "stanley"):
        return BaselineController(name, params)
    raise CliError(f"unknown controller {name!r}", 2)


def _metrics_rows(results: list[TrackingMetrics], which: str) -> list[str]:
    rows = ["controller,rms,average,std_dev,max,completed,diverged"]
    for m in results:
        stats = m.speed_error if which == "speed" else m.lateral_error
        rows.append(f"{m.controller},{stats.rms!r},{stats.mean!r},"
                    f"{stats.std!r},{stats.max_signed!r},"
                    f"{int(m.completed)},{int(m.diverged)}")
    return rows


def _write_eval_outputs(out_dir: str, path_ref, results: list[TrackingMetrics]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    atomic_write_text(os.path.join(out_dir, "metrics_longitudinal.csv"),
                      "\n".join(_metrics_rows(results, "speed")) + "\n")
    atomic_write_text(os.path.join(out_dir, "metrics_lateral.csv"),
                      "\n".join(_metrics_rows(results, "lateral")) + "\n")
    for m in results:
        tr = m.traces
        lines = ["t,s,x,y,v,lateral,delta,t_fl,t_fr,t_rl,t_rr"]
        for k in range(len(tr["t"])):
            c = tr["commands"][k]
            lines.append(f"{tr['t'][k]!r},{tr['s'][k]!r},{tr['xy'][k, 0]!r},"
                         f"{tr['xy'][k, 1]!r},{tr['v'][k]!r},{tr['lateral'][k]!r},"
                         f"{c[4]!r},{c[0]!r},{c[1]!r},{c[2]!r},{c[3]!r}")
        atomic_write_text(os.path.join(out_dir, f"trace_{m.controller}.csv"),
                          "\n".join(lines) + "\n")

    def series(fn):
        return [(m.controller, m.traces["s"], fn(m)) for m in results
                if len(m.traces["t"])]

    line_chart(os.path.join(out_dir, "steering_vs_s.svg"),
               "Steering command", "s [m]", "delta [rad]",
               series(lambda m: m.traces["commands"][:, 4]))
    line_chart(os.path.join(out_dir, "front_torque_vs_s.svg"),
               "Front wheel torque", "s [m]", "torque [N m]",
               series(lambda m: 0.5 * (m.traces["commands"][:, 0]
                                       + m.traces["commands"][:, 1])))
    line_chart(os.path.join(out_dir, "rear_torque_vs_s.svg"),
               "Rear wheel torque", "s [m]", "torque [N m]",
               series(lambda m: 0.5 * (m.traces["commands"][:, 2]
                                       + m.traces["commands"][:, 3])))
    line_chart(os.path.join(out_dir, "speed_vs_s.svg"),
               "Total speed", "s [m]", "V [m/s]",
               series(lambda m: m.traces["v"]))
    line_chart(os.path.join(out_dir, "lateral_error_vs_s.svg"),
               "Absolute lateral error", "s [m]", "|e| [m]",
               series(lambda m: np.abs(m.traces["lateral"])))

    marks = []
    for sid in np.unique(path_ref.section):
        first = int(np.argmax(path_ref.section == sid))
        marks.append((float(path_ref.xy[first, 0]), float(path_ref.xy[first, 1]),
                      str(int(sid))))
    track_chart(os.path.join(out_dir, "track_top_view.svg"),
                "Track top view", path_ref.xy, marks,
                [(m.controller, m.traces["xy"]) for m in results])


def _run_eval(args: argparse.Namespace, controllers: list[str]) -> int:
    params = load_params(args.params)
    path_ref = (load_track(args.track, v_ref=float(args.v_ref)) if args.track
                else default_track(v_ref=float(args.v_ref)))
    cfg = ClosedLoopConfig()
    results = []
    for name in controllers:
        controller = _load_controller(name, args, cfg, params)
        metrics = closed_loop_simulate(controller, path_ref, cfg, params)
        status = "completed" if metrics.completed else f"stopped: {metrics.reason}"
        print(f"{name}: {status}; lateral rms {metrics.lateral_error.rms:.3f} m, "
              f"max {metrics.lateral_error.max_signed:+.3f} m; "
              f"speed rms {metrics.speed_error.rms:.3f} m/s")
        results.append(metrics)
    _write_eval_outputs(args.out_dir, path_ref, results)
    _write_run_config(os.path.join(args.out_dir, "run.json"), "eval", args,
                      {"param_hash": params_hash(params).hex()})
    print(f"outputs in {args.out_dir}")
    return 3 if any(m.diverged for m in results) else 0


def cmd_eval(args: argparse.Namespace) -> int:
    controllers = [c.strip() for c in args.controllers.split(",") if c.strip()]
    if not controllers:
        raise CliError("no controllers requested", 2)
    return _run_eval(args, controllers)


def cmd_baseline(args: argparse.Namespace) -> int:
    return _run_eval(args, ["pp", "stanley"])


# ------------------------------------------------------------- speed-limit

def cmd_speed_limit(args: argparse.Namespace) -> int:
    radii = [float(r) for r in str(args.r).split(",") if r]
    if not radii:
        raise CliError("need at least one radius", 2)
    if any(r <= 0 for r in radii):
        raise CliError("radius must be positive", 2)
    print("radius_m,limit_mps")
    for r in radii:
        print(f"{r:g},{kinematic_speed_limit(r, float(args.mu), float(args.g)):.2f}")
    return 0


# ------------------------------------------------------------------ verify

def cmd_verify(args: argparse.Namespace) -> int:
    failures = 0
    for path in args.paths:
        try:
            with open(path, "rb") as fh:
                head = fh.read(4)
            if head == b"VDL1":
                digest = dataset_integrity_hash(path)
                print(f"{path}: OK dataset (sha256 {digest})")
            else:
                doc = load_checkpoint(path)
                print(f"{path}: OK checkpoint "
                      f"(sha256 {doc['integrity']['sha256']})")
        except (OSError, DatasetError, CheckpointError, json.JSONDecodeError) as exc:
            print(f"{path}: FAIL ({exc})")
            failures += 1
    return 4 if failures else 0


# -------------------------------------------------------------------- main

def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="drivelab",
        description="vehicle dynamics lab: dataset generation, inverse-dynamics "
                    "model training and closed-loop track evaluation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("gen-data", help="generate a rollout dataset")
    p.add_argument("--n", default=43241)
    p.add_argument("--seed", required=True)
    p.add_argument("--out", default="dataset.vdl")
    p.add_argument("--train-count", default=None)
    p.add_argument("--train-frac", default=None)
    p.add_argument("--workers", default=1)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--params", default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train an inverse-dynamics model")
    p.add_argument("--model", choices=("mlp", "cnn"), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", default=200)
    p.add_argument("--batch-size", default=32)
    p.add_argument("--seed", required=True)
    p.add_argument("--widths", default="32,32,128,32,128")
    p.add_argument("--out", default=None)
    p.add_argument("--params", default=None)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid-search", help="rank hidden layer widths")
    p.add_argument("--model", choices=("mlp", "cnn"), default="mlp")
    p.add_argument("--data", required=True)
    p.add_argument("--epochs", default=200)
    p.add_argument("--batch-size", default=32)
    p.add_argument("--seed", required=True)
    p.add_argument("--candidates", default=None,
                   help="semicolon-separated width tuples, e.g. 32x32x128x32x128;64x64x64x64x64")
    p.add_argument("--out", default="grid_search.csv")
    p.set_defaults(func=cmd_grid_search)

    for name, help_text in (("eval", "closed-loop evaluation on a track"),
                            ("baseline", "closed-loop baselines only")):
        p = sub.add_parser(name, help=help_text)
        if name == "eval":
            p.add_argument("--controllers", default="cnn,mlp,pp,stanley")
            p.add_argument("--mlp", default=None, help="MLP checkpoint path")
            p.add_argument("--cnn", default=None, help="CNN checkpoint path")
        p.add_argument("--track", default=None, help="track file (default circuit)")
        p.add_argument("--v-ref", default=10.0)
        p.add_argument("--out-dir", default="eval_out")
        p.add_argument("--params", default=None)
        p.set_defaults(func=cmd_eval if name == "eval" else cmd_baseline)

    p = sub.add_parser("speed-limit", help="kinematic speed limit per radius")
    p.add_argument("--r", required=True, help="comma-separated radii [m]")
    p.add_argument("--mu", default=1.0)
    p.add_argument("--g", default=9.81)
    p.set_defaults(func=cmd_speed_limit)

    p = sub.add_parser("verify", help="re-check artifact integrity hashes")
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_verify)

    for name, sp in sub.choices.items():
        subparsers[name] = sp
    return parser, subparsers


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    try:
        if argv and argv[0] in subparsers:
            rest = _apply_config_defaults(subparsers[argv[0]], argv[1:])
            argv = [argv[0]] + rest
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, DatasetError, CheckpointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
