"""Command-line driver and owner of all file formats.

Subcommands: generate, train-rl, train-supervised, evaluate. All commands
are deterministic given --config and --seed; rerunning one produces
byte-identical output files. Exit codes: 0 success, 2 config error, 3 data
error, 4 evaluation mismatch.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import baseline, checkpoint, datagen, evaluate, lac
from .battery import DegradationParams, LoadProfile, Trajectory
from .configio import RunConfig, load_run_config
from .errors import (BattcalError, ConfigInvalid, KindMismatch,
                     SchemaMismatch)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_EVAL = 4

DATASET_COLUMNS = ("trajectory_id", "split", "t", "dt", "current_A",
                   "q_sp", "q_bp", "q_bn", "q_sn", "v_o", "v_eta_p",
                   "v_eta_n", "voltage_V", "q_max_true", "r_o_true")

TRAINING_LOG_COLUMNS = ("step", "episode", "cumulative_cost",
                        "mean_abs_param_error", "beta", "lambda",
                        "critic_loss", "actor_loss", "entropy")

TRACKING_COLUMNS = ("trajectory_id", "t", "param", "true_param",
                    "inferred_param")

REPORT_COLUMNS = ("trajectory_id", "steps", "param", "mean_abs_error",
                  "mean_rel_error", "bias", "inferred_std", "discounted_cost")


def _fmt(v) -> str:
    """Full-precision decimal: repr of a float round-trips bit-exactly."""
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -- dataset files ----------------------------------------------------------

def write_dataset_csv(path: Path, dataset: datagen.Dataset) -> None:
    """One row per timestep per trajectory, ordered by (trajectory_id, t).

    Row t carries state and voltage at t; current_A is the load applied over
    [t, t+1) and is empty on each trajectory's final row.
    """
    split_of = {t.trajectory_id: "train" for t in dataset.train}
    split_of.update({t.trajectory_id: "test" for t in dataset.test})
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_COLUMNS)
        for traj in sorted(dataset.trajectories, key=lambda t: t.trajectory_id):
            split = split_of[traj.trajectory_id]
            n = len(traj)
            for t in range(n + 1):
                cur = _fmt(float(traj.loads.currents[t])) if t < n else ""
                w.writerow([traj.trajectory_id, split, t,
                            _fmt(traj.loads.dt), cur]
                           + [_fmt(float(x)) for x in traj.states[t]]
                           + [_fmt(float(traj.voltages[t])),
                              _fmt(traj.params.q_max),
                              _fmt(traj.params.r_o)])


def read_dataset_csv(path: Path) -> tuple[list[Trajectory], list[Trajectory]]:
    """Inverse of write_dataset_csv; returns (train, test) lists."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise SchemaMismatch(f"cannot open dataset: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(DATASET_COLUMNS):
            raise SchemaMismatch(f"unexpected dataset header in {path}")
        groups: dict[int, list[list[str]]] = {}
        splits: dict[int, str] = {}
        order: list[int] = []
        for row in reader:
            tid = int(row[0])
            if tid not in groups:
                groups[tid] = []
                splits[tid] = row[1]
                order.append(tid)
            groups[tid].append(row)
    train, test = [], []
    for tid in order:
        rows = groups[tid]
        dt = float(rows[0][3])
        states = np.array([[float(x) for x in r[5:12]] for r in rows])
        voltages = np.array([float(r[12]) for r in rows])
        currents = np.array([float(r[4]) for r in rows[:-1]])
        params = DegradationParams(q_max=float(rows[0][13]),
                                   r_o=float(rows[0][14]))
        traj = Trajectory(params=params,
                          loads=LoadProfile(currents, dt=dt),
                          states=states, voltages=voltages,
                          trajectory_id=tid, seed=tid)
        (train if splits[tid] == "train" else test).append(traj)
    return train, test


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: Path, dataset: datagen.Dataset,
                   csv_path: Path) -> None:
    spec = dataset.spec
    doc = {
        "version": 1,
        "spec": {
            "target": spec.target,
            "count": spec.count,
            "q_max_range": list(spec.ranges.q_max),
            "r_o_range": list(spec.ranges.r_o),
            "segment_range": list(spec.segment_range),
            "current_range": list(spec.current_range),
            "max_steps": spec.max_steps,
            "split_fraction": spec.split_fraction,
            "seed": spec.seed,
        },
        "train_count": len(dataset.train),
        "test_count": len(dataset.test),
        "train_ids": sorted(t.trajectory_id for t in dataset.train),
        "test_ids": sorted(t.trajectory_id for t in dataset.test),
        "csv_sha256": _sha256(csv_path),
    }
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


# -- log and report files ---------------------------------------------------

def write_training_log(path: Path, logs) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAINING_LOG_COLUMNS)
        for row in logs:
            w.writerow([row.step, row.episode, _fmt(row.cumulative_cost),
                        _fmt(row.mean_abs_param_error), _fmt(row.beta),
                        _fmt(row.lam), _fmt(row.critic_loss),
                        _fmt(row.actor_loss), _fmt(row.entropy)])


def write_supervised_log(path: Path, losses) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("epoch", "train_mse"))
        for i, loss in enumerate(losses, start=1):
            w.writerow([i, _fmt(loss)])


def write_tracking_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACKING_COLUMNS)
        for r in rows:
            w.writerow([r.trajectory_id, r.t, r.param, _fmt(r.true_param),
                        _fmt(r.inferred_param)])


def write_eval_report(path: Path, report: evaluate.EvalReport) -> None:
    """Per-trajectory rows followed by 'aggregate' rows with the means."""
    names = report.param_names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in report.per_trajectory:
            for i, name in enumerate(names):
                w.writerow([r.trajectory_id, r.steps, name,
                            _fmt(float(r.mean_abs_error[i])),
                            _fmt(float(r.mean_rel_error[i])),
                            _fmt(float(r.bias[i])),
                            _fmt(float(r.inferred_std[i])),
                            _fmt(r.discounted_cost)])
        for i, name in enumerate(names):
            w.writerow(["aggregate", "", name,
                        _fmt(float(report.mean_abs_error[i])),
                        _fmt(float(report.mean_rel_error[i])),
                        _fmt(float(report.bias[i])),
                        _fmt(float(report.inferred_std[i])),
                        _fmt(report.mean_discounted_cost)])


# -- commands ---------------------------------------------------------------

def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> RunConfig:
    return load_run_config(args.config, seed_override=args.seed,
                           desk=args.desk)


def cmd_generate(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    dataset = datagen.generate(config.dataset, jobs=args.jobs)
    csv_path = out / "dataset.csv"
    write_dataset_csv(csv_path, dataset)
    write_manifest(out / "manifest.json", dataset, csv_path)
    print(f"wrote {csv_path} ({len(dataset.train)} train, "
          f"{len(dataset.test)} test trajectories)")
    return EXIT_OK


def _dataset_path(args, out: Path) -> Path:
    return Path(args.dataset) if args.dataset else out / "dataset.csv"


def cmd_train_rl(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    train_set, _ = read_dataset_csv(_dataset_path(args, out))
    agent = None
    if args.resume:
        agent, _doc = checkpoint.load_rl(args.resume)
    env_config = config.env_config()

    def progress(step, row):
        if args.verbose:
            print(f"step {step} episode {row.episode} "
                  f"cost {row.cumulative_cost:.3f} "
                  f"abs_err {row.mean_abs_param_error:.6f}", flush=True)

    agent, logs = lac.train(train_set, env_config, config.lac,
                            progress=progress, agent=agent)
    ckpt_path = out / "rl_checkpoint.json"
    checkpoint.save_rl(ckpt_path, agent, config_hash=config.content_hash())
    write_training_log(out / "rl_training_log.csv", logs)
    print(f"wrote {ckpt_path} after {agent.total_steps_trained} total steps")
    return EXIT_OK


def cmd_train_supervised(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    train_set, _ = read_dataset_csv(_dataset_path(args, out))
    env_config = config.env_config()
    inputs, labels = baseline.build_labeled_dataset(train_set, env_config)

    def progress(epoch, mse):
        if args.verbose:
            print(f"epoch {epoch} train_mse {mse:.8f}", flush=True)

    reg, losses = baseline.train_supervised(inputs, labels, env_config,
                                            config.supervised,
                                            progress=progress)
    ckpt_path = out / "supervised_checkpoint.json"
    checkpoint.save_supervised(ckpt_path, reg,
                               config_hash=config.content_hash())
    write_supervised_log(out / "supervised_training_log.csv", losses)
    print(f"wrote {ckpt_path} after {len(losses)} epochs")
    return EXIT_OK


def _eval_chunk(payload):
    model, chunk, env_config, gamma, mode = payload
    if mode == "rl":
        return evaluate.evaluate_rl(model, chunk, env_config, gamma)
    return evaluate.evaluate_supervised(model, chunk, env_config, gamma)


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    out = _out_dir(args)
    _, test_set = read_dataset_csv(_dataset_path(args, out))
    env_config = config.env_config()
    kind = checkpoint.peek_kind(args.checkpoint)
    if kind != args.mode:
        raise KindMismatch(f"checkpoint kind {kind!r} cannot be evaluated "
                           f"in {args.mode!r} mode")
    if args.mode == "rl":
        model, _doc = checkpoint.load_rl(args.checkpoint)
    else:
        model, _doc = checkpoint.load_supervised(args.checkpoint, env_config,
                                                 config.supervised)
    gamma = config.lac.gamma
    if args.jobs > 1 and len(test_set) > 1:
        import multiprocessing

        chunks = [test_set[i::args.jobs] for i in range(args.jobs)]
        chunks = [c for c in chunks if c]
        with multiprocessing.Pool(len(chunks)) as pool:
            parts = pool.map(_eval_chunk,
                             [(model, c, env_config, gamma, args.mode)
                              for c in chunks])
        report = evaluate.EvalReport(target=env_config.target, mode=args.mode)
        rows = []
        per_traj = {}
        for part_report, part_rows in parts:
            for r in part_report.per_trajectory:
                per_traj[r.trajectory_id] = r
            rows.extend(part_rows)
        # restore input order so output files match a single-job run
        report.per_trajectory = [per_traj[t.trajectory_id] for t in test_set]
        rows = _order_rows(rows, test_set)
    else:
        if args.mode == "rl":
            report, rows = evaluate.evaluate_rl(model, test_set, env_config,
                                                gamma)
        else:
            report, rows = evaluate.evaluate_supervised(model, test_set,
                                                        env_config, gamma)
    write_eval_report(out / f"eval_report_{args.mode}.csv", report)
    write_tracking_csv(out / f"tracking_{args.mode}.csv", rows)
    for metric, param, value in report.summary_rows():
        label = f"{metric}[{param}]" if param else metric
        print(f"{label} = {value:.6g}")
    return EXIT_OK


def _order_rows(rows, test_set):
    pos = {t.trajectory_id: i for i, t in enumerate(test_set)}
    return sorted(rows, key=lambda r: (pos[r.trajectory_id], r.t, r.param))


# -- entrypoint -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="battcal",
        description="Battery degradation-parameter calibration: "
                    "reinforcement-learning tracking vs supervised mapping.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None,
                       help="path to a key = value config file")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides run.seed)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--desk", action="store_true",
                       help="desk-scale profile: 500 trajectories, 100k steps")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel workers where supported")
        p.add_argument("--verbose", action="store_true",
                       help="per-episode / per-epoch progress lines")

    p = sub.add_parser("generate", help="simulate a trajectory dataset")
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train-rl", help="train the calibration agent")
    common(p)
    p.add_argument("--dataset", default=None,
                   help="dataset CSV (default: <out>/dataset.csv)")
    p.add_argument("--resume", default=None,
                   help="checkpoint to continue training from")
    p.set_defaults(func=cmd_train_rl)

    p = sub.add_parser("train-supervised",
                       help="train the direct-mapping baseline")
    common(p)
    p.add_argument("--dataset", default=None,
                   help="dataset CSV (default: <out>/dataset.csv)")
    p.set_defaults(func=cmd_train_supervised)

    p = sub.add_parser("evaluate", help="score a checkpoint on the test split")
    common(p)
    p.add_argument("--dataset", default=None,
                   help="dataset CSV (default: <out>/dataset.csv)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=("rl", "supervised"), required=True)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KindMismatch as exc:
        print(f"evaluation mismatch: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except (BattcalError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
