"""Command-line entry points: ``coiabr <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, replace

from . import interest, nn
from .agents import dqn_train, save_agent
from .eval import (
    SessionMetrics,
    bin_by_interest_level,
    bins_csv,
    correlation_suite,
    correlations_csv,
    summarize_sessions,
    weight_bitrate_pairs,
)
from .experiment import (
    ConfigError,
    ExperimentConfig,
    SessionSource,
    evaluate_methods,
    load_config,
    validate_config,
)
from .media import generate_manifest, serialize_manifest
from .trace import generate_synthetic_trace, serialize_trace

log = logging.getLogger("coiabr")


class MissingInput(Exception):
    pass


def _write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as f:
        f.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    updates = {"seed": args.seed, "out_dir": args.out}
    if getattr(args, "methods", None):
        updates["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    for flag, key in (("sessions", "sessions"), ("traces", "traces_dir"), ("manifest", "manifest_path"),
                      ("coi_agent", "coi_agent"), ("constant_agent", "constant_agent")):
        value = getattr(args, flag, None)
        if value is not None:
            updates[key] = value
    cfg = replace(cfg, **{k: v for k, v in updates.items() if v is not None})
    if cfg.dqn.seed != cfg.seed:
        cfg = replace(cfg, dqn=replace(cfg.dqn, seed=cfg.seed))
    validate_config(cfg)
    return cfg


def cmd_gen_traces(args) -> None:
    cfg = _config(args)
    for i in range(args.count):
        seed = cfg.seed * 100_003 + i
        trace = generate_synthetic_trace(cfg.trace_profile, seed, name=f"trace_{i:03d}")
        _write(os.path.join(cfg.out_dir, f"trace_{i:03d}.csv"), serialize_trace(trace))


def cmd_gen_manifest(args) -> None:
    cfg = _config(args)
    m = generate_manifest(cfg.manifest, cfg.seed, name=args.name)
    _write(os.path.join(cfg.out_dir, f"{args.name}.json"), serialize_manifest(m) + "\n")


def cmd_train_dqn(args) -> None:
    cfg = _config(args)
    if args.train_sessions is not None:
        cfg = replace(cfg, dqn=replace(cfg.dqn, sessions=args.train_sessions))
    source = SessionSource(cfg, "train")
    result = dqn_train(source.env, cfg.dqn, weight_mode=args.weight_mode,
                       progress=lambda i, r: log.info("session %d reward %.1f", i, r))
    prefix = os.path.join(cfg.out_dir, f"agent_{args.weight_mode}")
    os.makedirs(cfg.out_dir, exist_ok=True)
    save_agent(result, prefix)
    _write(os.path.join(cfg.out_dir, f"reward_history_{args.weight_mode}.csv"),
           "session,reward\n" + "".join(f"{i},{r!r}\n" for i, r in enumerate(result.reward_history)))


def cmd_train_interest(args) -> None:
    cfg = _config(args)
    if args.features:
        if not os.path.exists(args.features):
            raise MissingInput(f"feature file not found: {args.features}")
        with open(args.features) as f:
            data = interest.load_features(f)
    else:
        data, _ = interest.planted_dataset(args.planted, args.dim, args.noise, seed=cfg.seed)
    rcfg = interest.RegressorConfig(epochs=args.epochs, seed=cfg.seed)
    result = interest.train_regressor(data, rcfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    nn.save_network(result.model, os.path.join(cfg.out_dir, "interest_model.json"))
    test_pred = interest.predict_interestingness(result.model, data.features[result.test_idx])
    errors = test_pred - data.labels[result.test_idx]
    metrics = {
        "test_mse": result.test_mse,
        "test_mean_abs_error": float(abs(errors).mean()),
        "test_mean_error": float(errors.mean()),
        "train_samples": len(result.train_idx),
        "test_samples": len(result.test_idx),
        "config": asdict(rcfg),
    }
    _write(os.path.join(cfg.out_dir, "interest_metrics.json"), _dump(metrics))
    _write(os.path.join(cfg.out_dir, "interest_loss_history.csv"),
           "epoch,train_mse\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(result.loss_history)))


def cmd_evaluate(args) -> None:
    cfg = _config(args)
    runs = evaluate_methods(cfg)
    sessions = [{"method": m, "session": i, **s.to_dict()} for m, i, s in runs]
    summary = summarize_sessions([(m, s) for m, _, s in runs])
    _write(os.path.join(cfg.out_dir, "sessions.json"), _dump(sessions))
    _write(os.path.join(cfg.out_dir, "summary.json"), _dump(summary.to_dict()))


def cmd_report(args) -> None:
    out = args.out
    path = os.path.join(out, "sessions.json")
    if not os.path.exists(path):
        raise MissingInput(f"missing evaluate output: {path} (run `evaluate` first)")
    with open(path) as f:
        rows = json.load(f)
    grouped: dict[str, list[SessionMetrics]] = {}
    for r in rows:
        grouped.setdefault(r["method"], []).append(SessionMetrics.from_dict(r))
    summary = summarize_sessions([(m, s) for m, ss in grouped.items() for s in ss])
    corr = {m: correlation_suite(weight_bitrate_pairs(ss)) for m, ss in grouped.items()}
    bins = {m: bin_by_interest_level(weight_bitrate_pairs(ss)) for m, ss in grouped.items()}
    _write(os.path.join(out, "table2.csv"), summary.table_csv())
    _write(os.path.join(out, "ecdf.csv"), summary.ecdf_csv())
    _write(os.path.join(out, "correlations.csv"), correlations_csv(corr))
    _write(os.path.join(out, "interest_bins.csv"), bins_csv(bins))
    report = {
        "stats": summary.stats,
        "correlations": corr,
        "interest_bins": {m: [{"lo": b.lo, "hi": b.hi, "count": b.count, "mean_bitrate": b.mean_bitrate}
                              for b in bs] for m, bs in bins.items()},
    }
    _write(os.path.join(out, "report.json"), _dump(report))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coiabr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="out", help="output directory")
        return p

    p = common(sub.add_parser("gen-traces", help="write synthetic trace CSVs"))
    p.add_argument("--count", type=int, default=10)
    p.set_defaults(func=cmd_gen_traces)

    p = common(sub.add_parser("gen-manifest", help="write a synthetic manifest JSON"))
    p.add_argument("--name", default="manifest")
    p.set_defaults(func=cmd_gen_manifest)

    p = common(sub.add_parser("train-dqn", help="train a DQN agent"))
    p.add_argument("--weight-mode", choices=("coi", "constant"), default="coi")
    p.add_argument("--train-sessions", type=int, help="number of training sessions")
    p.add_argument("--traces")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_train_dqn)

    p = common(sub.add_parser("train-interest", help="train the interestingness regressor"))
    p.add_argument("--features", help="CSV: chunk_id,label,features...")
    p.add_argument("--planted", type=int, default=5000, help="planted samples when no --features")
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--noise", type=float, default=0.14)
    p.add_argument("--epochs", type=int, default=50)
    p.set_defaults(func=cmd_train_interest)

    p = common(sub.add_parser("evaluate", help="run methods over evaluation sessions"))
    p.add_argument("--methods", help="comma-separated: bba,rba,mpc,coi,constant")
    p.add_argument("--sessions", type=int)
    p.add_argument("--traces")
    p.add_argument("--manifest")
    p.add_argument("--coi-agent", help="checkpoint prefix from train-dqn --weight-mode coi")
    p.add_argument("--constant-agent", help="checkpoint prefix from train-dqn --weight-mode constant")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="tables, ECDFs, correlations, interest bins from evaluate output")
    p.add_argument("--out", default="out", help="directory holding sessions.json")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse usage errors and --help
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ConfigError, MissingInput) as e:
        print(f"coiabr {args.command}: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        print(f"coiabr {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
