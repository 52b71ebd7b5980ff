"""Command-line entry point: ``curricula {score,mix,partition,run-sim,export-policy}``.

Exit codes: 0 success, 1 bad input data, 2 bad configuration.
"""

import argparse
import csv
import json
import logging
import os
import statistics
import sys
from pathlib import Path

import numpy as np

from ._validation import ConfigurationError, CurriculaError
from .bandit import make_bandit
from .curriculum import Curriculum, partition, synthetic_curriculum
from .scheduler import RunConfig, RunTrace, SchedulerError, export_policy_per_epoch, run_curriculum
from .scoring import (
    METRICS,
    DifficultyScorer,
    EmbeddingTable,
    compression_ratio,
    read_manifest,
    read_wav,
    speech_like_signal,
    synth_noisy_mixture,
    write_manifest,
    write_wav,
)
from .simlearner import SimLearner

logger = logging.getLogger("curricula")

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2


def _fmt(x):
    return f"{x:.6g}"


def cmd_score(args):
    if args.metric == "SN" and not args.embeddings:
        raise ConfigurationError("metric SN requires --embeddings")
    table = EmbeddingTable.load(args.embeddings) if args.embeddings else None
    _, utterances = read_manifest(args.manifest)
    scorer = DifficultyScorer(
        metric=args.metric, embeddings=table, base_dir=Path(args.manifest).parent, n_jobs=args.jobs
    ).fit()
    scores = scorer.transform(utterances)
    for utt, score in zip(utterances, scores):
        utt.score = float(score)
    write_manifest(args.out, utterances, header=scorer.header())
    if len(scores):
        print(f"metric={args.metric} n={len(scores)} min={_fmt(scores.min())} "
              f"median={_fmt(float(np.median(scores)))} max={_fmt(scores.max())}")
    else:
        print(f"metric={args.metric} n=0")
    return EXIT_OK


def _parse_snrs(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError(f"--snr expects comma-separated numbers, got {text!r}") from None


def cmd_mix(args):
    snrs = _parse_snrs(args.snr)
    if args.clean is not None:
        clean = read_wav(args.clean)
    else:
        clean = speech_like_signal(args.synthetic_seconds, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.clean is None:
        write_wav(out / "clean.wav", clean)
    rows = [("clean", "inf", compression_ratio(clean.pcm_bytes()))]
    for snr in sorted(snrs, reverse=True):
        mixture = synth_noisy_mixture(clean, snr, args.seed)
        write_wav(out / f"mix_snr{snr:g}dB.wav", mixture)
        rows.append((f"snr{snr:g}", f"{snr:g}", compression_ratio(mixture.pcm_bytes())))
    with open(out / "compression_ratio.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["signal", "snr_db", "compression_ratio"])
        for name, snr, cr in rows:
            writer.writerow([name, snr, repr(cr)])
    for name, snr, cr in rows:
        print(f"{name:>10}  CR={cr:.5f}")
    return EXIT_OK


def cmd_partition(args):
    header, utterances = read_manifest(args.manifest)
    metric = args.metric or (header or {}).get("metric")
    if metric is None:
        raise ConfigurationError("scored manifest has no header metric; pass --metric")
    if metric not in METRICS:
        raise ConfigurationError(f"unknown metric {metric!r}")
    curriculum = partition(utterances, args.K, args.bsize, rng_seed=args.seed, metric=metric)
    curriculum.save(args.out)
    print(f"metric={metric} K={curriculum.n_tasks} bsize={curriculum.bsize} "
          f"batches_per_task={curriculum.batches_per_task} discarded={curriculum.n_discarded}")
    for task in curriculum.tasks:
        lo, hi = curriculum.score_range(task.index)
        print(f"task {task.index:>3}: scores [{_fmt(lo)}, {_fmt(hi)}]")
    return EXIT_OK


def _bandit_params(args):
    if args.algorithm == "exp3s":
        return {"exploration": args.epsilon, "learning_rate": args.eta, "reward_offset": args.beta}
    return {
        "window_scale": args.lam,
        "abrupt_exponent": args.gamma,
        "slow_exponent": args.kappa,
        "mode_threshold": args.nu,
    }


def cmd_run_sim(args):
    if args.curriculum:
        curriculum = Curriculum.load(args.curriculum)
        if args.K is not None and args.K != curriculum.n_tasks:
            raise ConfigurationError(f"--K {args.K} disagrees with curriculum K={curriculum.n_tasks}")
    else:
        curriculum = synthetic_curriculum(args.K or 10, args.batches_per_task, args.bsize or 1, seed=args.seed)
    K = curriculum.n_tasks

    if args.learner_config:
        with open(args.learner_config, encoding="utf-8") as fh:
            learner_cfg = json.load(fh)
    else:
        learner_cfg = {}
    learner_cfg.setdefault("n_tasks", K)
    learner_cfg.setdefault("seed", args.seed)
    if learner_cfg["n_tasks"] != K:
        raise ConfigurationError(f"learner config has n_tasks={learner_cfg['n_tasks']} but curriculum K={K}")
    try:
        learner = SimLearner.from_config(learner_cfg)
    except TypeError as exc:
        raise ConfigurationError(f"bad learner config: {exc}") from exc

    config = RunConfig(
        total_steps=args.T,
        algorithm=args.algorithm,
        K=K,
        bsize=curriculum.bsize,
        epoch_length=K * curriculum.batches_per_task,
        seed=args.seed,
        history_size=args.history_size,
    )
    bandit = make_bandit(args.algorithm, K, **_bandit_params(args))
    trace = run_curriculum(curriculum, bandit, learner, config)
    trace.write(args.out)
    final_epoch, final_policy = export_policy_per_epoch(trace)[-1]
    print(f"algorithm={args.algorithm} steps={len(trace)} batches_consumed={len(trace)} "
          f"epochs={final_epoch} final_total_loss={_fmt(learner.total_loss())}")
    print("final mean policy: " + " ".join(_fmt(p) for p in final_policy))
    return EXIT_OK


def cmd_export_policy(args):
    trace = RunTrace.read(args.trace)
    rows = export_policy_per_epoch(trace)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch"] + [f"policy_{k}" for k in range(1, trace.config.K + 1)])
        for epoch, policy in rows:
            writer.writerow([epoch] + [repr(float(p)) for p in policy])
    print(f"epochs={len(rows)} K={trace.config.K} records={len(trace)}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="curricula", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score a JSON-lines manifest")
    p.add_argument("manifest")
    p.add_argument("--metric", required=True, choices=METRICS)
    p.add_argument("--embeddings", help="embedding table, required for SN")
    p.add_argument("--jobs", type=int, default=None, help="scoring threads")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("mix", help="noisy mixtures and their compression ratios")
    p.add_argument("clean", nargs="?", help="16-bit mono WAV; omit to synthesize one")
    p.add_argument("--snr", default="15,10,5,0", help="comma-separated SNRs in dB")
    p.add_argument("--synthetic-seconds", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("partition", help="split a scored manifest into K tasks")
    p.add_argument("manifest")
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--bsize", type=int, default=1)
    p.add_argument("--metric", choices=METRICS, help="override the manifest header")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("run-sim", help="run the scheduler against the simulated learner")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--curriculum", help="curriculum JSON from 'partition'")
    src.add_argument("--synthetic", action="store_true", help="use a synthetic curriculum")
    p.add_argument("--algorithm", choices=("exp3s", "swucb"), default="exp3s")
    p.add_argument("--T", type=int, default=1000)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--bsize", type=int, default=None)
    p.add_argument("--batches-per-task", type=int, default=100)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--eta", type=float, default=0.001)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float, default=12.0)
    p.add_argument("--gamma", type=float, default=0.4)
    p.add_argument("--kappa", type=float, default=0.8)
    p.add_argument("--nu", type=float, default=0.1)
    p.add_argument("--history-size", type=int, default=1000)
    p.add_argument("--learner-config", help="SimLearner JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="trace JSON-lines file")
    p.set_defaults(func=cmd_run_sim)

    p = sub.add_parser("export-policy", help="per-epoch mean policy CSV from a trace")
    p.add_argument("trace")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_policy)
    return parser


def _configure_logging():
    level = os.environ.get("CURRICULA_LOG", "error").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.ERROR),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv=None):
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchedulerError as exc:
        cause = exc.__cause__
        code = EXIT_CONFIG if isinstance(cause, ConfigurationError) else EXIT_INPUT
        print(f"error: {exc}", file=sys.stderr)
        return code
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CurriculaError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
