"""Exit criteria for the package. Each test prints one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary block at the
end of the pytest report lists every criterion.
"""

import statistics
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS
from curricula.bandit import Exp3S, SwUcb, make_bandit, window_length
from curricula.cli import main
from curricula.curriculum import difficulty, partition, synthetic_curriculum
from curricula.scheduler import RunConfig, run_curriculum
from curricula.scoring import (
    ScoredUtterance,
    compression_ratio,
    speech_like_signal,
    synth_noisy_mixture,
    write_wav,
)
from curricula.simlearner import SimLearner

SEEDS = range(20)

# Median final-quarter best-arm frequency of the pure-Python oracle in
# tests/oracles.py (exp3s_bernoulli_run, seeds 0..19) is 0.9073; the bar sits
# 0.02 below it to absorb floating-point divergence between the two paths.
EXP3S_STATIONARY_BAR = 0.887


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_RESULTS.append(line)
    print(line)
    assert ok, line


def test_1_compression_ratio_tracks_noise():
    start = time.perf_counter()
    ordered = 0
    for seed in range(10):
        clean = speech_like_signal(5.0, seed=seed)
        crs = [compression_ratio(clean.pcm_bytes())]
        crs += [compression_ratio(synth_noisy_mixture(clean, snr, seed).pcm_bytes()) for snr in (15, 10, 5, 0)]
        ordered += all(a > b for a, b in zip(crs, crs[1:]))
    elapsed = time.perf_counter() - start
    report(1, "CR(clean) > CR(15) > CR(10) > CR(5) > CR(0)", ordered >= 9 and elapsed < 60,
           f"{ordered}/10 seeds ordered, {elapsed:.1f}s")


def test_2_partition_invariants():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    failures = 0
    for trial in range(200):
        K = int(rng.integers(2, 11))
        bsize = int(rng.integers(1, 5))
        n = int(rng.integers(K * bsize, 6 * K * bsize + 7))
        metric = ["CR", "SL", "SN"][trial % 3]
        raw = rng.normal(size=n)
        if trial % 4 == 0:
            raw = np.round(raw, 1)  # force ties
        utts = [ScoredUtterance(id=f"t{trial}-{i}", score=float(s)) for i, s in enumerate(raw)]
        cur = partition(utts, K, bsize, rng_seed=trial, metric=metric)
        sizes = {len(t.batches) for t in cur.tasks}
        ids = [uid for t in cur.tasks for b in t.batches for uid in b.utterance_ids]
        ordered = True
        for k in range(1, K):
            here = [difficulty(cur.scores[u], metric) for b in cur.task(k).batches for u in b.utterance_ids]
            nxt = [difficulty(cur.scores[u], metric) for b in cur.task(k + 1).batches for u in b.utterance_ids]
            ordered &= max(here) <= min(nxt)
        ok = sizes == {n // (K * bsize)} and len(ids) == len(set(ids)) and ordered
        failures += not ok
    elapsed = time.perf_counter() - start
    report(2, "equal batch counts, cross-task ordering, no duplicates", failures == 0 and elapsed < 30,
           f"{200 - failures}/200 score sets, {elapsed:.1f}s")


def test_3_exp3s_normalization():
    start = time.perf_counter()
    K, eps = 10, 0.05
    bandit = Exp3S(K, exploration=eps).reset()
    rng = np.random.default_rng(3)
    arms = rng.integers(1, K + 1, 100_000).tolist()
    rewards = rng.uniform(-1, 1, 100_000).tolist()
    worst_sum, worst_min = 0.0, 1.0
    for k, r in zip(arms, rewards):
        bandit.update(k, r)
        p = bandit.policy()
        worst_sum = max(worst_sum, abs(p.sum() - 1.0))
        worst_min = min(worst_min, p.min())
    elapsed = time.perf_counter() - start
    ok = worst_sum <= 1e-9 and worst_min >= eps / K - 1e-12 and elapsed < 30
    report(3, "policy sums to 1 and stays above eps/K", ok,
           f"max |sum-1|={worst_sum:.2e}, min pi={worst_min:.6f}, {elapsed:.1f}s")


def bernoulli_run(bandit, seed, T=20_000, swap_at=None):
    rng = np.random.default_rng(seed)
    env = np.random.default_rng(seed + 1000)
    probs = [0.9, 0.1]
    picks = np.empty(T, dtype=int)
    for t in range(1, T + 1):
        if swap_at is not None and t == swap_at + 1:
            probs = [0.1, 0.9]
        k = bandit.select(rng)
        bandit.update(k, 1.0 if env.random() < probs[k - 1] else 0.0)
        picks[t - 1] = k
    best = 2 if swap_at is not None else 1
    return float(np.mean(picks[3 * T // 4:] == best))


def test_4_exp3s_stationary():
    start = time.perf_counter()
    freqs = [bernoulli_run(Exp3S(2).reset(), seed) for seed in SEEDS]
    median = statistics.median(freqs)
    elapsed = time.perf_counter() - start
    ok = median > 0.5 and median >= EXP3S_STATIONARY_BAR and elapsed < 120
    report(4, "EXP3.S finds the better Bernoulli arm", ok,
           f"median final-quarter freq {median:.4f} (bar {EXP3S_STATIONARY_BAR}), {elapsed:.1f}s")


def test_5_swucb_nonstationary():
    start = time.perf_counter()
    T = 20_000
    freqs = [bernoulli_run(SwUcb(2).reset(), seed, T=T, swap_at=T // 2) for seed in SEEDS]
    median = statistics.median(freqs)
    expected = {10: (10, 10), 100: (76, 100), 1000: (191, 1000)}
    windows = {t: (window_length(t, 12, 0.4), window_length(t, 12, 0.8)) for t in expected}
    windows_ok = windows == expected and all(a <= b for a, b in windows.values())
    elapsed = time.perf_counter() - start
    ok = median >= 0.5 and windows_ok and elapsed < 120
    report(5, "SW-UCB# tracks a swapped best arm; abrupt windows <= slow windows", ok,
           f"median post-swap freq {median:.4f}, windows {windows}, {elapsed:.1f}s")


def final_losses(algorithm, params):
    K, T = 10, 5000
    out = []
    for seed in SEEDS:
        cur = synthetic_curriculum(K, batches_per_task=1000, seed=seed)
        learner = SimLearner(K, gating=True, seed=seed)
        bandit = make_bandit(algorithm, K, **params)
        run_curriculum(cur, bandit, learner, RunConfig(total_steps=T, algorithm=algorithm, K=K, seed=seed))
        out.append(learner.total_loss())
    return out


@pytest.mark.slow
def test_6_end_to_end_benefit():
    start = time.perf_counter()
    # Full exploration turns EXP3.S into uniform random task selection.
    uniform = statistics.median(final_losses("exp3s", {"exploration": 1.0}))
    exp3s = statistics.median(final_losses("exp3s", {}))
    swucb = statistics.median(final_losses("swucb", {}))
    elapsed = time.perf_counter() - start
    report(6, "bandit curricula end no worse than uniform sampling", exp3s <= uniform and swucb <= uniform,
           f"median final loss uniform={uniform:.4f} exp3s={exp3s:.4f} swucb={swucb:.4f}, {elapsed:.1f}s")


class CallLog:
    def __init__(self, inner=None):
        self.calls = []
        self.inner = inner

    def eval_loss(self, batch):
        self.calls.append(("eval", batch))
        return self.inner.eval_loss(batch) if self.inner else 1.0

    def apply_update(self, batch):
        self.calls.append(("update", batch))
        if self.inner:
            self.inner.apply_update(batch)


def test_7_self_prediction_gain_protocol():
    cur = synthetic_curriculum(5, batches_per_task=40)
    log = CallLog(SimLearner(5, seed=1))
    trace = run_curriculum(cur, Exp3S(5).reset(), log, RunConfig(total_steps=100, K=5))
    bad_steps = 0
    for t, rec in enumerate(trace.records):
        chunk = log.calls[4 * t:4 * t + 4]
        kinds = [c[0] for c in chunk]
        probe_ok = chunk[1][1] is chunk[3][1] and chunk[1][1].task_index == rec.chosen_k
        update_ok = chunk[2][1].utterance_ids == rec.batch
        bad_steps += not (kinds == ["eval", "eval", "update", "eval"] and probe_ok and update_ok)
    bad_steps += len(log.calls) != 400

    cur = synthetic_curriculum(5, batches_per_task=40)
    noop = run_curriculum(cur, Exp3S(5).reset(), CallLog(), RunConfig(total_steps=100, K=5))
    zeros = all(r.raw_gain == 0.0 and r.mapped_reward == 0.0 for r in noop.records)
    report(7, "eval B' -> update B -> eval B' every step; no-op learner gives zero rewards",
           bad_steps == 0 and zeros, f"{100 - bad_steps}/100 steps in order, zero gains={zeros}")


class FixedChoice:
    n_arms = 2

    def policy(self):
        return np.array([0.6, 0.4])

    def select(self, rng):
        return 1

    def update(self, k, reward, raw_loss=None):
        pass


def test_8_exhaustion_fallback():
    cur = synthetic_curriculum(2, batches_per_task=1)
    b1 = cur.task(1).batches[0].utterance_ids
    b2 = cur.task(2).batches[0].utterance_ids
    trace = run_curriculum(cur, FixedChoice(), CallLog(), RunConfig(total_steps=4, K=2))
    got = [(r.epoch, r.chosen_k, r.fallback_used, r.batch) for r in trace.records]
    expected = [(1, 1, False, b1), (1, 2, True, b2), (2, 1, False, b1), (2, 2, True, b2)]
    resets = sum(1 for a, b in zip(trace.records, trace.records[1:]) if b.epoch != a.epoch)
    report(8, "2 tasks x 1 batch, T=4 matches the hand-derived trace", got == expected and resets == 1,
           f"(epoch, task, fallback) = {[g[:3] for g in got]}")


def _run_all_commands(workdir: Path):
    workdir.mkdir()
    write_wav(workdir / "clean.wav", speech_like_signal(1.0, seed=8))
    rows = [f'{{"id": "u{i:03d}", "audio": "clean.wav", "text": "{"w " * (i % 13 + 1)}"}}' for i in range(60)]
    (workdir / "m.jsonl").write_text("\n".join(rows) + "\n")
    codes = [
        main(["score", str(workdir / "m.jsonl"), "--metric", "SL", "--out", str(workdir / "scored.jsonl")]),
        main(["mix", str(workdir / "clean.wav"), "--seed", "4", "--out", str(workdir / "mix")]),
        main(["partition", str(workdir / "scored.jsonl"), "--K", "5", "--bsize", "2", "--seed", "4",
              "--out", str(workdir / "cur.json")]),
        main(["run-sim", "--curriculum", str(workdir / "cur.json"), "--algorithm", "swucb", "--T", "200",
              "--seed", "4", "--out", str(workdir / "trace.jsonl")]),
        main(["run-sim", "--synthetic", "--algorithm", "exp3s", "--T", "200", "--seed", "4",
              "--out", str(workdir / "trace2.jsonl")]),
        main(["export-policy", str(workdir / "trace.jsonl"), "--out", str(workdir / "policy.csv")]),
    ]
    files = {p.relative_to(workdir).as_posix(): p.read_bytes() for p in sorted(workdir.rglob("*")) if p.is_file()}
    return codes, files


def test_9_cli_determinism(tmp_path):
    codes_a, files_a = _run_all_commands(tmp_path / "a")
    codes_b, files_b = _run_all_commands(tmp_path / "b")
    same = files_a.keys() == files_b.keys() and all(files_a[k] == files_b[k] for k in files_a)
    ok = codes_a == codes_b == [0] * 6 and same
    report(9, "every subcommand twice with the same seed gives identical files", ok,
           f"exit codes {codes_a}, {len(files_a)} files compared, identical={same}")
