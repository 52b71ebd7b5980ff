"""The curriculum training loop: pick a task, train on one batch, reward the progress."""

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional, Protocol

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import (
    ConfigurationError,
    CurriculaError,
    InvalidInputError,
    check_positive_int,
    check_random_state,
)
from .bandit import RewardMapper, make_bandit

logger = logging.getLogger(__name__)


class LearnerInterface(Protocol):
    def eval_loss(self, batch) -> float:
        """Loss of the current parameters on ``batch``; must not change them."""

    def apply_update(self, batch) -> None:
        """Take one training step on ``batch``."""


class SchedulerError(CurriculaError, RuntimeError):
    """A run aborted; ``trace`` holds the records completed before the failure."""

    def __init__(self, message, step, trace):
        super().__init__(message)
        self.step = step
        self.trace = trace


@dataclass
class RunConfig:
    total_steps: int
    algorithm: str = "exp3s"
    K: int = 10
    bsize: int = 1
    epoch_length: Optional[int] = None
    seed: int = 0
    history_size: int = 1000

    def __post_init__(self):
        check_positive_int(self.total_steps, "total_steps")
        check_positive_int(self.K, "K")
        check_positive_int(self.bsize, "bsize")
        check_positive_int(self.history_size, "history_size")


@dataclass
class TraceRecord:
    step: int
    epoch: int
    chosen_k: int
    fallback_used: bool
    raw_gain: float
    mapped_reward: float
    policy: list
    train_loss: float
    selected_k: Optional[int] = None
    batch: tuple = ()


@dataclass
class RunTrace:
    config: RunConfig
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def policies(self):
        return np.array([r.policy for r in self.records], dtype=float)

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"config": asdict(self.config)}) + "\n")
            for rec in self.records:
                row = asdict(rec)
                row["batch"] = list(rec.batch)
                fh.write(json.dumps(row) + "\n")

    @classmethod
    def read(cls, path):
        """Load a trace file; malformed lines raise ``InvalidInputError`` with the line number."""
        config = None
        records = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    if config is None:
                        config = RunConfig(**obj["config"])
                        continue
                    obj["batch"] = tuple(obj.get("batch", ()))
                    rec = TraceRecord(**obj)
                    if len(rec.policy) != config.K:
                        raise ValueError(f"policy has {len(rec.policy)} entries, expected {config.K}")
                except (ValueError, KeyError, TypeError, CurriculaError) as exc:
                    raise InvalidInputError(f"{path}:{lineno}: malformed trace line ({exc})") from exc
                records.append(rec)
        if config is None:
            raise InvalidInputError(f"{path}: empty trace file")
        return cls(config, records)


def self_prediction_gain(learner, curriculum, k, train_batch, rng):
    """Loss drop on a fresh batch from task ``k`` caused by training on ``train_batch``.

    The evaluation batch is drawn with replacement, so it never consumes
    training data. It may coincide with ``train_batch`` in tiny tasks.
    """
    if train_batch.task_index != k:
        raise InvalidInputError(f"training batch belongs to task {train_batch.task_index}, not {k}")
    probe = curriculum.peek(k, rng)
    before = learner.eval_loss(probe)
    learner.apply_update(train_batch)
    after = learner.eval_loss(probe)
    return float(before - after)


def run_curriculum(curriculum, bandit, learner, config, rng=None, mapper=None):
    """Run the select / train / reward loop for ``config.total_steps`` batches.

    When the chosen task is exhausted the highest-policy task that still has
    batches is used instead. Once every task is exhausted all pools are
    rewound and a new epoch starts.
    """
    if curriculum.n_tasks != config.K:
        raise ConfigurationError(f"curriculum has {curriculum.n_tasks} tasks but config.K={config.K}")
    if bandit.n_arms != config.K:
        raise ConfigurationError(f"bandit has {bandit.n_arms} arms but config.K={config.K}")
    if curriculum.bsize != config.bsize:
        raise ConfigurationError(f"curriculum bsize={curriculum.bsize} but config.bsize={config.bsize}")
    rng = check_random_state(config.seed if rng is None else rng)
    mapper = mapper if mapper is not None else RewardMapper(config.history_size)
    trace = RunTrace(config)
    epoch = 1

    for t in range(1, config.total_steps + 1):
        try:
            policy = bandit.policy()
            selected = bandit.select(rng)
            k = selected
            fallback_used = False
            if curriculum.is_exhausted(k):
                if curriculum.all_exhausted():
                    curriculum.reset_epoch(rng)
                    epoch += 1
                    logger.debug("step %d: all tasks exhausted, starting epoch %d", t, epoch)
                else:
                    k = curriculum.fallback(policy)
                    fallback_used = True
            batch = curriculum.draw(k)
            train_loss = float(learner.eval_loss(batch))
            gain = self_prediction_gain(learner, curriculum, k, batch, rng)
            reward = mapper(gain)
            bandit.update(k, reward, raw_loss=train_loss)
        except Exception as exc:
            raise SchedulerError(f"step {t}: {type(exc).__name__}: {exc}", t, trace) from exc
        trace.records.append(TraceRecord(
            step=t,
            epoch=epoch,
            chosen_k=k,
            fallback_used=fallback_used,
            raw_gain=gain,
            mapped_reward=reward,
            policy=[float(p) for p in policy],
            train_loss=train_loss,
            selected_k=selected,
            batch=batch.utterance_ids,
        ))
    return trace


def export_policy_per_epoch(trace):
    """Mean policy vector of every epoch, in epoch order.

    SW-UCB# reports ``inf`` for arms absent from its window; each arm is
    averaged over the steps where its value is finite, and stays ``inf``
    only if it never was.
    """
    records = trace.records if isinstance(trace, RunTrace) else list(trace)
    if not records:
        raise InvalidInputError("cannot average the policy of an empty trace")
    grouped = {}
    for rec in records:
        grouped.setdefault(rec.epoch, []).append(rec.policy)
    out = []
    for epoch, rows in sorted(grouped.items()):
        arr = np.asarray(rows, dtype=float)
        finite = np.isfinite(arr)
        n = finite.sum(axis=0)
        total = np.where(finite, arr, 0.0).sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(n > 0, total / np.maximum(n, 1), np.inf)
        out.append((epoch, mean))
    return out


class CurriculumScheduler(BaseEstimator):
    """Estimator front end for :func:`run_curriculum`.

    ``fit(curriculum, learner)`` runs the loop and stores ``trace_``,
    ``bandit_`` and ``epoch_policy_``. Bandit hyperparameters not listed
    here can be passed through ``bandit_params``.
    """

    def __init__(self, algorithm="exp3s", total_steps=1000, history_size=1000,
                 bandit_params=None, random_state=0):
        self.algorithm = algorithm
        self.total_steps = total_steps
        self.history_size = history_size
        self.bandit_params = bandit_params
        self.random_state = random_state

    def fit(self, curriculum, learner):
        config = RunConfig(
            total_steps=self.total_steps,
            algorithm=self.algorithm,
            K=curriculum.n_tasks,
            bsize=curriculum.bsize,
            epoch_length=curriculum.n_tasks * curriculum.batches_per_task,
            seed=self.random_state,
            history_size=self.history_size,
        )
        self.bandit_ = make_bandit(self.algorithm, curriculum.n_tasks, **(self.bandit_params or {}))
        self.trace_ = run_curriculum(curriculum, self.bandit_, learner, config)
        self.epoch_policy_ = export_policy_per_epoch(self.trace_)
        return self

    def predict(self, X=None):
        """Task the fitted bandit currently rates highest."""
        policy = self.bandit_.policy()
        return len(policy) - int(np.argmax(policy[::-1]))
