"""Split scored utterances into K difficulty-ordered tasks with without-replacement pools.

Task indices are 1-based and grow with difficulty: task 1 is the easiest block,
task K the hardest.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import (
    CurriculaError,
    InvalidInputError,
    check_arm,
    check_positive_int,
    check_random_state,
)
from .scoring import METRICS, ScoredUtterance

logger = logging.getLogger(__name__)

# Metrics where a lower score means a harder example.
LOWER_IS_HARDER = frozenset({"CR"})


class InsufficientDataError(CurriculaError, ValueError):
    def __init__(self, available, required):
        super().__init__(f"need at least {required} scored utterances, got {available}")
        self.available = available
        self.required = required


def difficulty(score, metric):
    """Map a metric score to a value that increases with hardness."""
    return -score if metric in LOWER_IS_HARDER else score


@dataclass(frozen=True)
class Batch:
    utterance_ids: tuple
    task_index: int


@dataclass
class Task:
    index: int
    batches: list
    cursor: int = 0

    @property
    def exhausted(self):
        return self.cursor >= len(self.batches)

    @property
    def remaining(self):
        return len(self.batches) - self.cursor


@dataclass
class Curriculum:
    tasks: list
    metric: str
    bsize: int
    seed: Optional[int] = None
    scores: dict = field(default_factory=dict)
    n_discarded: int = 0

    @property
    def n_tasks(self):
        return len(self.tasks)

    @property
    def batches_per_task(self):
        return len(self.tasks[0].batches)

    def task(self, k):
        return self.tasks[check_arm(k, self.n_tasks) - 1]

    def is_exhausted(self, k):
        return self.task(k).exhausted

    def all_exhausted(self):
        return all(t.exhausted for t in self.tasks)

    def draw(self, k):
        """Next unconsumed batch of task ``k``, or ``None`` once the task is used up."""
        task = self.task(k)
        if task.exhausted:
            return None
        batch = task.batches[task.cursor]
        task.cursor += 1
        return batch

    def peek(self, k, rng):
        """Uniformly random batch of task ``k``; the cursor is not touched."""
        task = self.task(k)
        if not task.batches:
            raise InvalidInputError(f"task {k} has no batches")
        rng = check_random_state(rng)
        return task.batches[int(rng.integers(len(task.batches)))]

    def fallback(self, policy):
        """Non-exhausted task with the highest policy value, or ``None``.

        Ties go to the larger (harder) task index.
        """
        policy = np.asarray(policy, dtype=float)
        if policy.shape != (self.n_tasks,):
            raise InvalidInputError(f"policy must have length {self.n_tasks}, got {policy.shape}")
        best = None
        for task in self.tasks:
            if task.exhausted:
                continue
            if best is None or policy[task.index - 1] >= policy[best - 1]:
                best = task.index
        return best

    def reset_epoch(self, rng):
        """Rewind every task and reshuffle the order of its batches."""
        rng = check_random_state(rng)
        for task in self.tasks:
            order = rng.permutation(len(task.batches))
            task.batches = [task.batches[i] for i in order]
            task.cursor = 0
        return self

    def membership(self):
        """Map each utterance id to its task index."""
        return {uid: task.index for task in self.tasks for b in task.batches for uid in b.utterance_ids}

    def score_range(self, k):
        vals = [self.scores[uid] for b in self.task(k).batches for uid in b.utterance_ids if uid in self.scores]
        if not vals:
            return None
        return min(vals), max(vals)

    def to_dict(self):
        return {
            "metric": self.metric,
            "K": self.n_tasks,
            "bsize": self.bsize,
            "seed": self.seed,
            "n_discarded": self.n_discarded,
            "tasks": [
                {
                    "index": t.index,
                    "cursor": t.cursor,
                    "batches": [list(b.utterance_ids) for b in t.batches],
                }
                for t in self.tasks
            ],
            "scores": self.scores,
        }

    @classmethod
    def from_dict(cls, obj):
        try:
            tasks = [
                Task(
                    index=int(t["index"]),
                    batches=[Batch(tuple(ids), int(t["index"])) for ids in t["batches"]],
                    cursor=int(t.get("cursor", 0)),
                )
                for t in obj["tasks"]
            ]
            cur = cls(
                tasks=tasks,
                metric=obj["metric"],
                bsize=int(obj["bsize"]),
                seed=obj.get("seed"),
                scores={str(k): float(v) for k, v in obj.get("scores", {}).items()},
                n_discarded=int(obj.get("n_discarded", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed curriculum document: {exc}") from exc
        if int(obj["K"]) != len(tasks):
            raise InvalidInputError(f"curriculum declares K={obj['K']} but holds {len(tasks)} tasks")
        return cur

    def dumps(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps() + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def partition(scored, K, bsize, rng_seed=0, metric="SL"):
    """Sort utterances by difficulty and cut them into ``K`` equal tasks.

    Each task receives ``len(scored) // (K * bsize)`` batches. The easiest
    utterances go to task 1 and the hardest to task K. Leftovers that cannot
    fill a batch in every task are dropped from the hard end of the ranking.
    Batch membership within a task is a seeded shuffle of that task's block.
    """
    if K < 2:
        raise InvalidInputError(f"K must be at least 2, got {K}")
    check_positive_int(bsize, "bsize")
    if metric not in METRICS:
        raise InvalidInputError(f"unknown metric {metric!r}")
    scored = [u if isinstance(u, ScoredUtterance) else ScoredUtterance.from_dict(u) for u in scored]
    required = K * bsize
    if len(scored) < required:
        raise InsufficientDataError(len(scored), required)
    ids = [u.id for u in scored]
    if len(set(ids)) != len(ids):
        raise InvalidInputError("utterance ids must be unique")
    missing = [u.id for u in scored if u.score is None]
    if missing:
        raise InvalidInputError(f"{len(missing)} utterances have no score (first: {missing[0]!r})")

    ranked = sorted(scored, key=lambda u: (difficulty(u.score, metric), u.id))
    per_task = len(ranked) // required
    used = per_task * required
    n_discarded = len(ranked) - used
    if n_discarded:
        logger.warning("discarding %d utterances that cannot fill one batch per task", n_discarded)

    rng = np.random.default_rng(rng_seed)
    block = per_task * bsize
    tasks = []
    for k in range(K):
        members = [u.id for u in ranked[k * block:(k + 1) * block]]
        order = rng.permutation(block)
        shuffled = [members[i] for i in order]
        batches = [Batch(tuple(shuffled[b * bsize:(b + 1) * bsize]), k + 1) for b in range(per_task)]
        tasks.append(Task(index=k + 1, batches=batches))
    scores = {u.id: float(u.score) for u in ranked[:used]}
    return Curriculum(tasks, metric, bsize, seed=rng_seed, scores=scores, n_discarded=n_discarded)


def draw_batch(curriculum, k, rng=None):
    return curriculum.draw(k)


def peek_eval_batch(curriculum, k, rng):
    return curriculum.peek(k, rng)


def fallback_task(curriculum, policy):
    return curriculum.fallback(policy)


def reset_epoch(curriculum, rng):
    return curriculum.reset_epoch(rng)


class CurriculumPartitioner(BaseEstimator):
    """Estimator wrapper around :func:`partition`.

    ``fit`` builds ``curriculum_``; ``transform`` maps utterances to their
    task index (0 for utterances that were discarded or never seen).
    """

    def __init__(self, n_tasks=10, bsize=1, metric="CR", random_state=0):
        self.n_tasks = n_tasks
        self.bsize = bsize
        self.metric = metric
        self.random_state = random_state

    def fit(self, X, y=None):
        self.curriculum_ = partition(X, self.n_tasks, self.bsize, self.random_state, self.metric)
        self.n_discarded_ = self.curriculum_.n_discarded
        return self

    def transform(self, X):
        lookup = self.curriculum_.membership()
        ids = [u.id if isinstance(u, ScoredUtterance) else str(u["id"]) for u in X]
        return np.array([lookup.get(uid, 0) for uid in ids], dtype=int)

    def fit_transform(self, X, y=None):
        X = list(X)
        return self.fit(X).transform(X)


def synthetic_curriculum(K=10, batches_per_task=100, bsize=1, seed=0):
    """Curriculum over placeholder utterances whose length score equals their rank."""
    n = K * batches_per_task * bsize
    width = len(str(n))
    utts = [ScoredUtterance(id=f"syn{i:0{width}d}", score=float(i)) for i in range(n)]
    return partition(utts, K, bsize, rng_seed=seed, metric="SL")
