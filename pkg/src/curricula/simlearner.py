"""A synthetic learner with per-task skill, cross-task transfer and optional prerequisites.

Loss on task k is ``base_loss[k] * exp(-skill[k])`` plus Gaussian noise.
Training on task k adds ``sim_rate * transfer[:, k]`` to the skill vector.
With gating on, the gain on task k itself is scaled by
``sigmoid(skill[k-1] - prereq_threshold)``, so hard tasks only pay off after
their easier neighbour has been learned.
"""

import json

import numpy as np

from ._validation import (
    ConfigurationError,
    check_non_negative,
    check_positive,
    check_positive_int,
)


def default_transfer(n_tasks, backward=0.3, forward=0.1):
    """Identity plus partial transfer to the adjacent tasks.

    Training on task k helps the easier task k-1 by ``backward`` and the
    harder task k+1 by ``forward``.
    """
    t = np.eye(n_tasks)
    for k in range(1, n_tasks):
        t[k - 1, k] = backward
        t[k, k - 1] = forward
    return t


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class SimLearner:
    def __init__(self, n_tasks=10, base_loss=None, transfer=None, sim_rate=0.01,
                 noise_sigma=0.01, gating=False, prereq_threshold=2.0, seed=0):
        self.n_tasks = check_positive_int(n_tasks, "n_tasks")
        if base_loss is None:
            base_loss = 1.0 + np.arange(1, n_tasks + 1) / n_tasks
        self.base_loss = np.asarray(base_loss, dtype=float)
        if self.base_loss.shape != (n_tasks,):
            raise ConfigurationError(f"base_loss must have length {n_tasks}")
        if np.any(np.diff(self.base_loss) <= 0):
            raise ConfigurationError("base_loss must be strictly increasing with task index")
        self.transfer = default_transfer(n_tasks) if transfer is None else np.asarray(transfer, dtype=float)
        if self.transfer.shape != (n_tasks, n_tasks):
            raise ConfigurationError(f"transfer must be {n_tasks}x{n_tasks}")
        if np.any(self.transfer < 0):
            raise ConfigurationError("transfer entries must be non-negative")
        diag = np.diag(self.transfer)
        if np.any(self.transfer > diag[None, :]):
            raise ConfigurationError("each transfer column must peak on the diagonal")
        self.sim_rate = check_positive(sim_rate, "sim_rate")
        self.noise_sigma = check_non_negative(noise_sigma, "noise_sigma")
        self.gating = bool(gating)
        self.prereq_threshold = float(prereq_threshold)
        self.seed = seed
        self.skill = np.zeros(n_tasks)
        self._rng = np.random.default_rng(seed)

    def expected_loss(self, k=None):
        """Noise-free loss of task ``k``, or the vector over all tasks."""
        losses = self.base_loss * np.exp(-self.skill)
        return losses if k is None else float(losses[k - 1])

    def total_loss(self):
        return float(self.expected_loss().sum())

    def eval_loss(self, batch):
        loss = self.expected_loss(batch.task_index)
        if self.noise_sigma > 0:
            loss += self._rng.normal(0.0, self.noise_sigma)
        return max(loss, 0.0)

    def gate(self, k):
        if not self.gating or k == 1:
            return 1.0
        return float(_sigmoid(self.skill[k - 2] - self.prereq_threshold))

    def apply_update(self, batch):
        k = batch.task_index
        step = self.sim_rate * self.transfer[:, k - 1].copy()
        step[k - 1] *= self.gate(k)
        self.skill += step

    sim_eval_loss = eval_loss
    sim_train = apply_update

    def get_config(self):
        return {
            "n_tasks": self.n_tasks,
            "base_loss": self.base_loss.tolist(),
            "transfer": self.transfer.tolist(),
            "sim_rate": self.sim_rate,
            "noise_sigma": self.noise_sigma,
            "gating": self.gating,
            "prereq_threshold": self.prereq_threshold,
            "seed": self.seed,
        }

    @classmethod
    def from_config(cls, config):
        unknown = set(config) - set(cls().get_config())
        if unknown:
            raise ConfigurationError(f"unknown learner config keys: {sorted(unknown)}")
        return cls(**config)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_config(json.load(fh))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.get_config(), fh, indent=1)
