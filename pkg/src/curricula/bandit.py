"""Non-stationary K-armed bandits over curriculum tasks, plus the gain-to-reward map.

Arms are 1-based to line up with task indices. Both bandits expose the same
duck-typed surface used by the scheduler::

    k = bandit.select(rng)
    bandit.policy()               # vector of length K
    bandit.update(k, reward, raw_loss=None)
"""

import bisect
import math
from collections import deque

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import (
    InvalidInputError,
    check_arm,
    check_finite,
    check_interval,
    check_non_negative,
    check_positive,
    check_positive_int,
    check_random_state,
)

ABRUPT = "abruptly-changing"
SLOW = "slowly-varying"


class Exp3S(BaseEstimator):
    """EXP3.S with epsilon-uniform mixing and 1/t weight sharing.

    Parameters
    ----------
    n_arms : int
    exploration : float
        Share of probability mass spread uniformly over all arms.
    learning_rate : float
        Step size applied to importance-weighted rewards.
    reward_offset : float
        Constant added to every arm's reward before importance weighting.
    """

    def __init__(self, n_arms=10, exploration=0.05, learning_rate=0.001, reward_offset=0.0):
        self.n_arms = n_arms
        self.exploration = exploration
        self.learning_rate = learning_rate
        self.reward_offset = reward_offset

    def reset(self):
        check_positive_int(self.n_arms, "n_arms")
        if self.n_arms < 2:
            raise InvalidInputError("a bandit needs at least two arms")
        check_interval(self.exploration, "exploration", 0.0, 1.0)
        check_positive(self.learning_rate, "learning_rate")
        check_non_negative(self.reward_offset, "reward_offset")
        self.weights_ = np.zeros(self.n_arms)
        self.t_ = 0
        return self

    def _ensure_state(self):
        if not hasattr(self, "weights_"):
            self.reset()

    def policy(self):
        self._ensure_state()
        z = np.exp(self.weights_ - self.weights_.max())
        return (1.0 - self.exploration) * z / z.sum() + self.exploration / self.n_arms

    def select(self, rng):
        rng = check_random_state(rng)
        cdf = np.cumsum(self.policy())
        idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        return min(idx, self.n_arms - 1) + 1

    def update(self, k, reward, raw_loss=None):
        self._ensure_state()
        k = check_arm(k, self.n_arms)
        reward = check_finite(reward, "reward")
        K = self.n_arms
        pi = self.policy()
        gain = np.full(K, self.reward_offset)
        gain[k - 1] += reward
        x = self.weights_ + self.learning_rate * gain / pi
        self.t_ += 1
        share = 1.0 / self.t_
        m = x.max()
        e = np.exp(x - m)
        mixed = (1.0 - share) * e + share / (K - 1) * (e.sum() - e)
        w = m + np.log(mixed)
        # Softmax is shift invariant; keeping max(w) at 0 stops the weights drifting.
        self.weights_ = w - w.max()
        return self

    def to_dict(self):
        self._ensure_state()
        return {
            "type": "exp3s",
            "params": self.get_params(),
            "weights": [float(v) for v in self.weights_],
            "t": self.t_,
        }

    @classmethod
    def from_dict(cls, obj):
        bandit = cls(**obj["params"]).reset()
        bandit.weights_ = np.array(obj["weights"], dtype=float)
        bandit.t_ = int(obj["t"])
        return bandit


def window_length(t, scale, exponent):
    """Sliding-window length ``min(ceil(scale * t**exponent), t)``."""
    if t <= 0:
        return 0
    return min(math.ceil(scale * t ** exponent), t)


def exploration_bonus(t, count, exponent):
    """Confidence width ``sqrt((1 + exponent) * ln t / count)``."""
    if count <= 0:
        return math.inf
    return math.sqrt((1.0 + exponent) * math.log(t) / count)


def detect_mode(losses, threshold, window=100):
    """Classify the environment from the spread of the last ``window`` losses.

    The sample variance is divided by the squared mean so the test does not
    depend on the loss scale. Until ``window`` losses exist the environment is
    treated as abruptly changing.
    """
    if len(losses) < window:
        return ABRUPT
    recent = np.asarray(list(losses)[-window:], dtype=float)
    var = recent.var(ddof=1)
    mean_sq = recent.mean() ** 2
    if mean_sq == 0:
        return ABRUPT if var > 0 else SLOW
    return ABRUPT if var / mean_sq > threshold else SLOW


class SwUcb(BaseEstimator):
    """Sliding-window UCB whose window shrinks when recent losses are volatile.

    Parameters
    ----------
    n_arms : int
    window_scale : float
        Multiplier on the window length.
    abrupt_exponent, slow_exponent : float
        Growth exponent of the window in the abruptly-changing and
        slowly-varying modes; the abrupt one must not exceed the slow one.
    mode_threshold : float
        Normalized loss variance above which the environment is abrupt.
    loss_window : int
        Number of recent losses inspected by :func:`detect_mode`.
    """

    def __init__(self, n_arms=10, window_scale=12.0, abrupt_exponent=0.4, slow_exponent=0.8,
                 mode_threshold=0.1, loss_window=100):
        self.n_arms = n_arms
        self.window_scale = window_scale
        self.abrupt_exponent = abrupt_exponent
        self.slow_exponent = slow_exponent
        self.mode_threshold = mode_threshold
        self.loss_window = loss_window

    def reset(self):
        check_positive_int(self.n_arms, "n_arms")
        if self.n_arms < 2:
            raise InvalidInputError("a bandit needs at least two arms")
        check_positive(self.window_scale, "window_scale")
        check_interval(self.abrupt_exponent, "abrupt_exponent", 0.0, 1.0, closed=False)
        check_interval(self.slow_exponent, "slow_exponent", 0.0, 1.0, closed=False)
        if self.abrupt_exponent > self.slow_exponent:
            raise InvalidInputError("abrupt_exponent must not exceed slow_exponent")
        check_positive(self.mode_threshold, "mode_threshold")
        check_positive_int(self.loss_window, "loss_window")
        self.history_ = deque()
        self.counts_ = np.zeros(self.n_arms, dtype=int)
        self.sums_ = np.zeros(self.n_arms)
        self.losses_ = deque(maxlen=self.loss_window)
        self.mode_ = ABRUPT
        self.t_ = 0
        return self

    def _ensure_state(self):
        if not hasattr(self, "history_"):
            self.reset()

    @property
    def exponent(self):
        self._ensure_state()
        return self.abrupt_exponent if self.mode_ == ABRUPT else self.slow_exponent

    def window(self, t=None):
        return window_length(self.t_ if t is None else t, self.window_scale, self.exponent)

    def means(self):
        self._ensure_state()
        out = np.zeros(self.n_arms)
        played = self.counts_ > 0
        out[played] = self.sums_[played] / self.counts_[played]
        return out

    def policy(self):
        """Index value (window mean + bonus) per arm; unplayed arms are ``inf``."""
        self._ensure_state()
        t = max(self.t_, 1)
        bonus = np.full(self.n_arms, np.inf)
        played = self.counts_ > 0
        bonus[played] = np.sqrt((1.0 + self.exponent) * math.log(t) / self.counts_[played])
        return self.means() + bonus

    def select(self, rng=None):
        self._ensure_state()
        unplayed = np.flatnonzero(self.counts_ == 0)
        if unplayed.size:
            return int(unplayed[0]) + 1
        index = self.policy()
        return self.n_arms - int(np.argmax(index[::-1]))

    def update(self, k, reward, raw_loss=None):
        self._ensure_state()
        k = check_arm(k, self.n_arms)
        reward = check_finite(reward, "reward")
        self.t_ += 1
        t = self.t_
        self.history_.append((t, k, reward))
        self.counts_[k - 1] += 1
        self.sums_[k - 1] += reward
        horizon = t - self.window(t)
        while self.history_ and self.history_[0][0] <= horizon:
            _, old_k, old_r = self.history_.popleft()
            self.counts_[old_k - 1] -= 1
            self.sums_[old_k - 1] -= old_r
        # Recompute sums from the window so float error cannot accumulate.
        if self.t_ % 1024 == 0:
            self._resum()
        if raw_loss is not None:
            self.losses_.append(check_finite(raw_loss, "raw_loss"))
        self.mode_ = detect_mode(self.losses_, self.mode_threshold, self.loss_window)
        return self

    def _resum(self):
        self.sums_[:] = 0.0
        for _, arm, r in self.history_:
            self.sums_[arm - 1] += r

    def to_dict(self):
        self._ensure_state()
        return {
            "type": "swucb",
            "params": self.get_params(),
            "history": [[s, a, r] for s, a, r in self.history_],
            "counts": [int(c) for c in self.counts_],
            "sums": [float(v) for v in self.sums_],
            "losses": list(self.losses_),
            "mode": self.mode_,
            "t": self.t_,
        }

    @classmethod
    def from_dict(cls, obj):
        bandit = cls(**obj["params"]).reset()
        bandit.history_ = deque((int(s), int(a), float(r)) for s, a, r in obj["history"])
        bandit.counts_ = np.array(obj["counts"], dtype=int)
        bandit.sums_ = np.array(obj["sums"], dtype=float)
        bandit.losses_ = deque((float(v) for v in obj["losses"]), maxlen=bandit.loss_window)
        bandit.mode_ = obj["mode"]
        bandit.t_ = int(obj["t"])
        return bandit


class RewardMapper:
    """Map raw progress gains into [-1, 1] using quantiles of recent gains."""

    def __init__(self, history_size=1000, low_quantile=20.0, high_quantile=80.0):
        self.history_size = check_positive_int(history_size, "history_size")
        if not 0 <= low_quantile < high_quantile <= 100:
            raise InvalidInputError("need 0 <= low_quantile < high_quantile <= 100")
        self.low_quantile = float(low_quantile)
        self.high_quantile = float(high_quantile)
        self.history = deque()
        self._sorted = []

    def _push(self, gain):
        if len(self.history) == self.history_size:
            old = self.history.popleft()
            del self._sorted[bisect.bisect_left(self._sorted, old)]
        self.history.append(gain)
        bisect.insort(self._sorted, gain)

    def quantile(self, q):
        """Linear-interpolated percentile of the history (numpy's default method)."""
        pos = q / 100.0 * (len(self._sorted) - 1)
        i = math.floor(pos)
        frac = pos - i
        lo = self._sorted[i]
        if frac == 0.0:
            return lo
        return lo + frac * (self._sorted[i + 1] - lo)

    def __call__(self, gain):
        gain = check_finite(gain, "gain")
        self._push(gain)
        lo, hi = self.quantile(self.low_quantile), self.quantile(self.high_quantile)
        if hi <= lo:
            return 0.0
        return min(1.0, max(-1.0, 2.0 * (gain - lo) / (hi - lo) - 1.0))

    def to_dict(self):
        return {
            "history_size": self.history_size,
            "low_quantile": self.low_quantile,
            "high_quantile": self.high_quantile,
            "history": list(self.history),
        }

    @classmethod
    def from_dict(cls, obj):
        mapper = cls(obj["history_size"], obj["low_quantile"], obj["high_quantile"])
        for v in obj["history"]:
            mapper._push(float(v))
        return mapper


def map_reward(mapper, gain):
    return mapper(gain)


_BANDITS = {"exp3s": Exp3S, "swucb": SwUcb}


def make_bandit(algorithm, n_arms, **params):
    try:
        cls = _BANDITS[algorithm.lower()]
    except KeyError:
        raise InvalidInputError(f"unknown algorithm {algorithm!r}; choose from {sorted(_BANDITS)}") from None
    return cls(n_arms=n_arms, **params).reset()


def bandit_from_dict(obj):
    return _BANDITS[obj["type"]].from_dict(obj)
