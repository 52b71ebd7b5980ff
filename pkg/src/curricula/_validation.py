"""Small argument checks shared by the estimators."""

import math
import numbers

import numpy as np


class CurriculaError(Exception):
    """Base class for package errors."""


class InvalidInputError(CurriculaError, ValueError):
    """Input data violates an operation's precondition."""


class ConfigurationError(CurriculaError, ValueError):
    """Incompatible or missing configuration."""


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_positive(value, name):
    if not _is_real(value) or not value > 0:
        raise ConfigurationError(f"{name} must be a positive real, got {value!r}")
    return float(value)


def check_non_negative(value, name):
    if not _is_real(value) or value < 0:
        raise ConfigurationError(f"{name} must be non-negative, got {value!r}")
    return float(value)


def check_interval(value, name, low, high, *, closed=True):
    if not _is_real(value):
        raise ConfigurationError(f"{name} must be a real number, got {value!r}")
    ok = low <= value <= high if closed else low < value < high
    if not ok:
        bounds = f"[{low}, {high}]" if closed else f"({low}, {high})"
        raise ConfigurationError(f"{name} must lie in {bounds}, got {value!r}")
    return float(value)


def check_finite(value, name):
    if not _is_real(value) or not math.isfinite(value):
        raise InvalidInputError(f"{name} must be finite, got {value!r}")
    return float(value)


def check_arm(k, n_arms):
    if isinstance(k, bool) or not isinstance(k, numbers.Integral) or not 1 <= k <= n_arms:
        raise IndexError(f"task index {k!r} outside [1, {n_arms}]")
    return int(k)


def check_random_state(seed):
    """Turn ``None``, an int, or a Generator into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _is_real(value):
    return isinstance(value, numbers.Real) and not isinstance(value, bool)
