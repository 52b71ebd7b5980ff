"""Difficulty scores for utterances: compression ratio, sentence length, sentence norm.

Audio is scored on its raw 16-bit PCM payload (no container header) with gzip at
a fixed level, so two files carrying the same samples always get the same score.
"""

import gzip
import json
import logging
import math
import wave
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import (
    ConfigurationError,
    InvalidInputError,
    check_finite,
    check_positive_int,
    check_random_state,
)

logger = logging.getLogger(__name__)

COMPRESSION_LEVEL = 6
METRICS = ("CR", "SL", "SN")

_INT16_MIN, _INT16_MAX = -32768, 32767


class ScoringError(InvalidInputError):
    """Scoring a single utterance failed."""

    def __init__(self, utterance_id, message):
        super().__init__(f"utterance {utterance_id!r}: {message}")
        self.utterance_id = utterance_id


@dataclass
class AudioSample:
    samples: np.ndarray
    sample_rate_hz: int
    channel_count: int = 1

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise InvalidInputError("audio must be a non-empty 1-D sample sequence")
        if self.samples.dtype != np.int16:
            if np.any(self.samples < _INT16_MIN) or np.any(self.samples > _INT16_MAX):
                raise InvalidInputError("samples exceed the signed 16-bit range")
            self.samples = self.samples.astype(np.int16)
        if not isinstance(self.sample_rate_hz, (int, np.integer)) or self.sample_rate_hz <= 0:
            raise InvalidInputError(f"sample_rate_hz must be positive, got {self.sample_rate_hz!r}")
        if self.channel_count != 1:
            raise InvalidInputError("only mono audio is supported")

    def pcm_bytes(self):
        """Little-endian 16-bit PCM payload, no header."""
        return self.samples.astype("<i2").tobytes()

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz


def read_wav(path):
    """Read a 16-bit mono PCM WAV file."""
    try:
        with wave.open(str(path), "rb") as fh:
            if fh.getsampwidth() != 2:
                raise InvalidInputError(f"{path}: expected 16-bit samples, got {8 * fh.getsampwidth()}-bit")
            if fh.getnchannels() != 1:
                raise InvalidInputError(f"{path}: expected mono, got {fh.getnchannels()} channels")
            rate = fh.getframerate()
            frames = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError) as exc:
        raise InvalidInputError(f"{path}: not a PCM WAV file ({exc})") from exc
    samples = np.frombuffer(frames, dtype="<i2").astype(np.int16)
    return AudioSample(samples, rate)


def write_wav(path, audio):
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(audio.sample_rate_hz)
        fh.writeframes(audio.pcm_bytes())


def compression_ratio(payload, level=COMPRESSION_LEVEL):
    """Return ``1 - compressed_size / original_size`` under gzip.

    The gzip header timestamp is pinned to zero so the output size depends on
    the payload alone. Incompressible payloads give a small negative value,
    which is kept as is.
    """
    if isinstance(payload, AudioSample):
        payload = payload.pcm_bytes()
    payload = bytes(payload)
    if not payload:
        raise InvalidInputError("cannot compute a compression ratio for an empty payload")
    compressed = gzip.compress(payload, compresslevel=level, mtime=0)
    return 1.0 - len(compressed) / len(payload)


def sentence_length(tokens):
    return float(len(tokens))


@dataclass
class EmbeddingTable:
    dimension: int
    vectors: dict = field(default_factory=dict)

    def __post_init__(self):
        check_positive_int(self.dimension, "dimension")
        clean = {}
        for token, vec in self.vectors.items():
            arr = np.asarray(vec, dtype=float)
            if arr.shape != (self.dimension,):
                raise InvalidInputError(
                    f"vector for token {token!r} has shape {arr.shape}, expected ({self.dimension},)"
                )
            clean[int(token)] = arr
        self.vectors = clean

    def __contains__(self, token):
        return int(token) in self.vectors

    def __len__(self):
        return len(self.vectors)

    def lookup(self, token):
        try:
            return self.vectors[int(token)]
        except KeyError:
            raise KeyError(f"token {token!r} missing from the embedding table") from None

    @classmethod
    def load(cls, path):
        """Parse ``<vocab_size> <dimension>`` then ``<token_id> <v1> ... <vd>`` lines."""
        with open(path, encoding="utf-8") as fh:
            lines = [ln.split() for ln in fh if ln.strip()]
        if not lines or len(lines[0]) != 2:
            raise InvalidInputError(f"{path}: missing '<vocab_size> <dimension>' header")
        vocab_size, dimension = int(lines[0][0]), int(lines[0][1])
        vectors = {}
        for lineno, parts in enumerate(lines[1:], start=2):
            if len(parts) != dimension + 1:
                raise InvalidInputError(
                    f"{path}:{lineno}: expected {dimension + 1} fields, got {len(parts)}"
                )
            vectors[int(parts[0])] = [float(x) for x in parts[1:]]
        if len(vectors) != vocab_size:
            raise InvalidInputError(
                f"{path}: header declares {vocab_size} tokens, found {len(vectors)}"
            )
        return cls(dimension, vectors)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.vectors)} {self.dimension}\n")
            for token in sorted(self.vectors):
                values = " ".join(repr(float(v)) for v in self.vectors[token])
                fh.write(f"{token} {values}\n")


def sentence_norm(tokens, table):
    """Euclidean norm of the mean embedding of ``tokens``."""
    if len(tokens) == 0:
        raise InvalidInputError("sentence norm is undefined for an empty token sequence")
    stacked = np.stack([table.lookup(tok) for tok in tokens])
    return float(np.linalg.norm(stacked.mean(axis=0)))


@dataclass
class ScoredUtterance:
    id: str
    audio: Optional[str] = None
    text: str = ""
    tokens: Optional[Sequence[int]] = None
    score: Optional[float] = None

    def to_dict(self):
        out = {"id": self.id, "audio": self.audio, "text": self.text}
        if self.tokens is not None:
            out["tokens"] = [int(t) for t in self.tokens]
        if self.score is not None:
            out["score"] = self.score
        return out

    @classmethod
    def from_dict(cls, obj):
        if "id" not in obj:
            raise InvalidInputError(f"manifest entry without 'id': {obj!r}")
        tokens = obj.get("tokens")
        return cls(
            id=str(obj["id"]),
            audio=obj.get("audio"),
            text=obj.get("text", ""),
            tokens=None if tokens is None else [int(t) for t in tokens],
            score=obj.get("score"),
        )


def read_manifest(path):
    """Read a JSON-lines manifest.

    Returns ``(header, utterances)``; ``header`` is the dict stored under the
    ``"header"`` key of an optional first line, or ``None``.
    """
    header = None
    utterances = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            if "header" in obj and "id" not in obj:
                if utterances or header is not None:
                    raise InvalidInputError(f"{path}:{lineno}: header must be the first line")
                header = obj["header"]
                continue
            utt = ScoredUtterance.from_dict(obj)
            if utt.id in seen:
                raise InvalidInputError(f"{path}:{lineno}: duplicate id {utt.id!r}")
            seen.add(utt.id)
            utterances.append(utt)
    return header, utterances


def write_manifest(path, utterances, header=None):
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(json.dumps({"header": header}, ensure_ascii=False) + "\n")
        for utt in utterances:
            fh.write(json.dumps(utt.to_dict(), ensure_ascii=False) + "\n")


class DifficultyScorer(TransformerMixin, BaseEstimator):
    """Score utterances with one of the difficulty metrics.

    Parameters
    ----------
    metric : {"CR", "SL", "SN"}
        Compression ratio of the audio, sentence length, or sentence norm.
    embeddings : EmbeddingTable, optional
        Required for ``"SN"``.
    compression_level : int
        gzip level used for ``"CR"``.
    base_dir : str or Path, optional
        Relative audio paths are resolved against this directory.
    n_jobs : int, optional
        Worker threads for scoring; output order always follows the input.
    """

    def __init__(self, metric="CR", embeddings=None, compression_level=COMPRESSION_LEVEL,
                 base_dir=None, n_jobs=None):
        self.metric = metric
        self.embeddings = embeddings
        self.compression_level = compression_level
        self.base_dir = base_dir
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        if self.metric not in METRICS:
            raise ConfigurationError(f"unknown metric {self.metric!r}; choose from {METRICS}")
        if self.metric == "SN" and self.embeddings is None:
            raise ConfigurationError("metric SN requires an embedding table")
        if not 0 <= self.compression_level <= 9:
            raise ConfigurationError(f"compression_level must be in [0, 9], got {self.compression_level}")
        self.is_fitted_ = True
        return self

    def transform(self, X):
        if not getattr(self, "is_fitted_", False):
            self.fit()
        utterances = [u if isinstance(u, ScoredUtterance) else ScoredUtterance.from_dict(u) for u in X]
        if self.n_jobs and self.n_jobs > 1 and len(utterances) > 1:
            with ThreadPoolExecutor(max_workers=self.n_jobs) as pool:
                scores = list(pool.map(self._score_one, utterances))
        else:
            scores = [self._score_one(u) for u in utterances]
        return np.asarray(scores, dtype=float)

    def header(self):
        """Metadata recorded at the top of a scored manifest."""
        out = {"metric": self.metric}
        if self.metric == "CR":
            out["compressor"] = "gzip"
            out["compression_level"] = self.compression_level
        return out

    def _score_one(self, utt):
        if self.metric == "SL":
            tokens = utt.tokens if utt.tokens is not None else utt.text.split()
            return sentence_length(tokens)
        if self.metric == "SN":
            if not utt.tokens:
                raise ScoringError(utt.id, "metric SN needs a non-empty 'tokens' array")
            try:
                return sentence_norm(utt.tokens, self.embeddings)
            except KeyError as exc:
                raise ScoringError(utt.id, exc.args[0]) from exc
        if utt.audio is None:
            raise ScoringError(utt.id, "no audio path")
        path = Path(utt.audio)
        if self.base_dir is not None and not path.is_absolute():
            path = Path(self.base_dir) / path
        try:
            audio = read_wav(path)
        except (OSError, InvalidInputError) as exc:
            raise ScoringError(utt.id, f"cannot read audio {str(path)!r}: {exc}") from exc
        return compression_ratio(audio.pcm_bytes(), level=self.compression_level)


def score_manifest(manifest, metric, table=None, base_dir=None, n_jobs=None):
    """Return copies of ``manifest`` entries carrying a ``score``, in input order."""
    scorer = DifficultyScorer(metric=metric, embeddings=table, base_dir=base_dir, n_jobs=n_jobs).fit()
    utterances = [u if isinstance(u, ScoredUtterance) else ScoredUtterance.from_dict(u) for u in manifest]
    scores = scorer.transform(utterances)
    return [replace(u, score=float(s)) for u, s in zip(utterances, scores)]


def speech_like_signal(duration_s=5.0, sample_rate_hz=16000, seed=0, peak=12000):
    """Synthetic voiced signal: a harmonic tone under a syllable-rate envelope.

    The pitch contour, harmonic weights and syllable timing are drawn from
    ``seed``. Gaps between syllables are digital silence.
    """
    rng = check_random_state(seed)
    n = int(round(duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    f0 = rng.uniform(100.0, 220.0)
    vibrato = 1.0 + 0.03 * np.sin(2 * np.pi * rng.uniform(0.5, 2.0) * t)
    phase = 2 * np.pi * np.cumsum(f0 * vibrato) / sample_rate_hz
    weights = rng.uniform(0.2, 1.0, size=5) / np.arange(1, 6)
    tone = sum(w * np.sin((h + 1) * phase) for h, w in enumerate(weights))
    syllable_rate = rng.uniform(3.0, 5.0)
    envelope = np.clip(np.sin(2 * np.pi * syllable_rate * t + rng.uniform(0, 2 * np.pi)), 0.0, None) ** 2
    signal = tone * envelope
    signal *= peak / np.max(np.abs(signal))
    return AudioSample(np.round(signal).astype(np.int16), sample_rate_hz)


def signal_power(samples):
    x = np.asarray(samples, dtype=float)
    return float(np.mean(x * x))


def measure_snr(clean, mixture):
    """SNR in dB of ``mixture`` relative to ``clean`` (noise = mixture - clean)."""
    c = np.asarray(getattr(clean, "samples", clean), dtype=float)
    m = np.asarray(getattr(mixture, "samples", mixture), dtype=float)
    noise_power = signal_power(m - c)
    if noise_power == 0:
        return math.inf
    return 10.0 * math.log10(signal_power(c) / noise_power)


def synth_noisy_mixture(clean, snr_db, seed):
    """Add white Gaussian noise to ``clean`` at ``snr_db``.

    The noise is rescaled to hit the requested power ratio exactly before the
    sum is rounded and clipped to 16 bits.
    """
    snr_db = check_finite(snr_db, "snr_db")
    p_signal = signal_power(clean.samples)
    if p_signal == 0:
        raise InvalidInputError("clean signal has zero power; SNR is undefined")
    rng = check_random_state(seed)
    noise = rng.standard_normal(clean.samples.size)
    noise *= math.sqrt(p_signal / (10.0 ** (snr_db / 10.0)) / signal_power(noise))
    mixed = np.clip(np.round(clean.samples.astype(float) + noise), _INT16_MIN, _INT16_MAX)
    return AudioSample(mixed.astype(np.int16), clean.sample_rate_hz)
