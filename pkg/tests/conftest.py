import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from curricula.scoring import ScoredUtterance, speech_like_signal, write_wav  # noqa: E402

ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def sl_utterances():
    """20 utterances whose sentence-length scores are 1..20, ids in shuffled order."""
    order = np.random.default_rng(7).permutation(20)
    return [ScoredUtterance(id=f"u{i:02d}", text="", score=float(i + 1)) for i in order]


@pytest.fixture
def wav_dir(tmp_path):
    """Directory with a zero WAV, a speech-like WAV and a manifest referencing both."""
    from curricula.scoring import AudioSample

    write_wav(tmp_path / "silence.wav", AudioSample(np.zeros(32768, dtype=np.int16), 16000))
    write_wav(tmp_path / "speech.wav", speech_like_signal(1.0, seed=3))
    return tmp_path
