from __future__ import annotations

import numpy as np
import pytest

from jointse.corpus import build_joint_corpus, materialize, synth_utterance, write_toy_sources


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def speech():
    """Twenty 2-second speech-shaped utterances."""
    rng = np.random.default_rng(2024)
    return [synth_utterance(rng, duration=2.0) for _ in range(20)]


@pytest.fixture(scope="session")
def toy_sources(tmp_path_factory):
    root = tmp_path_factory.mktemp("sources")
    return write_toy_sources(root, n_clean=6, n_noise=3, seed=5, duration=1.5)


@pytest.fixture(scope="session")
def toy_manifest(tmp_path_factory, toy_sources):
    clean, noise = toy_sources
    out = tmp_path_factory.mktemp("corpus")
    return materialize(build_joint_corpus(clean, noise, master_seed=3, n_entries=6), out)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
