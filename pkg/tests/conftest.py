import pytest

from poiplan.corpus import Poi, build_trajectories, split_corpus


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_verdict(request):
    """Records one PASS/FAIL line per criterion; echoed in the run summary."""

    def record(name: str, ok: bool, detail: str = "") -> None:
        status = "PASS" if ok else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        line = f"ACCEPTANCE {name}: {status}{suffix}"
        print(f"\n{line}")
        request.config.acceptance_lines.append(line)

    return record
from poiplan.durations import BootstrapConfig, estimate_all
from poiplan.model import ModelConfig, train
from poiplan.sentences import build_vocab, generate_corpus
from poiplan.synth import city_fixture, memorization_city


@pytest.fixture(scope="session")
def toy_pois():
    return [
        Poi("a", "Museum", 34.0, 135.0, "Poi A"),
        Poi("b", "Park", 34.1, 135.1, "Poi B"),
        Poi("x", "Museum", 34.2, 135.2, "Poi X"),
    ]


@pytest.fixture(scope="session")
def toy_vocab(toy_pois):
    return build_vocab(toy_pois)


@pytest.fixture(scope="session")
def mem_city():
    return memorization_city()


@pytest.fixture(scope="session")
def mem_corpus(mem_city):
    """Trajectories, split, vocab, durations and pairs of the 6-POI city."""
    trajectories = build_trajectories(mem_city.checkins)
    split = split_corpus(trajectories, 0.8, 3)
    vocab = build_vocab(list(mem_city.pois))
    durations = estimate_all(split.train, BootstrapConfig(replicates=2000, alpha=10.0, rng_seed=7))
    pairs = generate_corpus(split.train, vocab)
    return dict(trajectories=trajectories, split=split, vocab=vocab, durations=durations, pairs=pairs)


@pytest.fixture(scope="session")
def mem_model(mem_corpus):
    cfg = ModelConfig(epochs=50, seed=11)
    return train(mem_corpus["pairs"], cfg, mem_corpus["vocab"])


@pytest.fixture(scope="session")
def fixture_city():
    return city_fixture()
