import numpy as np
import pytest

from intentlens.classifier import ClassifierConfig
from intentlens.dataset import ingest
from intentlens.encoder import EncoderParams
from intentlens.pipeline import fit_highlighter, usable_trees
from intentlens.sample import sample_corpus_path
from training import train_with_f1_trace

_CRITERIA: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, (title, []))
    if report.when == "call" or report.outcome != "passed":
        entry[1].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[number]
        ok = outcomes and all(o == "passed" for o in outcomes)
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def sample_records():
    return ingest(sample_corpus_path()).records


@pytest.fixture(scope="session")
def sample_trees(sample_records):
    _, trees = usable_trees(sample_records)
    return trees


@pytest.fixture(scope="session")
def sample_labels(sample_records):
    return [r.labels for r in sample_records]


@pytest.fixture(scope="session")
def sample_encoder():
    return EncoderParams.initialize(seed=0)


@pytest.fixture(scope="session")
def sample_kmeans(sample_trees, sample_encoder):
    return fit_highlighter(sample_trees, sample_encoder, seed=0)


@pytest.fixture(scope="session")
def trained_h16(sample_trees, sample_labels, sample_encoder, sample_kmeans):
    """BiLSTM (h=64) on the mu=16 highlighted sample corpus, 200 epochs, with its F1 trace."""
    config = ClassifierConfig(m=sample_encoder.out_dim, epochs=200, rng_seed=0)
    result, trace = train_with_f1_trace(sample_trees, sample_labels, sample_encoder, sample_kmeans, config)
    return result, config, trace


