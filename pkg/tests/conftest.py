import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from auxabsa import corpus, synthetic  # noqa: E402

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def restaurant_records():
    text = synthetic.fixture_path("restaurants.xml").read_text()
    return corpus.filter_single_target(corpus.parse_semeval(text, 2016))


@pytest.fixture(scope="session")
def neighbourhood_records():
    text = synthetic.fixture_path("neighbourhoods.json").read_text()
    return corpus.filter_single_target(corpus.parse_sentihood(text))


@pytest.fixture
def config_dict(tmp_path):
    return {
        "seed": 5,
        "out": str(tmp_path / "run"),
        "encoder": {"name": "toy", "dim": 32},
        "datasets": {
            "detector": {"path": "fixture:restaurants.xml", "format": "semeval2016"},
            "sentiment": {"path": "fixture:neighbourhoods.json", "format": "sentihood"},
        },
        "detector": {"encoder_lr": 0.003, "head_lr": 0.003, "batch_size": 8, "epochs": 3},
        "sentiment": {"encoder_lr": 0.003, "head_lr": 0.003, "batch_size": 8, "epochs": 3},
    }


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[n])
