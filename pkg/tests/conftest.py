import pytest

TINY_TOML = """\
[world]
seed = 0
n_classes = 3
n_per_class = 6
n_test_per_class = 3
mn_world_classes = 6
mn_per_class = 3

[embedder]
feature_dim = 8
steps = 20
batch_size = 8
checkpoint_interval = 10

[matchnet]
episodes = 20
checkpoint_interval = 10
eval_episodes = 5
n_train_classes = 3

[sweep]
n_embedder_seeds = 2
mn_seeds_per_embedder = 1

[probes]
n_triples = 5

[output]
dir = "out"
"""


@pytest.fixture
def tiny_config_path(tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_TOML)
    return path


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one pass/fail line per acceptance criterion."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
