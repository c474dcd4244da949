import pytest

# three instances over items a..h
EXAMPLE_MATRIX = {
    "a": (0.95, 0.15, 0.25),
    "b": (0.0, 0.44, 0.0),
    "c": (0.23, 0.0, 0.0),
    "d": (0.70, 0.80, 0.10),
    "e": (0.10, 0.05, 0.0),
    "f": (0.42, 0.50, 0.22),
    "g": (0.0, 0.20, 0.0),
    "h": (0.32, 0.0, 0.0),
}

EXAMPLE_SEEDS = {"a": 0.32, "b": 0.21, "c": 0.04, "d": 0.23, "e": 0.84, "f": 0.70, "g": 0.15, "h": 0.64}

# sampled entries (0-based instance -> value) under PPS with unit rates
EXAMPLE_OUTCOMES = {
    "a": {0: 0.95},
    "b": {1: 0.44},
    "c": {0: 0.23},
    "d": {0: 0.70, 1: 0.80},
    "e": {},
    "f": {},
    "g": {1: 0.20},
    "h": {},
}


@pytest.fixture
def example_matrix():
    return dict(EXAMPLE_MATRIX)


@pytest.fixture
def example_csv(tmp_path):
    path = tmp_path / "example.csv"
    lines = ["key,v1,v2,v3"] + [f"{k},{a},{b},{c}" for k, (a, b, c) in EXAMPLE_MATRIX.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


# acceptance lines collected by test_acceptance.py and echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
