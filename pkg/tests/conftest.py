import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from robustree import surfaces  # noqa: E402

CACHE = Path(os.environ.get("ROBUSTREE_CACHE", Path(__file__).parents[1] / ".cache" / "ground_truth"))


@pytest.fixture(scope="session")
def truth_of():
    """Ground truth per label at the default density, cached on disk."""
    memo = {}

    def get(label):
        if label not in memo:
            memo[label] = surfaces.ground_truth(surfaces.benchmark_spec(label), 200, cache_dir=CACHE)
        return memo[label]

    return get


@pytest.fixture(scope="session")
def bench(truth_of):
    """Memoized 50-repeat benchmark cells, shared across test modules."""
    from robustree import campaign

    memo = {}

    def get(label, kind, mode, repeats=50):
        key = (label, kind, mode, repeats)
        if key not in memo:
            spec = surfaces.benchmark_spec(label)
            memo[key] = campaign.benchmark(spec, truth_of(label), campaign.PlannerConfig(kind),
                                           mode, repeats, seed=0)
        return memo[key]

    return get


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
