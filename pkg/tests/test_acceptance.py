"""Acceptance criteria on the reference configuration, one test per criterion.

Reference: FreeJacobi, N = 200, kappa_j = 2^(-j/2), rank-2 seeded J with
||J|| = 1, 21 lambda points in [-1.9, 1.9], r in {0.3, 0.7, 1.0}. Each test
prints a PASS/FAIL line with the measured value and the pinned tolerance.
"""
import pytest

from framedscat.config import SweepConfig
from framedscat.verify import run_acceptance

# tolerances pinned from the acceptance criteria (not read back from the config)
PINNED = {
    "C1": 1e-6, "C1t": 60.0, "C2": 1e-6, "C3": 1e-4, "C4": 1e-6, "C5": 1e-4, "C6": 1e-3,
    "C7": 1e-2, "C7a": 1e-6, "C8": 1e-3, "C9": 1e-8, "C9s": 1e-9, "C10a": 1e-10,
    "C10b": 1e-9, "C10c": 1e-10, "C10d": 1.0, "C10e": 1.0, "C11": 1.0,
    "C12a": 1e-10, "C12b": 2.0 / 1000, "C12": 1e-3,
}


@pytest.fixture(scope="module")
def report():
    cfg = SweepConfig()
    assert cfg.frame.n == 200 and cfg.lambda_grid.count == 21 and cfg.r_values == [0.3, 0.7, 1.0]
    assert cfg.perturbation.rank == 2 and cfg.perturbation.norm == 1.0 and cfg.example_n == 1000
    return run_acceptance(cfg)


@pytest.mark.slow
@pytest.mark.parametrize("key", list(PINNED))
def test_criterion(report, key, capsys):
    res = report.by_key(key)
    with capsys.disabled():
        print("\n" + res.line())
    assert res.tol == PINNED[key]
    assert res.passed, res.line()


if __name__ == "__main__":
    rep = run_acceptance(SweepConfig(), log=print)
    print(rep.table())
