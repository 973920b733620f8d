import pytest

from algorithms.coordinator import AlgorithmCoordinator, AlgorithmType, SolveRequest, solve_instance
from flow.core import evaluate


@pytest.mark.parametrize("name, expected", [
    ("rr", AlgorithmType.RR),
    ("RR-Sorted", AlgorithmType.RR_SORTED),
    ("srr_unsorted", AlgorithmType.SRR_UNSORTED),
    ("annealing", AlgorithmType.SA),
    (AlgorithmType.SA2, AlgorithmType.SA2),
])
def test_parse_algorithm(name, expected):
    assert AlgorithmCoordinator.parse_algorithm(name) is expected


def test_unknown_algorithm():
    with pytest.raises(ValueError, match="known: rr"):
        AlgorithmCoordinator.parse_algorithm("milp")


@pytest.mark.parametrize("algorithm", list(AlgorithmType))
def test_solve_every_algorithm(small_grid, algorithm):
    messages = []
    request = SolveRequest(algorithm=algorithm, seed=2, iterations=300, backend="highs")
    result = solve_instance(small_grid, request, on_status=messages.append)
    assert result.algorithm is algorithm
    assert evaluate(small_grid, result.assignment) == result.metrics
    assert result.wall_time >= 0
    assert messages and messages[-1].endswith("done")
    if algorithm in (AlgorithmType.SA, AlgorithmType.SA2):
        assert result.lp_solves == 0
        assert result.extra["iterations"] == 300
    else:
        assert result.lp_solves >= 1
        assert "actualizations" in result.extra


def test_csrr_extra_fields(small_grid):
    result = AlgorithmCoordinator("highs").solve(small_grid, SolveRequest(AlgorithmType.CSRR, theta=1))
    assert result.extra["delta_star"] > 0
    assert result.extra["csrr_active_rows"] >= 0
