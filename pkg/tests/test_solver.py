import numpy as np
import pytest

from jsqtail.errors import ConvergenceFailureError, InvalidParameterError
from jsqtail.kernel import build_kernel
from jsqtail.solver import (
    gth_stationary, simulate, solve_direct, solve_power, tv_distance, write_pi_csv,
)
from jsqtail.statespace import enumerate_background

from oracles import stationary_by_least_squares


@pytest.fixture(scope="module")
def small_kernel(params2):
    idx = enumerate_background(2, 6)
    return build_kernel(params2, idx, 20)


def test_degenerate_single_state(params2):
    idx = enumerate_background(2, 0)
    k = build_kernel(params2, idx, 0)
    d = solve_direct(k)
    assert d.pi.shape == (1, 1)
    assert d.pi[0, 0] == 1.0
    assert d.residual == 0.0


def test_direct_residual_small(small_kernel, params3):
    d = solve_direct(small_kernel)
    assert d.residual <= 1e-12
    assert d.pi.sum() == pytest.approx(1.0, abs=1e-12)
    assert (d.pi >= 0).all()

    idx3 = enumerate_background(3, 4)
    d3 = solve_direct(build_kernel(params3, idx3, 10))
    assert d3.residual <= 1e-12


def test_direct_vs_least_squares_oracle(params2):
    idx = enumerate_background(2, 2)
    k = build_kernel(params2, idx, 4)
    d = solve_direct(k)
    ref = stationary_by_least_squares(k.to_csr().toarray())
    assert np.abs(d.flat() - ref).max() <= 1e-12


def test_gth_stationary_two_state():
    P = np.array([[0.5, 0.5], [0.25, 0.75]])
    pi = gth_stationary(P)
    assert pi == pytest.approx([1 / 3, 2 / 3], rel=1e-14)


def test_power_agrees_with_direct(small_kernel):
    d = solve_direct(small_kernel)
    p = solve_power(small_kernel, tol=1e-10)
    assert np.abs(d.flat() - p.flat()).sum() <= 1e-8


def test_power_forced_failure(small_kernel):
    with pytest.raises(ConvergenceFailureError) as exc:
        solve_power(small_kernel, tol=1e-10, max_iters=1)
    assert np.isfinite(exc.value.residual)


def test_power_single_state_converges_immediately(params2):
    idx = enumerate_background(2, 0)
    k = build_kernel(params2, idx, 0)
    p = solve_power(k, tol=1e-10, max_iters=1)
    assert p.pi[0, 0] == 1.0


def test_simulate_deterministic(small_kernel):
    a = simulate(small_kernel, seed=42, steps=200_000)
    b = simulate(small_kernel, seed=42, steps=200_000)
    assert np.array_equal(a.pi, b.pi)
    c = simulate(small_kernel, seed=43, steps=200_000)
    assert not np.array_equal(a.pi, c.pi)


def test_simulate_close_to_direct(small_kernel):
    d = solve_direct(small_kernel)
    s = simulate(small_kernel, seed=1, steps=1_000_000)
    assert tv_distance(s, d) <= 2e-2


def test_simulate_burn_in_validation(small_kernel):
    with pytest.raises(InvalidParameterError):
        simulate(small_kernel, seed=1, steps=100, burn_in=100)


def test_level_marginal_geometric_tail(small_kernel, params2):
    # qualitative check: tail mass of the minimum decays roughly like rho^k
    d = solve_direct(small_kernel)
    lm = d.level_marginal()
    tail = np.array([lm[n:].sum() for n in range(6, 12)])
    ratios = tail[1:] / tail[:-1]
    assert np.all(np.abs(ratios - params2.rho ** 2) < 0.05)


def test_level_ratio_stabilizes(small_kernel):
    d = solve_direct(small_kernel)
    lm = d.level_marginal()
    r = lm[1:] / lm[:-1]
    window = r[8:14]
    assert np.abs(np.diff(window)).max() <= 1e-3


def test_pi_csv_export(tmp_path, small_kernel):
    d = solve_direct(small_kernel)
    path = tmp_path / "pi.csv"
    write_pi_csv(d, small_kernel.idx, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "level,h_1,h_2,probability"
    assert len(lines) == 1 + small_kernel.n_states
    total = sum(float(ln.rsplit(",", 1)[1]) for ln in lines[1:])
    assert total == pytest.approx(1.0, abs=1e-12)
