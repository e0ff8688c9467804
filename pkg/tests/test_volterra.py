import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randtree import volterra
from randtree.errors import (
    DomainError,
    GridError,
    NoConvergence,
    TailNotFlatWarning,
)
from randtree.model_core import INV_E, ModelParams
from randtree.volterra import (
    GridFunction,
    beta_from_p,
    epsilon_bar,
    incomplete_gamma_II,
    ite1_scheme,
    ite_scheme,
    lower_bound_ld,
    r_recursion,
    rec_ab,
    solve_p_from_beta,
)

R_02 = 0.25917110181907377  # bisection oracle, r e^{-r} = 0.2
X_2 = 0.35173371124919584  # bisection oracle, x e^{x} = 0.5
II_2_HALF = 0.7025574585997436  # direct 30-term series oracle

GRID = (2e-3, 30.0)


def _grid(step=1e-2, horizon=20.0):
    n = int(round(horizon / step)) + 1
    return step, step * np.arange(n)


# -- system building blocks ------------------------------------------------


def test_beta_from_p_constant_one():
    h, t = _grid()
    beta = beta_from_p(GridFunction(h, np.ones_like(t)), ModelParams(0.5, 2.0))
    assert np.allclose(beta.values, 2.0)


def test_beta_from_p_zero():
    h, t = _grid()
    beta = beta_from_p(GridFunction(h, np.zeros_like(t)), ModelParams(0.5, 2.0))
    assert np.allclose(beta.values, 2.0 * np.exp(-0.5 * t), atol=1e-10)


def test_beta_from_p_exponential_cdf():
    h, t = _grid(1e-3, 10.0)
    mu = 1.0
    p = 1.0 - np.exp(-mu * t)
    beta = beta_from_p(GridFunction(h, p), ModelParams(0.3, mu))
    expected = mu * np.exp(-0.3 * (1.0 - np.exp(-mu * t)))
    assert np.allclose(beta.values, expected, atol=1e-6)


def test_solve_p_constant_beta():
    h, t = _grid(1e-3, 10.0)
    mu = 1.3
    p = solve_p_from_beta(GridFunction(h, np.full_like(t, mu)))
    assert np.allclose(p.values, 1.0 - np.exp(-mu * t), atol=1e-5)


def test_solve_p_zero_beta():
    h, t = _grid()
    p = solve_p_from_beta(GridFunction(h, np.zeros_like(t)))
    assert np.all(p.values == 0.0)


def test_solve_p_grid_halving_order():
    # Richardson comparison: the coarse answer approaches the fine one at O(h^2)
    mu = 1.0
    errs = []
    for h in (4e-3, 2e-3, 1e-3):
        _, t = _grid(h, 5.0)
        p = solve_p_from_beta(GridFunction(h, mu * np.exp(-0.4 * t)))
        exact_idx = int(round(2.0 / h))
        errs.append(p.values[exact_idx])
    d1 = abs(errs[0] - errs[1])
    d2 = abs(errs[1] - errs[2])
    assert d2 < d1
    assert math.log2(d1 / d2) >= 1.5


def test_grid_function_validation():
    with pytest.raises(GridError):
        GridFunction(0.0, np.ones(5))
    with pytest.raises(GridError):
        GridFunction(0.1, np.array([1.0, np.inf]))


def test_grid_function_csv_roundtrip(tmp_path):
    g = GridFunction(0.25, np.array([0.0, 0.3, 0.9, 1.0]))
    path = tmp_path / "g.csv"
    g.to_csv(path)
    assert path.read_text().splitlines()[0] == "t,value"
    g2 = GridFunction.from_csv(path)
    assert g2.step == pytest.approx(0.25)
    assert np.allclose(g2.values, g.values)


# -- iterative schemes -----------------------------------------------------


def test_ite_matches_root():
    state = ite_scheme(ModelParams(0.2, 1.0), GRID)
    assert state.converged
    assert state.r_k == pytest.approx(R_02, abs=1e-3)
    assert state.m_k == pytest.approx(R_02 / 0.2, abs=5e-3)


def test_ite_system_residual():
    state = ite_scheme(ModelParams(0.2, 1.0), GRID)
    beta2 = beta_from_p(state.p, ModelParams(0.2, 1.0))
    assert np.abs(beta2.values - state.beta.values).max() < 1e-6
    p2 = solve_p_from_beta(state.beta)
    assert np.abs(p2.values - state.p.values).max() < 1e-6


def test_ite_diverges_above_critical():
    with pytest.raises(NoConvergence):
        ite_scheme(ModelParams(0.4, 1.0), (5e-3, 30.0))


def test_ite_near_critical_flagged():
    state = ite_scheme(ModelParams(INV_E, 1.0), (5e-3, 30.0), k_max=30)
    assert not state.converged
    assert state.r_k <= 1.0 + 1e-3


def test_ite1_ergodic_proper():
    q, ell = ite1_scheme(ModelParams(0.2, 1.0), GRID)
    assert ell == pytest.approx(1.0, abs=5e-3)
    assert np.all(np.diff(q.values) >= -1e-12)


def test_ite1_transient_bracket():
    with warnings.catch_warnings():
        warnings.simplefilter("error", TailNotFlatWarning)
        q, ell = ite1_scheme(ModelParams(2.0, 1.0), GRID)
    assert X_2 - 1e-3 <= ell <= 0.5
    assert q.values[-1] <= ell + 1e-6


def test_ite1_first_iterate_shape():
    # q_0 = (mu/(lam+mu)) (1 - e^{-(lam+mu) t}): one solve from gamma_0
    lam, mu = 2.0, 1.0
    h, t = _grid(1e-3, 10.0)
    gamma0 = mu * np.exp(-lam * t)
    q0 = solve_p_from_beta(GridFunction(h, gamma0))
    expected = (mu / (lam + mu)) * (1.0 - np.exp(-(lam + mu) * t))
    assert np.abs(q0.values - expected).max() < 1e-4


def test_ite1_dominated_by_ite():
    # q_k <= p_k pointwise: compare the converged limits in the ergodic case
    state = ite_scheme(ModelParams(0.2, 1.0), GRID)
    q, _ = ite1_scheme(ModelParams(0.2, 1.0), GRID)
    assert np.all(q.values <= state.p.values + 1e-6)


@pytest.mark.parametrize("rho", [0.5, 1.0, 2.0])
def test_ell_nonincreasing_in_rho(rho):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailNotFlatWarning)
        _, ell_lo = ite1_scheme(ModelParams(rho, 1.0), GRID)
        _, ell_hi = ite1_scheme(ModelParams(rho * 2, 1.0), GRID)
    assert ell_hi <= ell_lo + 1e-6


def test_scale_invariance():
    # (lam, mu) and (rho, 1) with time rescaled by mu give the same p grid
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailNotFlatWarning)
        q1, ell1 = ite1_scheme(ModelParams(4.0, 2.0), (1e-3, 15.0))
        q2, ell2 = ite1_scheme(ModelParams(2.0, 1.0), (2e-3, 30.0))
    assert ell1 == pytest.approx(ell2, abs=1e-4)
    assert np.abs(q1.values - q2.values).max() < 1e-3


# -- scalar recursions -----------------------------------------------------


def test_r_recursion_converges():
    seq, limit = r_recursion(0.2)
    assert limit is not None
    assert limit == pytest.approx(R_02, abs=1e-10)
    assert np.all(np.diff(seq) >= -1e-15)  # increasing to the limit


def test_r_recursion_critical():
    _, limit = r_recursion(INV_E, k_max=2_000_000, tol=1e-9)
    assert limit is not None
    # convergence is only algebraic at the critical point
    assert limit == pytest.approx(1.0, abs=5e-3)


def test_r_recursion_divergent():
    seq, limit = r_recursion(0.5)
    assert limit is None
    assert seq[-1] > 1.0


def test_rec_ab_ergodic_limit():
    seq = rec_ab(ModelParams(0.2, 1.0))
    a, b = seq.limit
    assert a == pytest.approx(1.0, abs=1e-8)
    assert b == pytest.approx(0.2 / R_02, abs=1e-8)
    assert seq.pairs[0] == (1.0 / 1.2, 1.2)


def test_rec_ab_transient_limit():
    seq = rec_ab(ModelParams(2.0, 1.0))
    a, b = seq.limit
    assert a == pytest.approx(X_2, abs=1e-8)
    assert b == pytest.approx(2.0, abs=1e-8)


def test_rec_ab_critical_both_branches():
    seq = rec_ab(ModelParams(INV_E, 1.0), k_max=2_000_000, tol=1e-10)
    a, b = seq.limit
    assert a == pytest.approx(1.0, abs=1e-3)
    assert b == pytest.approx(INV_E, abs=1e-3)


@given(st.floats(min_value=0.05, max_value=5.0))
@settings(max_examples=30, deadline=None)
def test_rec_ab_invariants(rho):
    seq = rec_ab(ModelParams(rho, 1.0), k_max=3_000_000, tol=1e-10)
    for a, b in seq.pairs:
        assert 0 < a <= 1
        assert b > 0


# -- incomplete gamma and the lower bound ----------------------------------


def test_ii_trivial_y_zero():
    assert incomplete_gamma_II(3.7, 0.0) == pytest.approx(1.0 / 3.7, rel=1e-14)


def test_ii_telescoped():
    assert incomplete_gamma_II(1.0, 1.0) == pytest.approx(math.e - 1.0, rel=1e-12)


def test_ii_frozen_oracle():
    assert incomplete_gamma_II(2.0, 0.5) == pytest.approx(II_2_HALF, rel=1e-12)


def test_ii_matches_quadrature():
    # II(x, y) = int_0^inf exp(-x t + y e^{-t}) dt
    x, y = 1.7, 0.8
    t = np.linspace(0.0, 60.0, 600001)
    val = np.trapezoid(np.exp(-x * t + y * np.exp(-t)), t)
    assert incomplete_gamma_II(x, y) == pytest.approx(val, rel=1e-8)


def test_ii_domain():
    with pytest.raises(DomainError):
        incomplete_gamma_II(0.0, 1.0)
    with pytest.raises(DomainError):
        incomplete_gamma_II(1.0, -0.5)


def test_lower_bound_ld_rho2():
    ell_d, theta, seq = lower_bound_ld(ModelParams(2.0, 1.0))
    assert seq.pairs[0] == (1.0 / 3.0, 3.0)
    assert ell_d <= 0.5
    assert X_2 - 0.05 < ell_d  # close below the true defect
    assert theta > 0


def test_lower_bound_ld_rho10():
    ell_d, _, _ = lower_bound_ld(ModelParams(10.0, 1.0))
    assert 0.9 <= 10.0 * ell_d <= 1.0


def test_lower_bound_first_step_below_q1():
    # ell_1 (1 - e^{-theta_1 t}) stays below the first increasing iterate q_1
    lam, mu = 2.0, 1.0
    _, _, seq = lower_bound_ld(ModelParams(lam, mu))
    ell_1, theta_1 = seq.pairs[1]
    h, t = _grid(1e-3, 10.0)
    q1_beta = beta_from_p(
        solve_p_from_beta(GridFunction(h, mu * np.exp(-lam * t))), ModelParams(lam, mu)
    )
    q1 = solve_p_from_beta(q1_beta)
    bound = ell_1 * (1.0 - np.exp(-theta_1 * t))
    assert np.all(bound <= q1.values + 1e-4)


def test_epsilon_bar_ergodic():
    state = ite_scheme(ModelParams(0.2, 1.0), GRID)
    eps = epsilon_bar(state.p, 1.0, 0.2)
    assert eps == pytest.approx(R_02, abs=2e-3)


def test_epsilon_bar_constant():
    h, t = _grid()
    g = GridFunction(h, np.full_like(t, 0.4))
    assert epsilon_bar(g, 0.4, 2.0) == pytest.approx(0.0, abs=1e-12)


def test_epsilon_bar_transient_finite():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailNotFlatWarning)
        q, ell = ite1_scheme(ModelParams(2.0, 1.0), GRID)
    eps = epsilon_bar(q, ell, 2.0)
    assert 0.0 < eps < 10.0
