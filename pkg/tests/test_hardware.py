import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import hl_waterfill_grid
from tbq.correlation import CorrelationModel
from tbq.dither import kappa
from tbq.hardware import (
    HLDesign,
    QuantBudget,
    design_hl,
    equal_diag_rotation,
    hl_mse_correlated,
    hl_mse_finite,
    hl_mse_iid,
    hl_waterfill,
    max_useful_pq,
)
from tbq.linalg import sqrtm_psd
from tbq.task import TaskModel, UnsupportedCase, mmse_avg, mse_opt_vec, random_task


def identity_task(K, sigma2=1.0, corr=None):
    return TaskModel(np.sqrt(sigma2) * np.eye(K), np.eye(K), (sigma2 + 0.5) * np.eye(K),
                     corr or CorrelationModel())


# budget ------------------------------------------------------------------

def test_budget_levels_and_rate():
    b = QuantBudget(4.0, 0.25)
    assert b.levels == 256
    assert QuantBudget(4.0, 1.0).levels == 4
    assert QuantBudget(3.0, 0.5).levels == 8
    for R, r in [(2.5, 0.3), (7.0, 0.9), (1.0, 0.5)]:
        b = QuantBudget(R, r)
        assert b.levels >= 2
        assert 2 * r * np.log2(b.levels) <= R + 1e-12


def test_budget_rejects_too_few_levels():
    with pytest.raises(ValueError, match="fewer than 2"):
        QuantBudget(1.0, 0.6)
    with pytest.raises(ValueError):
        QuantBudget(1.0, 1.5)


def test_budget_split():
    b = QuantBudget(4.0, 0.3)
    P, P_q, P_r = b.split(10, 5)
    assert (P, P_q, P_r) == (15, 3, 0)
    P, P_q, P_r = QuantBudget(4.0, 0.25).split(6, 4)
    assert (P, P_q, P_r) == (6, 1, 2)
    assert P_q / 6 + P_r / 24 == pytest.approx(0.25)
    with pytest.raises(ValueError):
        QuantBudget(4.0, 0.25).split(3, 3)


def test_budget_support():
    b = QuantBudget(4.0, 0.5)
    assert b.support_sq == pytest.approx(kappa(2.0, 16) / 0.5)
    assert b.noise_var == pytest.approx(4 * b.support_sq / (3 * 256))


# waterfilling ------------------------------------------------------------

@pytest.mark.parametrize("s,M,P", [(1.0, 4, 3), (0.2, 2, 1), (7.0, 16, 8)])
def test_waterfill_equal_values(s, M, P):
    k = kappa(2, M)
    zeta, lam2 = hl_waterfill(np.full(P, s), M, k)
    assert zeta == pytest.approx(1 / s + 3 * M**2 / (4 * k * s), rel=1e-12)
    np.testing.assert_allclose(lam2, lam2[0], rtol=1e-12)


def test_waterfill_single_active_mode():
    sv = np.array([10.0, 0.5, 0.4, 0.1])
    k = kappa(2, 2)
    zeta, lam2 = hl_waterfill(sv, 2, k)
    assert lam2[0] > 0 and np.all(lam2[1:] == 0)
    z_ref = hl_waterfill_grid(sv, np.ones(4), 4 * k / (3 * 4 * 4))
    assert zeta == pytest.approx(z_ref, rel=1e-6)


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_waterfill_scale_invariance(seed, c):
    sv = np.random.default_rng(seed).exponential(size=6)
    z1, l1 = hl_waterfill(sv, 8, kappa(2, 8))
    z2, l2 = hl_waterfill(c * sv, 8, kappa(2, 8))
    assert z2 == pytest.approx(z1 / c, rel=1e-9)
    np.testing.assert_allclose(l2, l1, rtol=1e-8, atol=1e-12 * l1.max())


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.sampled_from([2, 3, 8, 64]))
def test_waterfill_normalization(seed, P, M):
    rng = np.random.default_rng(seed)
    sv = rng.exponential(size=P) * 10.0 ** rng.uniform(-4, 4)
    k = kappa(2, M)
    zeta, lam2 = hl_waterfill(sv, M, k, ratio=0.5)
    # with ratio r, Σ Λ² = (4κ/(3M̃² r)) Σ φ(ζ s) = P / r
    assert np.sum(lam2) == pytest.approx(P / 0.5, rel=1e-10)


# equal-diagonal rotation -------------------------------------------------

def test_rotation_two_by_two():
    U = equal_diag_rotation([1.0, 0.0])
    np.testing.assert_allclose(np.diag(U @ np.diag([1.0, 0.0]) @ U.conj().T), [0.5, 0.5],
                               atol=1e-15)
    np.testing.assert_allclose(np.abs(U), np.full((2, 2), 1 / np.sqrt(2)), atol=1e-15)


def test_rotation_flat_is_identity():
    np.testing.assert_array_equal(equal_diag_rotation(np.full(5, 2.0)), np.eye(5))


@settings(deadline=None, max_examples=50)
@given(st.integers(0, 2**32 - 1), st.integers(1, 64))
def test_rotation_properties(seed, P):
    rng = np.random.default_rng(seed)
    d = rng.exponential(size=P) * (rng.random(P) > 0.3)
    U = equal_diag_rotation(d)
    M = U @ np.diag(d) @ U.conj().T
    assert np.linalg.norm(U @ U.conj().T - np.eye(P)) < 1e-10
    assert np.max(np.abs(np.diag(M) - d.mean())) < 1e-10 * max(1.0, d.max())
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(M)), np.sort(d), atol=1e-10)


# MSE formulas ------------------------------------------------------------

def test_example_two_value():
    task = identity_task(4)
    excess = hl_mse_iid(task, QuantBudget(4.0, 1.0)) - mmse_avg(task)
    assert excess == pytest.approx(1 / 3.5, rel=1e-12)


def test_nothing_quantized():
    task = random_task(np.random.default_rng(2), 3, 5)
    phi = task.singular_values()
    assert hl_mse_iid(task, QuantBudget(4.0, 0.0)) == pytest.approx(
        mmse_avg(task) + np.sum(phi**2) / 3, rel=1e-12)


def test_high_rate_limit():
    task = random_task(np.random.default_rng(4), 3, 6)
    assert hl_mse_iid(task, QuantBudget(200.0, 0.5)) == pytest.approx(mmse_avg(task), rel=1e-9)


def test_unitary_invariance():
    rng = np.random.default_rng(6)
    K, L = 3, 5
    G = (rng.standard_normal((K, L)) + 1j * rng.standard_normal((K, L))) / 2
    Qk, _ = np.linalg.qr(rng.standard_normal((K, K)) + 1j * rng.standard_normal((K, K)))
    Ql, _ = np.linalg.qr(rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L)))
    G2 = Qk @ G @ Ql.conj().T
    t1 = TaskModel(G, np.eye(L), G @ G.conj().T + np.eye(K))
    t2 = TaskModel(G2, np.eye(L), G2 @ G2.conj().T + np.eye(K))
    b = QuantBudget(3.0, 0.4)
    assert hl_mse_iid(t1, b) == pytest.approx(hl_mse_iid(t2, b), rel=1e-10)


@settings(deadline=None, max_examples=60)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(0, 4),
       st.floats(0.2, 10), st.floats(0.01, 1.0))
def test_opt_is_lower_bound(seed, K, extra, R, r):
    r = min(r, R / 2)
    task = random_task(np.random.default_rng(seed), K, K + extra)
    b = QuantBudget(R, r)
    assert mse_opt_vec(task, R) <= hl_mse_iid(task, b) * (1 + 1e-9) + 1e-15


def test_max_useful_pq():
    rng = np.random.default_rng(1)
    assert max_useful_pq(random_task(rng, 3, 5)) == 3
    assert max_useful_pq(TaskModel(np.zeros((2, 3)), np.eye(3), np.eye(2))) == 0
    A = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 6))
    assert max_useful_pq(TaskModel(A, np.eye(6), A @ A.T + np.eye(5))) == 2


def test_correlated_reduces_to_iid():
    task = random_task(np.random.default_rng(9), 2, 4)
    b = QuantBudget(3.0, 0.5)
    res = hl_mse_correlated(task, b, 8)
    assert res.finite == pytest.approx(hl_mse_iid(task, b), rel=1e-9)
    assert res.integral == pytest.approx(hl_mse_iid(task, b), rel=1e-9)


def test_correlated_szego_convergence():
    rng = np.random.default_rng(10)
    white = random_task(rng, 2, 4)
    task = TaskModel(white.gamma, white.cov_y, white.cov_g, CorrelationModel.jakes(0.4))
    b = QuantBudget(2.0, 0.5)
    gaps = []
    for n in (64, 128, 256):
        res = hl_mse_correlated(task, b, n, n_spectrum=4096)
        gaps.append(abs(res.finite - res.integral))
    assert gaps[0] > gaps[1] > gaps[2]


def test_correlated_needs_rank():
    task = random_task(np.random.default_rng(1), 3, 4, CorrelationModel.jakes(0.3))
    with pytest.raises(UnsupportedCase):
        hl_mse_correlated(task, QuantBudget(2.0, 0.5), 16)


def test_correlated_high_rate():
    task = random_task(np.random.default_rng(12), 2, 3, CorrelationModel.jakes(0.3))
    res = hl_mse_correlated(task, QuantBudget(300.0, 1.0), 32)
    assert res.finite == pytest.approx(mmse_avg(task), rel=1e-9)
    assert res.integral == pytest.approx(mmse_avg(task), rel=1e-9)


# designs -----------------------------------------------------------------

def _input_diag(design, task, n):
    C = task.correlation.toeplitz(n)
    A = design.full_combiner()
    if design.factored:
        # full combiner A' ⊗ I acts on vec(Y^T) ordering (l n + k)
        cov = np.kron(task.cov_y, C)
    else:
        cov = np.kron(task.cov_y, C)
    return np.real(np.diag(A @ cov @ A.conj().T))


def test_identity_task_design():
    task = identity_task(4, 2.0)
    b = QuantBudget(4.0, 1.0)
    d = design_hl(task, b, 3)
    assert d.factored
    np.testing.assert_allclose(d.lam2, d.lam2[0], rtol=1e-12)
    A = d.combiner
    G = A @ A.conj().T
    np.testing.assert_allclose(G, G[0, 0] * np.eye(4), atol=1e-12 * abs(G[0, 0]))


@pytest.mark.parametrize("corr", [None, CorrelationModel.jakes(0.3)])
def test_design_equal_input_power(corr):
    rng = np.random.default_rng(21)
    w = random_task(rng, 2, 4)
    task = TaskModel(w.gamma, w.cov_y, w.cov_g, corr or CorrelationModel())
    b = QuantBudget(3.0, 0.375)
    n = 8
    d = design_hl(task, b, n, factored=False)
    assert d.combiner.shape[0] == d.n_quantizers == 12
    assert d.digital.shape[1] == 12
    diag = _input_diag(d, task, n)
    target = d.support**2 / b.kappa
    np.testing.assert_allclose(diag, target, rtol=1e-8)


def test_factored_matches_dense():
    task = random_task(np.random.default_rng(22), 3, 4)
    b = QuantBudget(4.0, 0.5)
    f = design_hl(task, b, 4)
    d = design_hl(task, b, 4, factored=False)
    assert f.factored and not d.factored
    assert f.predicted_mse == pytest.approx(d.predicted_mse, rel=1e-9)
    assert f.predicted_mse == pytest.approx(hl_mse_iid(task, b), rel=1e-9)
    diag = _input_diag(f, task, 4)
    np.testing.assert_allclose(diag, f.support**2 / b.kappa, rtol=1e-8)


def test_factored_forbidden_when_correlated():
    task = random_task(np.random.default_rng(3), 2, 4, CorrelationModel.jakes(0.2))
    with pytest.raises(ValueError):
        design_hl(task, QuantBudget(2.0, 0.5), 4, factored=True)


def test_design_warns_on_unused_quantizers():
    task = random_task(np.random.default_rng(3), 2, 4)
    with pytest.warns(UserWarning, match="exceed"):
        design_hl(task, QuantBudget(4.0, 0.75), 2)


def _model_mse(design, task, n, trials, rng):
    """Simulated MSE of ``design`` with the additive noise model replaced by a real ADC."""
    from tbq.dither import quantize_complex_seq

    L, K = task.L, task.K
    S = sqrtm_psd(task.cov_y)
    Cs = sqrtm_psd(task.correlation.toeplitz(n))
    W = (rng.standard_normal((trials, n, L)) + 1j * rng.standard_normal((trials, n, L))) / np.sqrt(2)
    Y = Cs @ W @ S.T
    target = Y @ task.gamma.T
    Q = quantize_complex_seq(design.combine(Y), design.quantizer(), rng)
    est = design.estimate(Q)
    return mmse_avg(task) + np.mean(np.abs(target - est) ** 2) * 1.0


@pytest.mark.parametrize("corr,factored", [(None, True), (None, False),
                                           (CorrelationModel.jakes(0.25), False)])
def test_design_monte_carlo(corr, factored):
    rng = np.random.default_rng(30)
    w = random_task(rng, 2, 4)
    task = TaskModel(w.gamma, w.cov_y, w.cov_g, corr or CorrelationModel())
    b = QuantBudget(6.0, 0.5)
    d = design_hl(task, b, 6, factored=factored)
    emp = _model_mse(d, task, 6, 20000, rng)
    assert emp == pytest.approx(d.predicted_mse, rel=0.05)
    if corr is not None:
        assert d.predicted_mse == pytest.approx(hl_mse_finite(task, b, 6), rel=1e-9)


def test_design_json_roundtrip():
    task = random_task(np.random.default_rng(5), 2, 4)
    d = design_hl(task, QuantBudget(4.0, 0.5), 3)
    d2 = HLDesign.from_dict(__import__("json").loads(d.to_json()))
    np.testing.assert_array_equal(d2.combiner, d.combiner)
    np.testing.assert_array_equal(d2.digital, d.digital)
    assert d2.predicted_mse == d.predicted_mse and d2.factored == d.factored


def test_design_needs_quantizers():
    with pytest.raises(ValueError):
        design_hl(random_task(np.random.default_rng(0), 2, 3), QuantBudget(2.0, 0.0), 2)
