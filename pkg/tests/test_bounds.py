import math

import numpy as np
import pytest

from blockrelax.bounds import (
    BoundInputs,
    MatrixConstants,
    alpha_from_delta,
    complement_power,
    delta_from_alpha,
    ensemble_norm,
    ensemble_norm_weights,
    limit_ratio,
    matrix_constants,
    max_trials_bound,
    recovery_failure_bound,
    spectral_norm,
    success_prob_block_relaxation,
    success_prob_repeated_trials,
)
from blockrelax.generate import GenConfig, build_instance
from blockrelax.model import BlockSensingMatrix, Selector, SupportPattern


def test_spectral_norm_against_svd():
    rng = np.random.default_rng(8)
    for shape in [(3, 5), (6, 2), (4, 4), (1, 7)]:
        a = rng.standard_normal(shape)
        exact = np.linalg.svd(a, compute_uv=False)[0]
        assert spectral_norm(a) == pytest.approx(exact, rel=1e-8)
    assert spectral_norm(np.zeros((3, 3))) == 0.0


def test_matrix_constants_identity_blocks():
    A = BlockSensingMatrix(blocks=(np.eye(4), 2.0 * np.eye(4)))
    sp = SupportPattern(indices=(0, 1, 4), n=4, theta=2)
    mc = matrix_constants(A, sp)
    # block 0 support energy 2, block 1 support energy 4; operator norms 1 and 2
    assert mc.f_s_sq == pytest.approx(2.0, rel=1e-9)
    assert mc.m_sq == pytest.approx(4.0, rel=1e-8)
    assert mc.f_s == pytest.approx(math.sqrt(2.0), rel=1e-9)


def test_ensemble_norm_identity_example():
    n, r, theta, s = 4, 3, 2, 2
    A = BlockSensingMatrix(blocks=(np.eye(n), np.eye(n)))
    sp = SupportPattern(indices=(0, 1, 4, 5), n=n, theta=theta)
    p_x, p_X = 0.625, 0.25
    wa = ensemble_norm_weights(A, sp, (0, 1), r, p_x, p_X)
    # planted coordinate: sqrt(p_x * s); others sqrt(p_X * n)
    assert wa[0] == pytest.approx(math.sqrt(p_x * s), abs=1e-14)
    assert wa[1] == pytest.approx(math.sqrt(p_X * n), abs=1e-14)
    assert wa[r + 1] == pytest.approx(math.sqrt(p_x * s), abs=1e-14)

    u = np.array([1.0, 0.5, 0.0, -1.0, 0.0, 2.0])
    val = ensemble_norm(u, A, sp, (0, 1), p_x, p_X, r=r)
    # planted coordinates sit at (block 0, col 0) and (block 1, col 1)
    by_hand = math.sqrt(
        p_x * s * u[0] ** 2
        + p_X * n * (u[1] ** 2 + u[2] ** 2)
        + p_x * s * u[4] ** 2
        + p_X * n * (u[3] ** 2 + u[5] ** 2)
    )
    assert val == pytest.approx(by_hand, rel=1e-12)
    # Selector form agrees with the bare-vector form
    sel = Selector(z=u, r=r, theta=theta)
    assert ensemble_norm(sel, A, sp, (0, 1), p_x, p_X) == pytest.approx(val, rel=1e-15)


def test_ensemble_norm_requires_r_for_bare_vectors():
    A = BlockSensingMatrix(blocks=(np.eye(2),))
    sp = SupportPattern(indices=(0,), n=2, theta=1)
    with pytest.raises(ValueError, match="pass r"):
        ensemble_norm(np.ones(2), A, sp, (0,), 1.0, 1.0)


def test_delta_alpha_round_trip():
    assert delta_from_alpha(16.0, t=4, s_bar=4, f_s=2.0, p_x=1.0) == pytest.approx(0.75, abs=1e-15)
    for delta in (0.1, 0.5, 0.9):
        a = alpha_from_delta(delta, t=3, s_bar=5, f_s=1.5, p_x=0.625)
        assert delta_from_alpha(a, t=3, s_bar=5, f_s=1.5, p_x=0.625) == pytest.approx(delta, abs=1e-12)
    # alpha too small drives delta negative; report raw, no silent clamping
    assert delta_from_alpha(1.0, t=4, s_bar=4, f_s=2.0, p_x=1.0) < 0.0
    with pytest.raises(ValueError):
        alpha_from_delta(1.0, t=1, s_bar=1, f_s=1.0, p_x=1.0)
    with pytest.raises(ValueError):
        delta_from_alpha(0.0, t=1, s_bar=1, f_s=1.0, p_x=1.0)


def frozen_inputs(**kw):
    args = dict(
        alpha=8.0,
        delta=0.5,
        nu=0.2,
        p_x=0.625,
        p_X=0.2,
        n=100,
        n_cols=40,
        t=4,
        constants=MatrixConstants(f_s_sq=16.0, m_sq=1.0),
        c=1.0,
        k_subg=1.0,
    )
    args.update(kw)
    return BoundInputs(**args)


def test_failure_bound_frozen_values():
    fb = recovery_failure_bound(frozen_inputs())
    assert fb.term_coherence == pytest.approx(12.456968112609958, rel=1e-12)
    assert fb.term_rip == pytest.approx(448981.74188830756, rel=1e-12)
    assert fb.total == pytest.approx(448994.19885642017, rel=1e-12)
    assert math.exp(fb.log_term_coherence) == pytest.approx(fb.term_coherence, rel=1e-12)
    assert math.exp(fb.log_term_rip) == pytest.approx(fb.term_rip, rel=1e-12)


def test_failure_bound_monotonicity():
    base = recovery_failure_bound(frozen_inputs())
    # sharper concentration (larger nu) shrinks the coherence term
    assert recovery_failure_bound(frozen_inputs(nu=0.4)).term_coherence < base.term_coherence
    # wider window (larger alpha) inflates it
    assert recovery_failure_bound(frozen_inputs(alpha=16.0)).term_coherence > base.term_coherence
    # more competing columns inflate it
    assert recovery_failure_bound(frozen_inputs(n_cols=80)).term_coherence > base.term_coherence
    # more support energy shrinks the isometry term
    stronger = frozen_inputs(constants=MatrixConstants(f_s_sq=64.0, m_sq=1.0))
    assert recovery_failure_bound(stronger).term_rip < base.term_rip
    assert recovery_failure_bound(frozen_inputs(c=2.0)).term_rip < base.term_rip
    assert recovery_failure_bound(frozen_inputs(k_subg=2.0)).term_rip > base.term_rip


def test_failure_bound_edge_cases():
    zero_window = recovery_failure_bound(frozen_inputs(delta=0.0))
    assert zero_window.term_rip == math.inf
    assert zero_window.total == math.inf
    no_competitors = recovery_failure_bound(frozen_inputs(n_cols=4, t=4))
    assert no_competitors.term_coherence == 0.0
    assert no_competitors.log_term_coherence == -math.inf


def test_failure_bound_log_space_survives_underflow():
    # exponent around -2e3: the plain exp underflows to 0.0 but the log field keeps the value
    fb = recovery_failure_bound(frozen_inputs(nu=1.0, n=2000, alpha=0.1))
    assert fb.term_coherence == 0.0
    assert fb.log_term_coherence < -1000.0
    assert np.isfinite(fb.log_term_coherence)


def test_bound_inputs_validation():
    with pytest.raises(ValueError):
        frozen_inputs(delta=1.5)
    with pytest.raises(ValueError):
        frozen_inputs(alpha=-1.0)
    with pytest.raises(ValueError):
        frozen_inputs(c=0.0)
    with pytest.raises(ValueError):
        frozen_inputs(t=41)


def test_max_trials_frozen_and_regimes():
    assert max_trials_bound(20, 100, 4) == pytest.approx(13.64953750828606, rel=1e-12)
    # with a long support the per-block term takes over
    assert max_trials_bound(20, 25, 4) == pytest.approx(math.exp(5.0) / 4.0, rel=1e-12)
    assert max_trials_bound(1000, 1, 1) == math.inf
    # nondecreasing in s, nonincreasing in theta
    vals = [max_trials_bound(s, 100, 4) for s in (4, 8, 16, 20)]
    assert vals == sorted(vals)
    vals = [max_trials_bound(20, 100, th) for th in (1, 2, 4, 8)]
    assert vals == sorted(vals, reverse=True)
    with pytest.raises(ValueError):
        max_trials_bound(0, 10, 1)


def test_success_prob_repeated_trials():
    assert success_prob_repeated_trials(0.1, 2) == pytest.approx(0.19, abs=1e-15)
    assert success_prob_repeated_trials(1.0, 3) == 1.0
    assert success_prob_repeated_trials(1.0, 0) == 0.0
    assert success_prob_repeated_trials(0.0, 100) == 0.0
    # tiny p: naive 1-(1-p)^r would return 0
    tiny = success_prob_repeated_trials(1e-300, 10)
    assert tiny == pytest.approx(1e-299, rel=1e-12)
    with pytest.raises(ValueError):
        success_prob_repeated_trials(1.1, 2)


def test_success_prob_block_relaxation():
    # single block with full selection reduces exactly to the repeated-trial law
    for p in (0.0, 1e-12, 0.3, 0.99, 1.0):
        for r in (1, 2, 7):
            assert success_prob_block_relaxation(p, r, theta=1) == success_prob_repeated_trials(p, r)
    val = success_prob_block_relaxation(0.1, 2, theta=3)
    assert val == pytest.approx(0.19**3, rel=1e-12)
    vec = success_prob_block_relaxation([0.1, 0.2], 2, theta=2)
    assert vec == pytest.approx(0.19 * 0.36, rel=1e-12)
    gated = success_prob_block_relaxation(0.1, 2, theta=3, p_select=0.5)
    assert gated == pytest.approx(0.5 * 0.19**3, rel=1e-12)
    approx = success_prob_block_relaxation(1e-4, 3, theta=2, taylor=True)
    assert approx == pytest.approx((3e-4) ** 2, rel=1e-12)
    with pytest.raises(ValueError):
        success_prob_block_relaxation([0.1, 0.2, 0.3], 2, theta=2)
    with pytest.raises(ValueError):
        success_prob_block_relaxation(0.5, 2, theta=1, p_select=1.5)


def test_complement_power_values():
    assert complement_power(0.5, 0.5) == pytest.approx(0.25, rel=1e-15)
    # (1 - 1e-2)**1e4, far below where naive subtraction loses digits
    assert complement_power(1e-2, 1e-4) == pytest.approx(2.24877485e-44, rel=1e-8)
    # double precision floors out for the steeper cases; 0.0 is the honest answer
    assert complement_power(1e-4, 1e-8) == 0.0
    assert complement_power(0.3, 1e9) == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        complement_power(1.0, 0.5)
    with pytest.raises(ValueError):
        complement_power(0.5, 0.0)


def test_limit_ratio_frozen_and_convergence():
    assert limit_ratio(1e-4, 1e-2) == pytest.approx(0.99506613086291847, rel=1e-12)
    assert abs(limit_ratio(1e-4, 1e-2) - 1.0) == pytest.approx(4.933869137e-3, rel=1e-6)
    assert abs(limit_ratio(1e-8, 1e-4) - 1.0) == pytest.approx(4.999333387e-5, rel=1e-6)
    assert abs(limit_ratio(1e-12, 1e-6) - 1.0) == pytest.approx(4.999993333e-7, rel=1e-6)
    # the ratio approaches 1 monotonically along this diagonal
    errs = [abs(limit_ratio(10.0**-k, 10.0 ** (-k / 2)) - 1.0) for k in (4, 6, 8, 10, 12)]
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] <= 1e-3


def test_matrix_constants_on_generated_instance():
    inst = build_instance(GenConfig(m=8, n=8, theta=2, r=3, s=3, master_seed=1))
    mc = matrix_constants(inst.A, inst.support)
    # orthonormal blocks: operator norm 1, support energy = support size
    assert mc.m_sq == pytest.approx(1.0, rel=1e-8)
    assert mc.f_s_sq == pytest.approx(3.0, rel=1e-9)
