import numpy as np
import pytest

from zalms.errors import DivergenceError, DomainError
from zalms.filtering import AlgoParams, FilterState, za_lms_step
from zalms.harness import (EnsembleConfig, JointDump, compare_curves, dump_joint_samples,
                           joint_ensemble, run_ensemble)
from zalms.signals import InputModel, PlantSpec, SeedSpec, noise_samples, regressor_windows
from zalms.theory import ModelKind, run_model


def test_single_run_first_iteration_is_minus_w_star(default_plant, ar_input, za_params):
    st = run_ensemble(default_plant, ar_input, za_params, EnsembleConfig(1, 1, 5))
    np.testing.assert_array_equal(st.m[0], -default_plant.w_star)


def test_perfect_start_without_noise_stays_perfect(small_plant, ar_input):
    plant = PlantSpec(small_plant.w_star, 0.0)
    st = run_ensemble(plant, ar_input, AlgoParams(0.01, 0.0), EnsembleConfig(10, 50, 1),
                      w0=plant.w_star)
    assert np.all(st.mse == 0) and np.all(st.emse == 0)


def test_block_matches_scalar_filter(small_plant, ar_input, za_params):
    # the vectorised ensemble reproduces run-by-run scalar filtering
    cfg = EnsembleConfig(3, 200, 99, record_iters=(150,))
    st = run_ensemble(small_plant, ar_input, za_params, cfg)
    wts = []
    for r in range(3):
        seed = SeedSpec(99, r, 0)
        x = regressor_windows(ar_input, seed, small_plant.L, 200)
        z = noise_samples(small_plant.noise_var, seed, 200)
        s = FilterState.zeros(small_plant.L)
        for n in range(150):
            s, _ = za_lms_step(s, x[n], float(x[n] @ small_plant.w_star) + z[n], za_params)
        wts.append(s.w - small_plant.w_star)
    np.testing.assert_allclose(st.snapshots[150], np.array(wts), atol=1e-12)


def test_independent_of_worker_count(small_plant, ar_input, za_params):
    a = run_ensemble(small_plant, ar_input, za_params, EnsembleConfig(150, 120, 7, workers=1))
    b = run_ensemble(small_plant, ar_input, za_params, EnsembleConfig(150, 120, 7, workers=3))
    for f in ("mse", "mse_se", "emse", "emse_se", "m", "m_se"):
        assert np.array_equal(getattr(a, f), getattr(b, f)), f


def test_mse_equals_emse_plus_noise_within_stderr(default_plant, ar_input, za_params):
    st = run_ensemble(default_plant, ar_input, za_params, EnsembleConfig(500, 1000, 2017))
    combined = np.sqrt(st.mse_se ** 2 + st.emse_se ** 2)
    z = np.abs(st.mse - st.emse - default_plant.noise_var) / combined
    # 1000 nearly independent checks: about 3 exceed 3 sigma by chance;
    # 9 is the 99.9% binomial quantile at the nominal 0.27% rate
    assert np.sum(z > 3) <= 9
    assert z.max() < 4.5


def test_stderr_scales_with_runs(small_plant, ar_input, za_params):
    a = run_ensemble(small_plant, ar_input, za_params, EnsembleConfig(100, 300, 3))
    b = run_ensemble(small_plant, ar_input, za_params, EnsembleConfig(400, 300, 3))
    ratio = np.median(a.emse_se[50:] / b.emse_se[50:])
    assert ratio == pytest.approx(2.0, rel=0.15)


def test_divergence_aborts_with_run_id(small_plant, ar_input):
    with pytest.raises(DivergenceError) as info:
        run_ensemble(small_plant, ar_input, AlgoParams(5.0, 0.0), EnsembleConfig(4, 2000, 1))
    assert info.value.run_id is not None and info.value.iteration is not None


def test_theory_against_itself(small_plant, ar_input, za_params):
    c = run_model(small_plant, ar_input, za_params, ModelKind.EXACT, 50)
    rep = compare_curves(c, c)
    assert np.all(rep.emse_abs_dev == 0) and np.all(rep.m_abs_dev == 0)
    assert rep.band_coverage == 1.0


def test_compare_length_mismatch(small_plant, ar_input, za_params):
    a = run_model(small_plant, ar_input, za_params, n_iters=20)
    b = run_model(small_plant, ar_input, za_params, n_iters=21)
    with pytest.raises(DomainError):
        compare_curves(a, b)


def test_independent_regressors_match_exact_theory(default_plant, iid_input, za_params):
    # with the independence assumption satisfied by construction the exact
    # model tracks the simulation
    st = run_ensemble(default_plant, iid_input, za_params, EnsembleConfig(500, 1000, 2017))
    rep = compare_curves(run_model(default_plant, iid_input, za_params, n_iters=1000), st,
                         band_from=100)
    assert rep.max_mean_dev_ratio() <= 1.0
    assert rep.band_coverage >= 0.9
    assert rep.steady_emse_rel_dev <= 0.10


def test_joint_sample_at_start_is_deterministic(default_plant, ar_input, za_params):
    (s,) = joint_ensemble(default_plant, ar_input, za_params, [JointDump(2, 7, 0, 20)], 1)
    assert s.count == 20
    np.testing.assert_array_equal(s.values, np.tile(-default_plant.w_star[[2, 7]], (20, 1)))
    np.testing.assert_allclose(s.cov, np.zeros((2, 2)), atol=1e-30)


def test_joint_sample_reports_actual_count(small_plant, ar_input, za_params):
    st = run_ensemble(small_plant, ar_input, za_params,
                      EnsembleConfig(30, 20, 1, record_pairs=(JointDump(0, 1, 10, 100),)))
    (s,) = dump_joint_samples(st, [JointDump(0, 1, 10, 100)])
    assert (s.requested, s.count) == (100, 30)
    assert s.summary()["count"] == 30


def test_joint_dump_index_errors(small_plant, ar_input, za_params):
    with pytest.raises(DomainError):
        joint_ensemble(small_plant, ar_input, za_params, [JointDump(0, 9, 5, 10)], 1)
    st = run_ensemble(small_plant, ar_input, za_params, EnsembleConfig(5, 10, 1))
    with pytest.raises(DomainError):
        dump_joint_samples(st, [JointDump(0, 1, 5, 10)])


def test_second_moments_recorded(small_plant, ar_input, za_params):
    st = run_ensemble(small_plant, ar_input, za_params,
                      EnsembleConfig(64, 30, 2, record_iters=(0, 29)))
    w = small_plant.w_star
    np.testing.assert_allclose(st.second_moments[0], np.outer(w, w), atol=1e-15)
    snap = st.snapshots[29]
    np.testing.assert_allclose(st.second_moments[29], snap.T @ snap / 64, atol=1e-12)


def test_recorded_iteration_out_of_range(small_plant, ar_input, za_params):
    with pytest.raises(DomainError):
        run_ensemble(small_plant, ar_input, za_params, EnsembleConfig(2, 10, 1, record_iters=(10,)))


def test_independent_regressors_joint_dumps_match_theory(default_plant, iid_input):
    p = AlgoParams(0.01, 0.001)
    samples = joint_ensemble(default_plant, iid_input, p,
                             [JointDump(2, 7, 800, 5000), JointDump(8, 9, 800, 5000)], 2017)
    c = run_model(default_plant, iid_input, p, n_iters=801, record_K=[800])
    central = c.K_snapshots[800] - np.outer(c.m[800], c.m[800])
    for s in samples:
        idx = [s.i, s.j]
        assert np.all(np.abs(s.cov - central[np.ix_(idx, idx)]) <= 3 * s.cov_stderr())
        assert np.all(np.abs(s.excess_kurtosis) <= 0.3)
