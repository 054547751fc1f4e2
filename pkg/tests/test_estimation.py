import numpy as np
import pytest
from numpy.testing import assert_allclose

from memlqg.estimation import (
    FILTER_MODES,
    FilterState,
    SyndromeFilterState,
    filter_step,
    kalman_gain,
    measurement_model,
    riccati_flow,
    stationary_filter,
    syndrome_filter_step,
)
from memlqg.model import (
    MemoryParams,
    input_covariance,
    noise_model,
    lambda_matrix,
    squeezed_vacuum,
    standard_encoding,
    standard_noise,
    vacuum,
)
from memlqg.numerics import is_psd, min_eigenvalue
from memlqg.openloop import steady_state, system_matrices

PARAMS = MemoryParams(nu=3.0, gamma=1.0, n_occ=2.0)
ENC = standard_encoding(-230.0)
NOISE = standard_noise(vacuum(), -0.8, PARAMS)


@pytest.mark.parametrize("mode,m", [("s1", 3), ("s2", 2)])
def test_measurement_model_shapes(mode, m):
    mm = measurement_model(mode, ENC, PARAMS, NOISE)
    assert mm.n_channels == m
    assert mm.C.shape == (m, 6)
    assert mm.D.shape == (m, 12)
    assert mm.innovation_cov.shape == (m, m)
    assert mm.cross_cov.shape == (6, m)
    assert_allclose(mm.C, np.sqrt(2.0 * PARAMS.nu) * mm.Btil)
    # record map: sqrt(2) Z on the field block, nothing on the bath block
    assert_allclose(mm.D[:, 6:], 0.0)
    assert_allclose(mm.D[:, :6], np.sqrt(2.0) * mm.Z)


def test_measurement_model_rejects_unknown_mode():
    with pytest.raises(ValueError):
        measurement_model("s3", ENC, PARAMS, NOISE)
    assert FILTER_MODES == ("s1", "s2")


def test_innovation_cov_vacuum_is_identity():
    noise0 = standard_noise(vacuum(), 0.0, PARAMS)
    mm = measurement_model("s1", ENC, PARAMS, noise0)
    # 2 Z Lambda Z^T with Lambda = I/2
    assert_allclose(mm.innovation_cov, np.eye(3), atol=1e-14)


def test_blind_channels_ignore_source_statistics():
    """The two-channel model must be bit-identical for any source covariance."""
    lam_a = lambda_matrix(vacuum(), squeezed_vacuum(-0.8), squeezed_vacuum(-0.8))
    lam_b = lambda_matrix(squeezed_vacuum(1.3), squeezed_vacuum(-0.8), squeezed_vacuum(-0.8))
    mm_a = measurement_model("s2", ENC, PARAMS, noise_model(lam_a, PARAMS.n_occ))
    mm_b = measurement_model("s2", ENC, PARAMS, noise_model(lam_b, PARAMS.n_occ))
    assert np.array_equal(mm_a.innovation_cov, mm_b.innovation_cov)
    assert np.array_equal(mm_a.cross_cov, mm_b.cross_cov)
    assert np.array_equal(mm_a.C, mm_b.C)
    # the three-channel model does see the source
    mm3_a = measurement_model("s1", ENC, PARAMS, noise_model(lam_a, PARAMS.n_occ))
    mm3_b = measurement_model("s1", ENC, PARAMS, noise_model(lam_b, PARAMS.n_occ))
    assert not np.allclose(mm3_a.innovation_cov, mm3_b.innovation_cov)


@pytest.mark.parametrize("mode", FILTER_MODES)
def test_stationary_filter_zeroes_riccati_flow(mode):
    mm = measurement_model(mode, ENC, PARAMS, NOISE)
    sf = stationary_filter(mm, PARAMS, ENC, NOISE)
    sys = system_matrices(PARAMS, ENC)
    flow = riccati_flow(sf.Vc, mm, sys, NOISE)
    assert np.abs(flow).max() < 1e-9
    assert is_psd(sf.Vc)
    assert_allclose(sf.Ktil, mm.Btil @ sf.K, atol=1e-14)


@pytest.mark.parametrize("mode", FILTER_MODES)
def test_care_and_march_routes_agree(mode):
    p = MemoryParams(nu=1.0, gamma=1.0, n_occ=1.0)
    noise = standard_noise(vacuum(), -1.0, p)
    mm = measurement_model(mode, ENC, p, noise)
    sf_care = stationary_filter(mm, p, ENC, noise, method="care")
    sf_march = stationary_filter(mm, p, ENC, noise, method="march")
    assert_allclose(sf_march.Vc, sf_care.Vc, atol=1e-7)
    with pytest.raises(ValueError):
        stationary_filter(mm, p, ENC, noise, method="newton")


def test_conditioning_never_increases_uncertainty():
    st = steady_state(PARAMS, ENC, NOISE)
    for mode in FILTER_MODES:
        mm = measurement_model(mode, ENC, PARAMS, NOISE)
        sf = stationary_filter(mm, PARAMS, ENC, NOISE)
        gap = st.cov - sf.Vc
        assert min_eigenvalue(gap) > -1e-10
        assert np.trace(sf.Vc) < np.trace(st.cov)
    # and the richer record conditions harder
    mm1 = measurement_model("s1", ENC, PARAMS, NOISE)
    mm2 = measurement_model("s2", ENC, PARAMS, NOISE)
    v1 = stationary_filter(mm1, PARAMS, ENC, NOISE).Vc
    v2 = stationary_filter(mm2, PARAMS, ENC, NOISE).Vc
    assert np.trace(v1) < np.trace(v2)


def test_lossless_memory_needs_no_correction():
    """With no loss the conditional covariance equals the written input and
    the gain vanishes identically — there is nothing left to learn."""
    p = MemoryParams(nu=3.0, gamma=0.0, n_occ=0.0)
    noise = standard_noise(vacuum(), -0.6, p)
    mm = measurement_model("s1", ENC, p, noise)
    sf = stationary_filter(mm, p, ENC, noise)
    assert_allclose(sf.Vc, input_covariance(noise.Lambda), atol=1e-10)
    assert np.abs(sf.K).max() < 1e-10


def test_kalman_gain_definition():
    mm = measurement_model("s2", ENC, PARAMS, NOISE)
    Vc = 0.5 * np.eye(6)
    K = kalman_gain(Vc, mm)
    expected = (Vc @ mm.C.T + mm.cross_cov) @ np.linalg.inv(mm.innovation_cov)
    assert_allclose(K, expected, atol=1e-12)


def test_syndrome_filter_tracks_projected_full_filter():
    """B_tilde maps the full-state update onto the reduced update exactly:
    same record, same input, stationary gain."""
    mm = measurement_model("s1", ENC, PARAMS, NOISE)
    sf = stationary_filter(mm, PARAMS, ENC, NOISE)
    sys = system_matrices(PARAMS, ENC)
    rng = np.random.default_rng(7)
    pi_x = rng.standard_normal(6)
    dt = 1e-3
    fs = FilterState(pi_x=pi_x, Vc=sf.Vc.copy())
    ss = SyndromeFilterState(pi_s=mm.Btil @ pi_x)
    for _ in range(50):
        dy = rng.standard_normal(3) * np.sqrt(dt)
        u = rng.standard_normal(6)
        fs = filter_step(fs, dy, u, dt, mm, sys, NOISE)
        ss = syndrome_filter_step(ss, dy, u, dt, mm, PARAMS, sf.Ktil)
        assert_allclose(ss.pi_s, mm.Btil @ fs.pi_x, atol=1e-12)


def test_filter_step_warns_on_coarse_step():
    mm = measurement_model("s1", ENC, PARAMS, NOISE)
    sf = stationary_filter(mm, PARAMS, ENC, NOISE)
    sys = system_matrices(PARAMS, ENC)
    fs = FilterState(pi_x=np.zeros(6), Vc=sf.Vc.copy())
    with pytest.warns(UserWarning):
        filter_step(fs, np.zeros(3), np.zeros(6), 1.0, mm, sys, NOISE)
