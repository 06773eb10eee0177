"""Tests for channel statistics and synthesis."""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hapsnoma.channel import (
    ChannelStats,
    CovarianceNotPSDError,
    DegenerateSpreadError,
    PathLossParams,
    build_channel_stats,
    covariance_sqrt,
    db_to_gain,
    dump_channel_stats,
    los_probability,
    los_steering,
    one_ring_covariance,
    path_loss_db,
    rank_one_covariance,
    sample_channel,
)
from hapsnoma.geometry import (
    ArrayGeometry,
    Orientation,
    element_positions,
    local_angles,
    one_ring_spreads,
    place_user,
    wave_vector,
)

# --- Fixtures ---


@pytest.fixture
def geom() -> ArrayGeometry:
    return ArrayGeometry.for_elements(8, 2.5e9, orientation=Orientation.VERTICAL)


@pytest.fixture
def terrestrial_stats(geom: ArrayGeometry) -> ChannelStats:
    """Rayleigh user close to a mast, wide angular spread."""
    placement = place_user(120.0, 60.0, 25.0, 50.0)
    return build_channel_stats(
        geom,
        placement,
        PathLossParams(exponent=3.0),
        np.random.default_rng(7),
        allow_los=False,
        quad_nodes=20,
    )


# --- Large-scale fading ---


class TestPathLoss:
    """Tests for path loss and LoS probability."""

    def test_free_space_value(self) -> None:
        """Exponent 2 is Friis: about 100.41 dB at 1 km and 2.5 GHz."""
        assert path_loss_db(1000.0, 2.5e9) == pytest.approx(100.41, abs=0.01)

    def test_shadowing_is_additive(self) -> None:
        base = path_loss_db(2000.0, 2.5e9)
        assert path_loss_db(2000.0, 2.5e9, shadow_draw=7.5) == pytest.approx(base + 7.5)

    def test_exponent_scales_distance_term(self) -> None:
        d = 1500.0
        diff = path_loss_db(d, 2.5e9, exponent=3.0) - path_loss_db(d, 2.5e9, exponent=2.0)
        assert diff == pytest.approx(10.0 * math.log10(d))

    def test_invalid_distance(self) -> None:
        with pytest.raises(ValueError):
            path_loss_db(0.0, 2.5e9)

    def test_db_to_gain(self) -> None:
        assert db_to_gain(30.0) == pytest.approx(1e-3)
        assert db_to_gain(0.0) == 1.0

    def test_los_probability_at_kappa(self) -> None:
        assert los_probability(9.61, 9.61, 0.16) == pytest.approx(1.0 / 10.61)

    def test_los_probability_near_zenith(self) -> None:
        assert los_probability(88.6, 9.61, 0.16) > 0.999

    def test_los_probability_underflow(self) -> None:
        assert los_probability(-1e4, 9.61, 0.16) == 0.0

    @given(
        st.floats(min_value=0.0, max_value=90.0),
        st.floats(min_value=0.0, max_value=90.0),
    )
    def test_los_probability_monotone(self, a: float, b: float) -> None:
        lo, hi = sorted((a, b))
        assert los_probability(lo, 9.61, 0.16) <= los_probability(hi, 9.61, 0.16)


# --- Spatial statistics ---


class TestSteeringAndCovariance:
    """Tests for LoS steering and the one-ring covariance."""

    def test_steering_has_constant_modulus(self, geom: ArrayGeometry) -> None:
        a = los_steering(geom, 0.3, 0.2, 4.0)
        assert np.allclose(np.abs(a), 2.0)
        assert a[0] == pytest.approx(2.0)

    def test_covariance_is_hermitian_with_beta_diagonal(self, geom: ArrayGeometry) -> None:
        placement = place_user(200.0, -80.0, 25.0, 50.0)
        cov = one_ring_covariance(geom, one_ring_spreads(placement), placement.azimuth, 3e-9)
        assert np.array_equal(cov, cov.conj().T)
        assert np.allclose(cov.diagonal().real, 3e-9, rtol=1e-10)
        assert np.trace(cov).real == pytest.approx(8 * 3e-9)

    def test_covariance_is_psd(self, geom: ArrayGeometry) -> None:
        placement = place_user(200.0, -80.0, 25.0, 50.0)
        cov = one_ring_covariance(geom, one_ring_spreads(placement), placement.azimuth, 1.0)
        assert np.linalg.eigvalsh(cov).min() > -1e-8

    def test_zero_spread_raises(self, geom: ArrayGeometry) -> None:
        with pytest.raises(DegenerateSpreadError):
            one_ring_covariance(geom, (0.0, 0.1, 0.5), 0.0, 1.0)

    def test_rank_one_limit(self, geom: ArrayGeometry) -> None:
        """A tiny spread converges to the rank-one covariance."""
        theta_c = 0.4
        narrow = one_ring_covariance(geom, (1e-7, 1e-7, theta_c), 0.2, 1.0)
        limit = rank_one_covariance(geom, 0.2, theta_c, 1.0)
        assert np.allclose(narrow, limit, atol=1e-6)
        assert np.linalg.matrix_rank(limit, tol=1e-9) == 1

    def test_sqrt_squares_back(self, terrestrial_stats: ChannelStats) -> None:
        cov = terrestrial_stats.covariance / terrestrial_stats.beta_nlos
        root = covariance_sqrt(cov)
        assert np.allclose(root @ root, cov, atol=1e-9)

    def test_sqrt_rejects_indefinite(self) -> None:
        with pytest.raises(CovarianceNotPSDError) as exc_info:
            covariance_sqrt(np.diag([1.0, -1.0]).astype(np.complex128))
        assert exc_info.value.min_eigenvalue == pytest.approx(-1.0)

    def test_sqrt_clamps_quadrature_noise(self) -> None:
        cov = np.diag([1.0, -1e-12]).astype(np.complex128)
        root = covariance_sqrt(cov)
        assert np.allclose(root @ root, np.diag([1.0, 0.0]), atol=1e-12)


# --- Statistics builder ---


class TestBuildChannelStats:
    """Tests for per-user statistics."""

    def test_same_seed_same_stats(self, geom: ArrayGeometry) -> None:
        placement = place_user(300.0, 100.0, 20000.0, 50.0)
        a = build_channel_stats(geom, placement, PathLossParams(), np.random.default_rng(3))
        b = build_channel_stats(geom, placement, PathLossParams(), np.random.default_rng(3))
        assert a.beta_los == b.beta_los
        assert a.has_los == b.has_los
        assert np.array_equal(a.covariance, b.covariance)

    def test_no_los_when_disallowed(self, terrestrial_stats: ChannelStats) -> None:
        assert terrestrial_stats.has_los is False
        assert terrestrial_stats.p_los == 0.0
        assert np.all(terrestrial_stats.mean_vector == 0)

    def test_shadowing_off_uses_mean_path_loss(self, geom: ArrayGeometry) -> None:
        placement = place_user(300.0, 100.0, 20000.0, 50.0)
        stats = build_channel_stats(
            geom, placement, PathLossParams(), np.random.default_rng(0), shadowing=False
        )
        expected = db_to_gain(path_loss_db(placement.distance, 2.5e9))
        assert stats.beta_los == pytest.approx(expected)
        assert stats.beta_nlos == pytest.approx(expected)

    def test_haps_user_almost_always_los(self) -> None:
        geom = ArrayGeometry.for_elements(4, 2.5e9)
        placement = place_user(500.0, 0.0, 20000.0, 50.0)
        rng = np.random.default_rng(11)
        draws = [build_channel_stats(geom, placement, PathLossParams(), rng) for _ in range(50)]
        assert sum(s.has_los for s in draws) >= 49

    def test_mean_power(self, geom: ArrayGeometry) -> None:
        placement = place_user(300.0, 100.0, 20000.0, 50.0)
        stats = build_channel_stats(
            geom, placement, PathLossParams(), np.random.default_rng(0), shadowing=False
        )
        expected = 8 * stats.beta_nlos + (8 * stats.beta_los if stats.has_los else 0.0)
        assert stats.mean_power == pytest.approx(expected)


# --- Synthesis ---


class TestSampleChannel:
    """Tests for Karhunen-Loeve channel sampling."""

    def test_shape_and_determinism(self, terrestrial_stats: ChannelStats) -> None:
        a = sample_channel(terrestrial_stats, 4, 99)
        b = sample_channel(terrestrial_stats, 4, 99)
        assert a.matrix.shape == (4, 8)
        assert a.n_rx == 4
        assert np.array_equal(a.matrix, b.matrix)

    def test_empirical_covariance_matches(self, terrestrial_stats: ChannelStats) -> None:
        """Sample covariance of many rows approaches R."""
        n = 20000
        h = sample_channel(terrestrial_stats, n, 5).matrix
        empirical = h.T @ h.conj() / n
        cov = terrestrial_stats.covariance
        error = np.linalg.norm(empirical - cov) / np.linalg.norm(cov)
        assert error < 0.05

    def test_empirical_mean_matches_los(self, geom: ArrayGeometry) -> None:
        placement = place_user(500.0, 0.0, 20000.0, 50.0)
        stats = build_channel_stats(
            geom, placement, PathLossParams(), np.random.default_rng(1), shadowing=False
        )
        stats = ChannelStats(
            los_mean=stats.los_mean,
            covariance=stats.covariance,
            beta_los=stats.beta_los,
            beta_nlos=stats.beta_nlos,
            has_los=True,
            p_los=stats.p_los,
        )
        h = sample_channel(stats, 20000, 2).matrix
        spread = math.sqrt(stats.beta_nlos * 8 / 20000)
        assert np.linalg.norm(h.mean(axis=0) - stats.los_mean) < 6 * spread

    def test_rejects_zero_antennas(self, terrestrial_stats: ChannelStats) -> None:
        with pytest.raises(ValueError):
            sample_channel(terrestrial_stats, 0, 1)


# --- Debug dump ---


class TestDumpChannelStats:
    """Tests for the statistics dump formats."""

    def test_json_layout(self, terrestrial_stats: ChannelStats, tmp_path: Path) -> None:
        path = dump_channel_stats(terrestrial_stats, tmp_path / "stats.json")
        data = json.loads(path.read_text(encoding="utf-8"))
        assert data["n_elements"] == 8
        assert data["has_los"] is False
        assert len(data["los_mean"]) == 2 * 8
        assert len(data["covariance"]) == 2 * 8 * 8
        # Interleaved re/im, row-major
        cov = terrestrial_stats.covariance
        assert data["covariance"][2] == pytest.approx(cov[0, 1].real)
        assert data["covariance"][3] == pytest.approx(cov[0, 1].imag)

    def test_binary_layout(self, terrestrial_stats: ChannelStats, tmp_path: Path) -> None:
        path = dump_channel_stats(terrestrial_stats, tmp_path / "stats.bin", fmt="binary")
        raw = path.read_bytes()
        header_line, body = raw.split(b"\n", 1)
        header = json.loads(header_line)
        assert header["n_elements"] == 8
        values = np.frombuffer(body, dtype="<f8")
        assert values.size == 2 * 8 + 2 * 8 * 8
        cov = values[16:].reshape(8, 8, 2)
        assert np.allclose(cov[..., 0] + 1j * cov[..., 1], terrestrial_stats.covariance)


class TestWorkedExamples:
    """Hand-evaluated path losses, probabilities and steering vectors."""

    def test_path_loss_cancels_at_unit_reference(self) -> None:
        assert path_loss_db(1.0, 299792458.0 / (4 * math.pi)) == pytest.approx(0.0, abs=1e-9)

    def test_path_loss_at_haps_altitude(self) -> None:
        assert path_loss_db(20000.0, 2.5e9) == pytest.approx(126.42, abs=0.01)

    def test_path_loss_per_decade(self) -> None:
        assert path_loss_db(100.0, 2.5e9) - path_loss_db(10.0, 2.5e9) == pytest.approx(20.0)

    def test_los_probability_at_zenith(self) -> None:
        assert los_probability(90.0, 9.61, 0.16) == pytest.approx(0.99997, abs=1e-5)

    def test_half_wavelength_pair_is_antiphase(self) -> None:
        geom = ArrayGeometry(m_h=2, m_v=1, wavelength=0.1)
        a = los_steering(geom, 0.0, 0.0, 4.0)
        assert np.allclose(a, [2.0, -2.0])

    def test_zero_gain_steering(self) -> None:
        geom = ArrayGeometry(m_h=2, m_v=2)
        assert np.allclose(los_steering(geom, 0.3, 0.4, 0.0), 0.0)

    def test_single_element_covariance(self) -> None:
        geom = ArrayGeometry(m_h=1, m_v=1)
        cov = one_ring_covariance(geom, (0.1, 0.05, 0.5), 0.0, 2.5)
        assert cov.shape == (1, 1)
        assert cov[0, 0] == pytest.approx(2.5)

    def test_zero_covariance_gives_mean(self) -> None:
        geom = ArrayGeometry(m_h=2, m_v=2)
        mean = los_steering(geom, 0.1, 0.2, 1.0)
        stats = ChannelStats(
            los_mean=mean,
            covariance=np.zeros((4, 4), dtype=np.complex128),
            beta_los=1.0,
            beta_nlos=0.0,
            has_los=True,
            p_los=1.0,
        )
        rows = sample_channel(stats, 3, 0).matrix
        assert np.array_equal(rows, np.tile(mean, (3, 1)))

    def test_white_covariance_entry_variance(self) -> None:
        stats = ChannelStats(
            los_mean=np.zeros(4, dtype=np.complex128),
            covariance=3.0 * np.eye(4, dtype=np.complex128),
            beta_los=0.0,
            beta_nlos=3.0,
            has_los=False,
            p_los=0.0,
        )
        h = sample_channel(stats, 100000, 8).matrix
        assert np.allclose(np.mean(np.abs(h) ** 2, axis=0), 3.0, rtol=0.02)


class TestQuadrature:
    """Tests for the one-ring integral itself."""

    def test_converged_at_default_nodes(self) -> None:
        geom = ArrayGeometry.for_elements(16, 2.5e9, orientation=Orientation.VERTICAL)
        placement = place_user(120.0, 40.0, 25.0, 50.0)
        spreads = one_ring_spreads(placement)
        coarse = one_ring_covariance(geom, spreads, placement.azimuth, 1.0, quad_nodes=30)
        fine = one_ring_covariance(geom, spreads, placement.azimuth, 1.0, quad_nodes=60)
        assert np.max(np.abs(coarse - fine)) <= 1e-6

    @pytest.mark.slow
    def test_matches_monte_carlo_integral(self) -> None:
        """Off-diagonal entries agree with a uniform-sampling estimate of the same box."""
        geom = ArrayGeometry(m_h=4, m_v=1, orientation=Orientation.VERTICAL)
        spreads = (0.0997, 0.02, 0.3)
        azimuth = 0.7
        cov = one_ring_covariance(geom, spreads, azimuth, 1.0)

        rng = np.random.default_rng(12)
        n = 1_000_000
        phi = azimuth + spreads[0] * rng.uniform(-1.0, 1.0, n)
        theta = spreads[2] + spreads[1] * rng.uniform(-1.0, 1.0, n)
        local_phi, local_theta = local_angles(geom.orientation, phi, theta)
        k = wave_vector(local_phi, local_theta, geom.wavelength)
        steering = np.exp(1j * (k @ element_positions(geom).T))
        estimate = steering.T @ steering.conj() / n

        assert np.max(np.abs(cov - estimate)) < 4e-3
