"""Tests for detection, in-cluster ordering and NOMA rates."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hapsnoma.linkproc import (
    DegenerateChannelError,
    DetectionConfigError,
    EffectiveLink,
    build_link,
    cluster_rates,
    detection_vector,
    effective_gain,
    order_cluster,
    precoder,
    user_rate,
)


def _random_channel(seed: int, n_rx: int, n_tx: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n_rx, n_tx)) + 1j * rng.standard_normal((n_rx, n_tx))


class TestDetection:
    """Tests for inter-cluster nulling."""

    def test_precoder_is_identity(self) -> None:
        assert np.array_equal(precoder(3), np.eye(3))

    @settings(max_examples=30, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        n_tx=st.integers(min_value=1, max_value=5),
        extra_rx=st.integers(min_value=0, max_value=3),
    )
    def test_nulls_other_clusters(self, seed: int, n_tx: int, extra_rx: int) -> None:
        """v has unit norm and |v^H H p_k|^2 <= 1e-18 gamma for every other cluster k."""
        channel = _random_channel(seed, n_tx + extra_rx, n_tx)
        for m in range(n_tx):
            v = detection_vector(channel, m)
            assert np.linalg.norm(v) == pytest.approx(1.0)
            gain = effective_gain(channel, v, m)
            leakage = np.abs(v.conj() @ channel) ** 2
            for k in range(n_tx):
                if k != m:
                    assert leakage[k] <= 1e-18 * gain

    def test_square_channels_match_complement_oracle(self) -> None:
        """On random 4x4 channels gamma equals ||(I - Q Q^H) h_m||^2 with Q from QR."""
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            channel = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            for m in range(4):
                v = detection_vector(channel, m)
                gain = effective_gain(channel, v, m)
                leakage = np.abs(v.conj() @ np.delete(channel, m, axis=1)) ** 2
                assert leakage.max() <= 1e-18 * gain

                q, _ = np.linalg.qr(np.delete(channel, m, axis=1))
                residual = channel[:, m] - q @ (q.conj().T @ channel[:, m])
                assert gain == pytest.approx(float(np.linalg.norm(residual) ** 2), rel=1e-10)

    def test_identity_channel_picks_unit_vector(self) -> None:
        channel = np.eye(3, dtype=np.complex128)
        for m in range(3):
            v = detection_vector(channel, m)
            assert np.allclose(np.abs(v), np.eye(3)[m])
            assert effective_gain(channel, v, m) == pytest.approx(1.0)

    def test_projects_onto_orthogonal_complement(self) -> None:
        """With H = [e1, e1 + e2] the second cluster is detected along e2 only."""
        channel = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=np.complex128)
        v = detection_vector(channel, 1)
        assert np.allclose(np.abs(v), [0.0, 1.0])
        assert effective_gain(channel, v, 1) == pytest.approx(1.0)

    def test_single_cluster_is_matched_filter(self) -> None:
        channel = _random_channel(1, 3, 1)
        v = detection_vector(channel, 0)
        assert effective_gain(channel, v, 0) == pytest.approx(np.linalg.norm(channel) ** 2)

    def test_gain_bounded_by_column_energy(self) -> None:
        channel = _random_channel(2, 6, 4)
        for m in range(4):
            link = build_link(channel, m, user=m)
            assert 0 < link.eff_gain <= np.linalg.norm(channel[:, m]) ** 2 * (1 + 1e-12)

    def test_too_few_receive_antennas(self) -> None:
        with pytest.raises(DetectionConfigError) as exc_info:
            detection_vector(_random_channel(3, 2, 4), 0)
        assert exc_info.value.n_rx == 2
        assert exc_info.value.n_tx == 4

    def test_dependent_column_is_degenerate(self) -> None:
        channel = _random_channel(4, 3, 2)
        channel[:, 1] = 2.0 * channel[:, 0]
        with pytest.raises(DegenerateChannelError) as exc_info:
            detection_vector(channel, 1)
        assert exc_info.value.cluster == 1

    def test_nearly_dependent_column_is_degenerate(self) -> None:
        """A 1e-9 residual passes the norm check but cannot be nulled to 1e-18 of its gain."""
        rng = np.random.default_rng(6)
        channel = _random_channel(6, 4, 4)
        offset = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        channel[:, 3] = channel[:, 0] + 1e-9 * offset
        with pytest.raises(DegenerateChannelError, match="leaks") as exc_info:
            detection_vector(channel, 3)
        assert exc_info.value.cluster == 3

    def test_correlated_but_separable_column_is_kept(self) -> None:
        rng = np.random.default_rng(7)
        channel = _random_channel(7, 4, 4)
        offset = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        channel[:, 3] = channel[:, 0] + 1e-3 * offset
        v = detection_vector(channel, 3)
        assert 0 < effective_gain(channel, v, 3) < 1e-4 * np.linalg.norm(channel[:, 3]) ** 2

    def test_cluster_index_out_of_range(self) -> None:
        with pytest.raises(ValueError):
            detection_vector(_random_channel(5, 3, 3), 3)


class TestOrdering:
    """Tests for in-cluster SIC ordering."""

    def _link(self, gain: float, user: int) -> EffectiveLink:
        return EffectiveLink(detection=np.ones(1), eff_gain=gain, cluster=0, user=user)

    def test_descending_gain_and_ranks(self) -> None:
        ordered = order_cluster([self._link(0.5, 0), self._link(2.0, 1), self._link(1.0, 2)])
        assert [link.user for link in ordered] == [1, 2, 0]
        assert [link.rank_in_cluster for link in ordered] == [1, 2, 3]

    def test_ties_broken_by_user_index(self) -> None:
        ordered = order_cluster([self._link(1.0, 7), self._link(1.0, 3)])
        assert [link.user for link in ordered] == [3, 7]

    def test_empty_cluster_raises(self) -> None:
        with pytest.raises(ValueError):
            order_cluster([])


class TestRates:
    """Tests for NOMA user rates."""

    def test_strongest_user_sees_no_interference(self) -> None:
        assert user_rate([0.2, 0.8], 3.0, 10.0, 1) == pytest.approx(math.log2(1 + 10 * 3 * 0.2))

    def test_weaker_user_sees_stronger_users(self) -> None:
        snr = 10.0 * 0.5
        expected = math.log2(1 + snr * 0.8 / (1 + snr * 0.2))
        assert user_rate([0.2, 0.8], 0.5, 10.0, 2) == pytest.approx(expected)

    def test_rate_example(self) -> None:
        assert user_rate([0.2, 0.8], 1.0, 10.0, 2) == pytest.approx(math.log2(1 + 8 / 3))

    def test_cluster_rates_by_rank(self) -> None:
        rates = cluster_rates([0.1, 0.3, 0.6], [4.0, 2.0, 1.0], 5.0)
        assert rates.shape == (3,)
        assert rates[0] == pytest.approx(user_rate([0.1, 0.3, 0.6], 4.0, 5.0, 1))
        assert rates[2] == pytest.approx(user_rate([0.1, 0.3, 0.6], 1.0, 5.0, 3))

    def test_zero_fraction_zero_rate(self) -> None:
        assert user_rate([0.0], 1.0, 100.0, 1) == 0.0
