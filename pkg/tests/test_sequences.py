"""Slow-time code family tests: CAZAC structure and correlation oracles."""

import numpy as np
import pytest

from stcdm import (
    default_zc_roots,
    make_code,
    max_autocorrelation_sidelobe,
    p_sequence_code,
    periodic_autocorrelation,
    random_code,
    zadoff_chu_code,
    zadoff_chu_row,
)


def direct_autocorrelation(row: np.ndarray) -> np.ndarray:
    """O(N^2) oracle: r(k) = sum_n c[n] conj(c[(n+k) mod N])."""
    n = len(row)
    return np.array([sum(row[i] * np.conj(row[(i + k) % n]) for i in range(n)) for k in range(n)])


class TestRandomCode:
    def test_unit_modulus_and_shape(self):
        code = random_code(4, 16, seed=11)
        assert code.entries.shape == (4, 16)
        np.testing.assert_allclose(np.abs(code.entries), 1.0, atol=1e-14)

    def test_seeded_determinism(self):
        a = random_code(3, 8, seed=5)
        b = random_code(3, 8, seed=5)
        c = random_code(3, 8, seed=6)
        assert np.array_equal(a.entries, b.entries)
        assert not np.array_equal(a.entries, c.entries)

    def test_bad_shape(self):
        with pytest.raises(ValueError):
            random_code(0, 8)


class TestZadoffChu:
    def test_frozen_odd_length(self):
        # u=1, N=3: phases -pi n(n+1)/3 -> [0, -2pi/3, -2pi] i.e. [1, e^{-2pi i/3}, 1].
        row = zadoff_chu_row(1, 3)
        np.testing.assert_allclose(row, [1.0, np.exp(-2j * np.pi / 3), 1.0], atol=1e-14)

    def test_frozen_even_length(self):
        # u=1, N=4: phases -pi n^2/4 -> [1, e^{-i pi/4}, -1, e^{-i pi/4}].
        row = zadoff_chu_row(1, 4)
        w = np.exp(-1j * np.pi / 4)
        np.testing.assert_allclose(row, [1.0, w, -1.0, w], atol=1e-14)

    def test_root_coprimality_enforced(self):
        with pytest.raises(ValueError):
            zadoff_chu_row(2, 4)

    def test_default_roots(self):
        assert default_zc_roots(4, 64) == [1, 3, 5, 7]
        assert default_zc_roots(3, 15) == [1, 2, 4]

    @pytest.mark.parametrize("n", [8, 13, 64])
    def test_cazac_property(self, n):
        code = zadoff_chu_code(3, n)
        np.testing.assert_allclose(np.abs(code.entries), 1.0, atol=1e-14)
        assert max_autocorrelation_sidelobe(code) < 1e-10

    def test_root_count_mismatch(self):
        with pytest.raises(ValueError):
            zadoff_chu_code(2, 8, roots=[1])


class TestPSequence:
    @pytest.mark.parametrize("n", [8, 9, 64])
    def test_cazac_property(self, n):
        code = p_sequence_code(4, n)
        np.testing.assert_allclose(np.abs(code.entries), 1.0, atol=1e-14)
        assert max_autocorrelation_sidelobe(code) < 1e-10

    def test_default_shifts_are_rotations(self):
        code = p_sequence_code(2, 8)
        base = code.entries[0]
        np.testing.assert_allclose(code.entries[1], np.roll(base, -4), atol=1e-14)

    def test_shift_count_mismatch(self):
        with pytest.raises(ValueError):
            p_sequence_code(2, 8, shifts=[0, 1, 2])


class TestAutocorrelation:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_direct_oracle(self, seed):
        rng = np.random.default_rng(seed)
        row = np.exp(1j * rng.uniform(0, 2 * np.pi, 9))
        np.testing.assert_allclose(periodic_autocorrelation(row), direct_autocorrelation(row), atol=1e-12)

    def test_zero_lag_is_energy(self):
        row = np.exp(1j * np.linspace(0, 3, 12))
        r = periodic_autocorrelation(row)
        assert r[0] == pytest.approx(12.0)

    def test_sidelobe_of_constant_row(self):
        # A constant sequence has r(k) = N at every lag: worst possible sidelobes.
        code = random_code(1, 6, seed=0)
        flat = np.ones((1, 6), dtype=complex)
        assert max_autocorrelation_sidelobe(code) <= 6.0
        from stcdm import CodeMatrix

        assert max_autocorrelation_sidelobe(CodeMatrix(flat)) == pytest.approx(6.0)


class TestMakeCode:
    def test_dispatch(self):
        assert make_code("random", 2, 8, seed=1).entries.shape == (2, 8)
        np.testing.assert_allclose(
            make_code("zadoff_chu", 2, 9).entries, zadoff_chu_code(2, 9).entries
        )
        np.testing.assert_allclose(
            make_code("p_sequence", 2, 9).entries, p_sequence_code(2, 9).entries
        )

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            make_code("barker", 2, 8)
