import numpy as np
import pytest

from greenop.generators import (
    checkerboard,
    coulomb_potential,
    generate_coefficients,
    identity_coefficients,
    random_elliptic,
    random_lower_order,
)
from greenop.lattice import make_grid
from greenop.norms import ExponentPair, coefficient_size
from greenop.operators import garding_constants


class TestIdentity:
    def test_constants_and_triviality(self):
        g = make_grid(2, 8, 3.0, 8, 2.0)
        coeffs = identity_coefficients(g)
        b = garding_constants(coeffs)
        assert b.lam == b.Lam == 1.0
        assert coeffs.is_trivial_lower_order()


class TestRandomElliptic:
    def test_measured_constants_stay_inside_request(self):
        g = make_grid(2, 8, 3.0, 8, 2.0)
        for seed in range(5):
            coeffs = random_elliptic(g, lam=0.5, Lam=2.0, seed=seed)
            b = garding_constants(coeffs)
            assert 0.5 <= b.lam <= b.Lam <= 2.0 + 1e-12

    def test_degenerate_interval_gives_identity_multiple(self):
        g = make_grid(1, 8, 3.0, 8, 2.0)
        coeffs = random_elliptic(g, lam=1.0, Lam=1.0, seed=3)
        assert np.allclose(coeffs.A[..., 0, 0], 1.0)

    def test_real_option(self):
        g = make_grid(2, 8, 3.0, 8, 2.0)
        coeffs = random_elliptic(g, lam=0.5, Lam=2.0, seed=1, real=True)
        assert np.abs(coeffs.A.imag).max() == 0.0
        assert np.allclose(coeffs.A, np.swapaxes(coeffs.A, -1, -2))

    def test_deterministic_per_seed(self):
        g = make_grid(1, 8, 3.0, 8, 2.0)
        one = random_elliptic(g, lam=0.2, Lam=5.0, seed=9)
        two = random_elliptic(g, lam=0.2, Lam=5.0, seed=9)
        other = random_elliptic(g, lam=0.2, Lam=5.0, seed=10)
        assert np.array_equal(one.A, two.A)
        assert not np.array_equal(one.A, other.A)

    def test_refinement_samples_same_function(self):
        coarse = make_grid(1, 8, 3.0, 8, 2.0)
        fine = make_grid(1, 16, 3.0, 16, 2.0)
        a_c = random_elliptic(coarse, lam=0.5, Lam=2.0, seed=4).A
        a_f = random_elliptic(fine, lam=0.5, Lam=2.0, seed=4).A
        assert np.allclose(a_c, a_f[::2, ::2], atol=1e-12)

    def test_bad_interval_rejected(self):
        g = make_grid(1, 8, 3.0, 8, 2.0)
        with pytest.raises(ValueError):
            random_elliptic(g, lam=0.0, Lam=1.0)
        with pytest.raises(ValueError):
            random_elliptic(g, lam=2.0, Lam=1.0)


class TestRandomLowerOrder:
    def test_hits_target_exactly(self):
        g = make_grid(1, 16, 3.0, 16, 2.0)
        pair = ExponentPair(1.5, 1.5)
        coeffs = random_lower_order(g, P_target=0.1, pair=pair, seed=2)
        assert coefficient_size(coeffs, pair) == pytest.approx(0.1, rel=1e-10)

    def test_lorentz_variant(self):
        g = make_grid(3, 8, 3.0, 8, 2.0)
        pair = ExponentPair(np.inf, 1.5)
        coeffs = random_lower_order(g, P_target=0.25, pair=pair, seed=5,
                                    lorentz=True)
        assert coefficient_size(coeffs, pair, lorentz=True) == pytest.approx(
            0.25, rel=1e-10)

    def test_zero_target(self):
        g = make_grid(1, 8, 3.0, 8, 2.0)
        coeffs = random_lower_order(g, P_target=0.0, pair=ExponentPair(1.5, 1.5))
        assert coeffs.is_trivial_lower_order()


class TestCoulomb:
    def test_requires_three_dimensions(self):
        g = make_grid(1, 8, 3.0, 8, 2.0)
        with pytest.raises(ValueError):
            coulomb_potential(g, c=-0.25, M=100.0)

    def test_truncation_and_symmetry(self):
        g = make_grid(3, 8, 4.0, 8, 2.0)
        coeffs = coulomb_potential(g, c=-1.0, M=50.0)
        a0 = coeffs.a0[0]
        assert a0[0, 0, 0] == pytest.approx(-50.0)
        # nearest-image distance makes the potential even on the torus
        flipped = np.roll(a0[::-1, ::-1, ::-1], 1, axis=(0, 1, 2))
        assert np.allclose(a0, flipped, atol=1e-12)
        # one lattice step from the origin the potential is 1/dx^2
        assert a0[1, 0, 0] == pytest.approx(-1.0 / g.dx ** 2)


class TestCheckerboard:
    def test_values_and_constants(self):
        g = make_grid(2, 8, 4.0, 8, 2.0)
        coeffs = checkerboard(g, contrast=5.0)
        scalar = coeffs.A[..., 0, 0].real
        assert set(np.unique(scalar)) == {1.0, 5.0}
        b = garding_constants(coeffs)
        assert b.lam == pytest.approx(1.0)
        assert b.Lam == pytest.approx(5.0)

    def test_block_partition(self):
        g = make_grid(1, 8, 4.0, 8, 2.0)
        coeffs = checkerboard(g, contrast=0.5, blocks=2)
        scalar = coeffs.A[0, :, 0, 0].real
        assert np.allclose(scalar[:4], 1.0)
        assert np.allclose(scalar[4:], 0.5)
        with pytest.raises(ValueError):
            checkerboard(g, contrast=0.5, blocks=3)


class TestDispatch:
    def test_named_generators(self):
        g = make_grid(1, 8, 3.0, 8, 2.0)
        out = generate_coefficients("random_elliptic", g, seed=1,
                                    params={"lam": 0.5, "Lam": 2.0})
        direct = random_elliptic(g, lam=0.5, Lam=2.0, seed=1)
        assert np.array_equal(out.A, direct.A)

    def test_pair_given_as_sequence(self):
        g = make_grid(1, 8, 3.0, 8, 2.0)
        out = generate_coefficients("random_lower_order", g, seed=0,
                                    params={"P_target": 0.1, "pair": [1.5, 1.5]})
        assert coefficient_size(out, ExponentPair(1.5, 1.5)) == pytest.approx(
            0.1, rel=1e-10)

    def test_unknown_id(self):
        g = make_grid(1, 8, 3.0, 8, 2.0)
        with pytest.raises(ValueError):
            generate_coefficients("mystery", g)
