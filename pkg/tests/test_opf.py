import json

import numpy as np
import pytest
from hypothesis import given

from bornlab.errors import DimensionError, InvariantError
from bornlab.linalg import tensor
from bornlab.opf import OPF, convex_mix, identity_opf, opf_eval, random_opf, sharp_opf, star_product
from bornlab.sampling import SeededRng, random_ray

from conftest import ray, rays, seeds


def test_identity_is_certain():
    assert opf_eval(identity_opf(3), ray(1, 2j, 3)) == 1.0


@given(rays(), rays())
def test_sharp_effect(psi, phi):
    f = sharp_opf(psi)
    assert abs(f(psi) - 1) < 1e-12
    if psi.dim == phi.dim:
        assert abs(f(phi) - abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2) < 1e-12


def test_half_identity():
    assert opf_eval(OPF(np.eye(2) / 2), ray(0.3, 1j)) == pytest.approx(0.5, abs=1e-15)


def test_operator_bounds():
    with pytest.raises(InvariantError):
        OPF(2 * np.eye(2))
    with pytest.raises(InvariantError):
        OPF(np.array([[0, 1], [0, 0]]))


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        opf_eval(identity_opf(2), ray(1, 0, 0))
    with pytest.raises(DimensionError):
        convex_mix(0.5, identity_opf(2), identity_opf(3))


class TestConvexMix:
    def test_p_one_is_first(self):
        f = random_opf(3, SeededRng(0))
        np.testing.assert_array_equal(convex_mix(1.0, f, identity_opf(3)).operator, f.operator)

    def test_resolution_of_identity(self):
        mixed = convex_mix(0.5, sharp_opf(ray(1, 0)), sharp_opf(ray(0, 1)))
        np.testing.assert_allclose(mixed.operator, np.eye(2) / 2)

    @given(seeds)
    def test_affine(self, seed):
        rng = SeededRng(seed)
        f1, f2, psi = random_opf(3, rng), random_opf(3, rng), random_ray(3, rng)
        assert abs(convex_mix(0.3, f1, f2)(psi) - (0.3 * f1(psi) + 0.7 * f2(psi))) < 1e-12


class TestStarProduct:
    @given(seeds)
    def test_product_law(self, seed):
        rng = SeededRng(seed)
        f, g = random_opf(2, rng), random_opf(3, rng)
        psi, phi = random_ray(2, rng), random_ray(3, rng)
        assert abs(star_product(f, g)(tensor(psi, phi)) - f(psi) * g(phi)) < 1e-12

    def test_identity_is_a_unit(self):
        rng = SeededRng(1)
        g = random_opf(3, rng)
        psi, phi = random_ray(2, rng), random_ray(3, rng)
        assert abs(star_product(identity_opf(2), g)(tensor(psi, phi)) - g(phi)) < 1e-12

    @given(seeds)
    def test_associative(self, seed):
        rng = SeededRng(seed)
        f, g, h = (random_opf(2, rng) for _ in range(3))
        left = star_product(star_product(f, g), h)
        right = star_product(f, star_product(g, h))
        assert np.max(np.abs(left.operator - right.operator)) < 1e-12
        x = tensor(tensor(random_ray(2, rng), random_ray(2, rng)), random_ray(2, rng))
        assert abs(left(x) - right(x)) < 1e-12

    @given(seeds)
    def test_entangled_inputs_stay_in_range(self, seed):
        rng = SeededRng(seed)
        fg = star_product(random_opf(2, rng), random_opf(2, rng))
        assert 0 <= fg(random_ray(4, rng)) <= 1


def test_json_round_trip():
    f = random_opf(3, SeededRng(5), "f")
    back = OPF.from_json(json.loads(json.dumps(f.to_json())))
    np.testing.assert_array_equal(back.operator, f.operator)
    assert back.label == "f"
