import numpy as np
import pytest

from facefit.lighting import (UNIFORM_GAMMA0, ShCoefficients, sh_basis,
                              sh_basis_jacobian, shade_vertices)


def random_unit(rng, n=1):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


class TestBasis:
    def test_constant_band(self):
        rng = np.random.default_rng(0)
        for n in random_unit(rng, 20):
            assert sh_basis(n)[0] == pytest.approx(0.282095, abs=1e-6)

    def test_axis_symmetry_at_pole(self):
        b = sh_basis(np.array([0.0, 0.0, 1.0]))
        assert b[1] == 0.0 and b[3] == 0.0

    def test_monte_carlo_orthonormality(self):
        rng = np.random.default_rng(1)
        n = random_unit(rng, 500_000)
        b = sh_basis(n)
        gram = (4 * np.pi / len(n)) * b.T @ b
        np.testing.assert_allclose(gram, np.eye(9), atol=0.02)

    def test_non_unit_input_normalized(self):
        b1 = sh_basis(np.array([0.0, 0.0, 2.0]))
        b2 = sh_basis(np.array([0.0, 0.0, 1.0]))
        np.testing.assert_allclose(b1, b2, atol=1e-12)

    def test_jacobian_matches_differences(self):
        # derivative of the basis polynomials w.r.t. the input components
        rng = np.random.default_rng(2)
        n = random_unit(rng, 1)[0]
        jac = sh_basis_jacobian(n)[0]
        h = 1e-7
        for d in range(3):
            up, dn = n.copy(), n.copy()
            up[d] += h
            dn[d] -= h
            # bypass renormalization by evaluating the raw polynomials
            fd = (_raw_basis(up) - _raw_basis(dn)) / (2 * h)
            np.testing.assert_allclose(jac[:, d], fd, atol=1e-6)


def _raw_basis(v):
    from facefit.lighting import C0, C1, C2, C20, C22

    x, y, z = v
    return np.array([C0, C1 * y, C1 * z, C1 * x, C2 * x * y, C2 * y * z,
                     C20 * (3 * z * z - 1), C2 * x * z, C22 * (x * x - y * y)])


class TestShading:
    def test_uniform_light_reproduces_albedo(self):
        rng = np.random.default_rng(3)
        albedo = rng.uniform(0, 1, 12)
        normals = random_unit(rng, 4)
        gamma = np.zeros(9)
        gamma[0] = UNIFORM_GAMMA0
        np.testing.assert_allclose(shade_vertices(albedo, normals, gamma),
                                   albedo, atol=1e-12)

    def test_zero_albedo_shades_black(self):
        rng = np.random.default_rng(4)
        out = shade_vertices(np.zeros(6), random_unit(rng, 2),
                             rng.standard_normal(9))
        np.testing.assert_array_equal(out, np.zeros(6))

    def test_single_band_hand_value(self):
        albedo = np.array([0.5, 0.25, 1.0])
        gamma = np.zeros(9)
        gamma[2] = 1.0  # the z-linear band
        out = shade_vertices(albedo, np.array([[0.0, 0.0, 1.0]]), gamma)
        np.testing.assert_allclose(out, albedo * 0.4886025119, atol=1e-9)

    def test_linear_in_gamma_and_albedo(self):
        rng = np.random.default_rng(5)
        albedo = rng.uniform(0, 1, 9)
        normals = random_unit(rng, 3)
        g1, g2 = rng.standard_normal((2, 9))
        lhs = shade_vertices(albedo, normals, 2.0 * g1 - 0.5 * g2)
        rhs = (2.0 * shade_vertices(albedo, normals, g1)
               - 0.5 * shade_vertices(albedo, normals, g2))
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)
        lhs = shade_vertices(3.0 * albedo, normals, g1)
        np.testing.assert_allclose(lhs, 3.0 * shade_vertices(albedo, normals, g1),
                                   atol=1e-10)

    def test_gamma_gradient_is_albedo_times_basis(self):
        rng = np.random.default_rng(6)
        albedo = rng.uniform(0.1, 0.9, 3)
        normal = random_unit(rng, 1)
        basis = sh_basis(normal)[0]
        h = 1e-6
        for j in range(9):
            up, dn = np.zeros(9), np.zeros(9)
            up[j] += h
            dn[j] -= h
            fd = (shade_vertices(albedo, normal, up)
                  - shade_vertices(albedo, normal, dn)) / (2 * h)
            expected = albedo * basis[j]
            assert np.abs(fd - expected).max() < 1e-6 * max(abs(basis[j]), 1.0)

    def test_coefficients_container_validation(self):
        with pytest.raises(ValueError):
            ShCoefficients(np.zeros(8))
        tied = ShCoefficients(np.arange(9.0))
        assert tied.values.shape == (9, 3)
