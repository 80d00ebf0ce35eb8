import numpy as np
import pytest

from facefit.errors import ParameterShapeError
from facefit.morphable import (FaceParams, MorphableModel, assemble_albedo,
                               assemble_shape, load_model, make_toy_model,
                               regularization_loss, save_model)


def make_4vertex_model(rng):
    """Tiny dense model for brute-force oracles."""
    nv = 4
    return MorphableModel(
        mean_shape=rng.uniform(-1, 1, 3 * nv),
        id_basis=rng.standard_normal((3 * nv, 3)),
        exp_basis=rng.standard_normal((3 * nv, 2)),
        mean_albedo=rng.uniform(0.2, 0.8, 3 * nv),
        tex_basis=rng.standard_normal((3 * nv, 3)) * 0.1,
        triangles=[(0, 1, 2), (1, 2, 3), (0, 2, 3), (0, 1, 3)],
        landmark_indices=[0, 1, 2],
        id_sigma=[1.0, 0.5, 0.25],
        exp_sigma=[0.8, 0.4],
        tex_sigma=[1.0, 1.0, 1.0],
    )


def params_for(model, alpha=None, beta=None, tex=None):
    p = FaceParams.zeros(model)
    if alpha is not None:
        p.alpha_id = np.asarray(alpha, float)
    if beta is not None:
        p.beta_exp = np.asarray(beta, float)
    if tex is not None:
        p.beta_tex = np.asarray(tex, float)
    return p


class TestAssembleShape:
    def test_zero_coefficients_give_mean(self):
        m = make_4vertex_model(np.random.default_rng(0))
        out = assemble_shape(m, FaceParams.zeros(m))
        np.testing.assert_array_equal(out, m.mean_shape)

    def test_unit_vector_selects_basis_column(self):
        m = make_4vertex_model(np.random.default_rng(0))
        p = params_for(m, alpha=[1, 0, 0])
        np.testing.assert_allclose(assemble_shape(m, p),
                                   m.mean_shape + m.id_basis[:, 0], atol=1e-15)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(3)
        m = make_4vertex_model(rng)
        p = params_for(m, alpha=rng.standard_normal(3),
                       beta=rng.standard_normal(2))
        # scalar-loop matrix-vector oracle
        expected = m.mean_shape.copy()
        for r in range(12):
            for c in range(3):
                expected[r] += m.id_basis[r, c] * p.alpha_id[c]
            for c in range(2):
                expected[r] += m.exp_basis[r, c] * p.beta_exp[c]
        np.testing.assert_allclose(assemble_shape(m, p), expected, atol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(4)
        m = make_4vertex_model(rng)
        p1 = params_for(m, alpha=rng.standard_normal(3), beta=rng.standard_normal(2))
        p2 = params_for(m, alpha=rng.standard_normal(3), beta=rng.standard_normal(2))
        a, b = 0.7, -1.3
        pc = params_for(m, alpha=a * p1.alpha_id + b * p2.alpha_id,
                        beta=a * p1.beta_exp + b * p2.beta_exp)
        lhs = assemble_shape(m, pc) - m.mean_shape
        rhs = (a * (assemble_shape(m, p1) - m.mean_shape)
               + b * (assemble_shape(m, p2) - m.mean_shape))
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    def test_dimension_mismatch_names_block(self):
        m = make_4vertex_model(np.random.default_rng(0))
        p = FaceParams(np.zeros(5), np.zeros(2), np.zeros(3))
        with pytest.raises(ParameterShapeError, match="alpha_id"):
            assemble_shape(m, p)


class TestAssembleAlbedo:
    def test_zero_coefficients_give_mean(self):
        m = make_4vertex_model(np.random.default_rng(0))
        np.testing.assert_array_equal(assemble_albedo(m, FaceParams.zeros(m)),
                                      m.mean_albedo)

    def test_clamps_to_unit_range(self):
        m = make_4vertex_model(np.random.default_rng(0))
        p = params_for(m, tex=[50.0, 0.0, 0.0])
        out = assemble_albedo(m, p)
        assert out.max() == 1.0
        assert out.min() == 0.0

    def test_matches_oracle_before_clamping(self):
        rng = np.random.default_rng(5)
        m = make_4vertex_model(rng)
        p = params_for(m, tex=rng.standard_normal(3) * 0.1)
        expected = m.mean_albedo.copy()
        for r in range(12):
            for c in range(3):
                expected[r] += m.tex_basis[r, c] * p.beta_tex[c]
        np.testing.assert_allclose(assemble_albedo(m, p, clamp=False),
                                   expected, atol=1e-12)


class TestRegularizationLoss:
    def test_zero_at_origin(self):
        m = make_4vertex_model(np.random.default_rng(0))
        assert regularization_loss(FaceParams.zeros(m), m) == 0.0

    def test_sigma_normalized_unit_case(self):
        m = make_4vertex_model(np.random.default_rng(0))
        p = params_for(m, alpha=m.id_sigma.copy())
        assert regularization_loss(p, m) == pytest.approx(3.0, abs=1e-12)

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(6)
        m = make_4vertex_model(rng)
        p = params_for(m, alpha=rng.standard_normal(3),
                       beta=rng.standard_normal(2), tex=rng.standard_normal(3))
        expected = 0.0
        for v, s in zip(p.alpha_id, m.id_sigma):
            expected += (v / s) ** 2
        for v, s in zip(p.beta_exp, m.exp_sigma):
            expected += (v / s) ** 2
        for v, s in zip(p.beta_tex, m.tex_sigma):
            expected += (v / s) ** 2
        assert regularization_loss(p, m) == pytest.approx(expected, abs=1e-12)

    def test_sign_flip_invariance(self):
        rng = np.random.default_rng(7)
        m = make_4vertex_model(rng)
        p = params_for(m, alpha=rng.standard_normal(3))
        q = params_for(m, alpha=p.alpha_id * np.array([1, -1, 1]))
        assert regularization_loss(p, m) == regularization_loss(q, m)


class TestParameterVector:
    def test_default_profile_has_239_dof(self):
        model = make_toy_model(seed=0)
        assert model.n_id == 80 and model.n_exp == 64 and model.n_tex == 80
        params = FaceParams.zeros(model)
        assert params.degrees_of_freedom == 239

    def test_untied_gamma_counts_per_channel(self):
        model = make_toy_model(n_id=4, n_exp=3, n_tex=4, seed=0, subdivisions=1)
        params = FaceParams.zeros(model)
        params.gamma[0, 1] = 0.5
        assert params.degrees_of_freedom == 4 + 3 + 4 + 27 + 6

    def test_vector_round_trip(self, toy_model):
        rng = np.random.default_rng(8)
        p = FaceParams(rng.standard_normal(12), rng.standard_normal(8),
                       rng.standard_normal(12), rng.standard_normal(9))
        p.pose.f = 3.0
        p.pose.t2d = np.array([1.0, -2.0, 7.0])
        q = FaceParams.from_vector(p.to_vector(), toy_model, tz=7.0)
        np.testing.assert_array_equal(q.to_vector(), p.to_vector())
        assert q.pose.t2d[2] == 7.0


class TestModelContainer:
    def test_save_load_round_trip(self, tmp_path, tiny_model):
        path = str(tmp_path / "model.ffm")
        save_model(tiny_model, path)
        loaded = load_model(path)
        np.testing.assert_array_equal(loaded.mean_shape, tiny_model.mean_shape)
        np.testing.assert_array_equal(loaded.id_basis, tiny_model.id_basis)
        np.testing.assert_array_equal(loaded.triangles, tiny_model.triangles)
        np.testing.assert_array_equal(loaded.landmark_indices,
                                      tiny_model.landmark_indices)
        np.testing.assert_array_equal(loaded.tex_sigma, tiny_model.tex_sigma)

    def test_rejects_non_model_file(self, tmp_path):
        path = tmp_path / "junk.ffm"
        path.write_bytes(b"not a model\nDATA\n")
        with pytest.raises(ValueError, match="not a model container"):
            load_model(str(path))


class TestInvariants:
    def test_sigma_must_be_positive(self):
        rng = np.random.default_rng(0)
        m = make_4vertex_model(rng)
        with pytest.raises(ValueError, match="sigma"):
            MorphableModel(m.mean_shape, m.id_basis, m.exp_basis,
                           m.mean_albedo, m.tex_basis, m.triangles,
                           m.landmark_indices, [1.0, -0.5, 0.25],
                           m.exp_sigma, m.tex_sigma)

    def test_duplicate_landmarks_rejected(self):
        rng = np.random.default_rng(0)
        m = make_4vertex_model(rng)
        with pytest.raises(ValueError, match="duplicates"):
            MorphableModel(m.mean_shape, m.id_basis, m.exp_basis,
                           m.mean_albedo, m.tex_basis, m.triangles,
                           [0, 0, 1], m.id_sigma, m.exp_sigma, m.tex_sigma)
