import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nandkit.embeddings import (
    RegionBias,
    StubEncoder,
    as_embedding,
    cosine_similarity,
    softmax_over,
    softmax_pair_rows,
    stub_encode,
)

E_OVER_E_PLUS_1 = np.e / (np.e + 1.0)  # 0.7310585786300049


class TestCosine:
    def test_identical_unit_vector(self):
        v = np.array([0.6, 0.8], dtype=np.float32)
        assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_cos_45(self):
        got = cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
        assert got == pytest.approx(0.70710678, abs=1e-7)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            cosine_similarity(np.ones(3), np.ones(4))

    def test_zero_norm(self):
        with pytest.raises(ValueError, match="zero-norm"):
            cosine_similarity(np.zeros(3), np.ones(3))

    @given(
        st.lists(st.floats(-10, 10), min_size=2, max_size=8),
        st.floats(0.001, 1000.0),
    )
    def test_scale_invariance(self, values, c):
        a = np.array(values, dtype=np.float64)
        if np.linalg.norm(a) < 1e-6 or np.linalg.norm(c * a) == 0.0:
            return
        assert cosine_similarity(a, c * a) == pytest.approx(1.0, abs=1e-6)


class TestSoftmaxOver:
    def test_duplicate_features_split_evenly(self, rng):
        f = rng.standard_normal(8)
        g = rng.standard_normal(8)
        out = softmax_over(g, [f, f])
        np.testing.assert_allclose(out, [0.5, 0.5], atol=1e-12)

    def test_sim_one_vs_zero(self):
        g = np.array([1.0, 0.0])
        out = softmax_over(g, [np.array([1.0, 0.0]), np.array([0.0, 1.0])])
        assert out[0] == pytest.approx(0.73106, abs=1e-4)
        assert out[1] == pytest.approx(0.26894, abs=1e-4)
        assert out[0] == pytest.approx(E_OVER_E_PLUS_1, abs=1e-12)

    def test_single_feature(self, rng):
        out = softmax_over(rng.standard_normal(5), [rng.standard_normal(5)])
        np.testing.assert_allclose(out, [1.0])

    def test_empty_list(self):
        with pytest.raises(ValueError, match="non-empty"):
            softmax_over(np.ones(3), [])

    @settings(max_examples=200)
    @given(st.integers(2, 6), st.integers(0, 2**32 - 1))
    def test_sums_to_one_and_permutation_equivariant(self, k, seed):
        gen = np.random.default_rng(seed)
        g = gen.standard_normal(6)
        feats = [gen.standard_normal(6) for _ in range(k)]
        out = softmax_over(g, feats)
        assert abs(out.sum() - 1.0) < 1e-6
        assert np.all((out > 0) & (out < 1))
        perm = gen.permutation(k)
        out_p = softmax_over(g, [feats[i] for i in perm])
        np.testing.assert_allclose(out_p, out[perm], rtol=0, atol=1e-12)

    def test_vectorized_pair_matches_scalar(self, rng):
        g = rng.standard_normal((50, 12))
        fa = rng.standard_normal(12)
        fb = rng.standard_normal(12)
        sims_a = np.array([cosine_similarity(row, fa) for row in g])
        sims_b = np.array([cosine_similarity(row, fb) for row in g])
        vec = softmax_pair_rows(sims_a, sims_b)
        scalar = np.array([softmax_over(row, [fa, fb])[0] for row in g])
        np.testing.assert_allclose(vec, scalar, atol=1e-12)


class TestAsEmbedding:
    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="non-finite"):
            as_embedding([1.0, float("nan")])

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="length"):
            as_embedding([])

    def test_dim_check(self):
        with pytest.raises(ValueError, match="dim"):
            as_embedding([1.0, 2.0], dim=3)


class TestStubEncode:
    LAYOUT = [(4, 5, 16), (2, 2, 16)]

    def test_deterministic(self):
        a = stub_encode("img", 3, self.LAYOUT)
        b = stub_encode("img", 3, self.LAYOUT)
        for la, lb in zip(a.layers, b.layers):
            assert np.array_equal(la.grid, lb.grid)

    def test_unit_norm(self):
        out = stub_encode("img", 3, self.LAYOUT)
        for layer in out.layers:
            norms = np.linalg.norm(layer.flat().astype(np.float64), axis=1)
            np.testing.assert_allclose(norms, 1.0, atol=1e-6)

    def test_seed_changes_output(self):
        a = stub_encode("img", 1, self.LAYOUT)
        b = stub_encode("img", 2, self.LAYOUT)
        assert not np.array_equal(a.layers[0].grid, b.layers[0].grid)

    def test_image_id_changes_output(self):
        a = stub_encode("img-a", 1, self.LAYOUT)
        b = stub_encode("img-b", 1, self.LAYOUT)
        assert not np.array_equal(a.layers[0].grid, b.layers[0].grid)

    def test_empty_layout_rejected(self):
        with pytest.raises(ValueError, match="layout"):
            stub_encode("img", 1, [])

    def test_region_bias_alignment(self):
        direction = np.zeros(16)
        direction[0] = 1.0
        region = RegionBias(0.0, 0.0, 0.5, 0.5, 5.0 * direction)
        planted = stub_encode("img", 3, [(4, 4, 16)], [region])
        plain = stub_encode("img", 3, [(4, 4, 16)])
        grid = planted.layers[0].grid.astype(np.float64)
        # rows/cols 0..1 are inside, rest untouched
        inside = grid[:2, :2].reshape(-1, 16)
        outside = grid[2:, 2:].reshape(-1, 16)
        assert np.all(inside @ direction > 0.9)
        np.testing.assert_allclose(
            np.linalg.norm(inside, axis=1), 1.0, atol=1e-6
        )
        assert np.array_equal(
            outside, plain.layers[0].grid[2:, 2:].reshape(-1, 16).astype(np.float64)
        )

    def test_text_encoding_deterministic_and_prompt_keyed(self):
        enc = StubEncoder(seed=9, layout=((2, 2, 8),), text_dim=32)
        a = enc.encode_text("a photo of a carpet")
        b = enc.encode_text("a photo of a carpet")
        c = enc.encode_text("a photo of a capsule")
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert np.linalg.norm(a.astype(np.float64)) == pytest.approx(1.0, abs=1e-6)
