import numpy as np
import pytest

from udsparse import autodiff as ad
from udsparse.rng import XorShiftRNG


def check_op(build, shapes, seed=0, tol=1e-4, low=-1.0, high=1.0):
    """Gradient-check an op over random small inputs."""
    rng = XorShiftRNG(seed)
    store = ad.ParameterStore()
    for i, shape in enumerate(shapes):
        store.add(f"p{i}", rng.uniform_array(shape, low, high))
    err = ad.gradient_check(lambda: build(store), store, eps=1e-6)
    assert err < tol, f"gradient error {err}"


class TestBasicOps:
    def test_square_gradient(self):
        x = ad.Tensor(3.0, requires_grad=True)
        (g,) = ad.backward(ad.mul(x, x), [x])
        assert g == pytest.approx(6.0)

    def test_detached_constant_gets_zero(self):
        x = ad.Tensor(3.0, requires_grad=True)
        c = ad.constant(5.0)
        loss = ad.mul(x, x)
        g_c, = ad.backward(loss, [c])
        assert g_c == 0.0

    def test_unreached_parameter_zero(self):
        store = ad.ParameterStore()
        a = store.add("a", [1.0, 2.0])
        store.add("b", [3.0])
        grads = ad.backward(ad.sum_all(ad.mul(a, a)), store)
        np.testing.assert_allclose(grads["a"], [2.0, 4.0])
        np.testing.assert_allclose(grads["b"], [0.0])

    def test_not_scalar(self):
        a = ad.Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(ad.NotScalarError):
            ad.backward(a, [a])

    def test_shape_mismatch(self):
        with pytest.raises(ad.ShapeMismatchError):
            ad.add(ad.constant([1.0, 2.0]), ad.constant([1.0, 2.0, 3.0]))

    def test_nonfinite_raises(self):
        with pytest.raises(ad.NonFiniteError):
            ad.log(ad.constant([0.0]))

    def test_softmax_symmetry(self):
        y = ad.softmax(ad.constant([0.0, 0.0, 0.0]))
        np.testing.assert_allclose(y.data, [1 / 3] * 3)

    def test_softmax_sums_to_one(self):
        rng = XorShiftRNG(5)
        for _ in range(20):
            y = ad.softmax(ad.constant(rng.uniform_array((7,), -10, 10)))
            assert abs(y.data.sum() - 1.0) < 1e-9

    def test_sigmoid_bounds(self):
        rng = XorShiftRNG(6)
        y = ad.sigmoid(ad.constant(rng.uniform_array((50,), -30, 30)))
        assert np.all(y.data > 0) and np.all(y.data < 1)


class TestOpGradients:
    def test_add(self):
        check_op(lambda s: ad.sum_all(ad.add(s["p0"], s["p1"])), [(5,), (5,)])

    def test_add_row_bias(self):
        check_op(lambda s: ad.sum_all(ad.add(s["p0"], s["p1"])), [(4, 3), (3,)])

    def test_sub_mul_div(self):
        check_op(
            lambda s: ad.sum_all(
                ad.div(ad.mul(s["p0"], s["p1"]), ad.add(s["p2"], ad.constant(3.0)))
            ),
            [(4,), (4,), (4,)],
        )

    def test_matmul_matrix_matrix(self):
        check_op(lambda s: ad.sum_all(ad.matmul(s["p0"], s["p1"])), [(3, 4), (4, 2)])

    def test_matmul_matrix_vector(self):
        check_op(lambda s: ad.sum_all(ad.matmul(s["p0"], s["p1"])), [(3, 4), (4,)])

    def test_matmul_vector_matrix(self):
        check_op(lambda s: ad.sum_all(ad.matmul(s["p0"], s["p1"])), [(3,), (3, 2)])

    def test_matmul_vector_vector(self):
        check_op(lambda s: ad.matmul(s["p0"], s["p1"]), [(6,), (6,)])

    def test_softmax_pick_log(self):
        check_op(
            lambda s: ad.neg(ad.log(ad.pick(ad.softmax(s["p0"]), 2))), [(6,)]
        )

    def test_sigmoid_tanh(self):
        check_op(
            lambda s: ad.sum_all(ad.mul(ad.sigmoid(s["p0"]), ad.tanh(s["p1"]))),
            [(5,), (5,)],
        )

    def test_concat_slice(self):
        check_op(
            lambda s: ad.sum_all(
                ad.mul(
                    ad.slice1d(ad.concat([s["p0"], s["p1"]]), 1, 5),
                    ad.constant(np.arange(1.0, 5.0)),
                )
            ),
            [(3,), (4,)],
        )

    def test_stack_row_mean(self):
        check_op(
            lambda s: ad.mean_all(
                ad.row(ad.stack_rows([s["p0"], s["p1"], s["p2"]]), 1)
            ),
            [(4,), (4,), (4,)],
        )

    def test_concat_cols_tile(self):
        check_op(
            lambda s: ad.sum_all(
                ad.mul(ad.concat_cols(s["p0"], ad.tile_rows(s["p1"], 3)), s["p2"])
            ),
            [(3, 2), (4,), (3, 6)],
        )

    def test_mean_axis0(self):
        check_op(
            lambda s: ad.sum_all(ad.mul(ad.mean_axis0(s["p0"]), s["p1"])),
            [(5, 3), (3,)],
        )

    def test_minimum_maximum(self):
        check_op(
            lambda s: ad.sum_all(
                ad.add(ad.minimum(s["p0"], s["p1"]), ad.maximum(s["p0"], s["p2"]))
            ),
            [(6,), (6,), (6,)],
        )

    def test_transpose(self):
        check_op(
            lambda s: ad.sum_all(ad.matmul(ad.transpose(s["p0"]), s["p1"])),
            [(3, 4), (3,)],
        )

    def test_bilinear(self):
        check_op(
            lambda s: ad.sum_all(ad.bilinear(s["p0"], s["p1"], s["p2"], s["p3"])),
            [(3,), (4,), (2, 3, 4), (2,)],
        )

    def test_bilinear_identity_is_dot(self):
        x = ad.constant([1.0, 2.0])
        A = ad.constant(np.eye(2)[None, :, :])
        b = ad.constant([0.0])
        out = ad.bilinear(x, x, A, b)
        assert out.data[0] == pytest.approx(5.0)

    def test_conv1d_rows(self):
        check_op(
            lambda s: ad.sum_all(ad.conv1d_rows(s["p0"], s["p1"], s["p2"])),
            [(6, 3), (4, 9), (4,)],
        )

    def test_bce_with_logits(self):
        targets = np.array([1.0, 0.0, 1.0, 0.0])
        check_op(
            lambda s: ad.bce_with_logits(s["p0"], targets), [(4,)], tol=1e-6
        )

    def test_bce_weighted(self):
        targets = np.array([1.0, 0.0, 1.0])
        weights = np.array([0.5, 0.0, 1.0])
        check_op(
            lambda s: ad.bce_with_logits(s["p0"], targets, weights), [(3,)], tol=1e-6
        )

    def test_affine_helpers(self):
        check_op(
            lambda s: ad.sum_all(ad.affine(s["p0"], s["p1"], s["p2"])),
            [(3, 4), (4,), (3,)],
        )
        check_op(
            lambda s: ad.sum_all(ad.affine_rows(s["p0"], s["p1"], s["p2"])),
            [(5, 4), (3, 4), (3,)],
        )


class TestLstm:
    def make_store(self, d=3, h=4, seed=9):
        rng = XorShiftRNG(seed)
        store = ad.ParameterStore()
        store.add("x", rng.uniform_array((d,)))
        store.add("h0", rng.uniform_array((h,)))
        store.add("c0", rng.uniform_array((h,)))
        store.add("W", rng.uniform_array((4 * h, d), -0.5, 0.5))
        store.add("U", rng.uniform_array((4 * h, h), -0.5, 0.5))
        store.add("b", rng.uniform_array((4 * h,), -0.5, 0.5))
        return store

    def test_zero_weights_zero_state(self):
        d, h = 3, 4
        x = ad.constant(np.ones(d))
        zeros = ad.constant(np.zeros(h))
        W = ad.constant(np.zeros((4 * h, d)))
        U = ad.constant(np.zeros((4 * h, h)))
        b = ad.constant(np.zeros(4 * h))
        h1, c1 = ad.lstm_step(x, zeros, zeros, W, U, b)
        np.testing.assert_allclose(h1.data, 0.0)
        np.testing.assert_allclose(c1.data, 0.0)

    def test_gradients(self):
        store = self.make_store()

        def build():
            h1, c1 = ad.lstm_step(
                store["x"], store["h0"], store["c0"], store["W"], store["U"], store["b"]
            )
            return ad.sum_all(ad.add(h1, c1))

        assert ad.gradient_check(build, store, eps=1e-6) < 1e-6

    def test_determinism(self):
        def run():
            store = self.make_store(seed=11)
            h1, _ = ad.lstm_step(
                store["x"], store["h0"], store["c0"], store["W"], store["U"], store["b"]
            )
            return h1.data

        assert np.array_equal(run(), run())


class TestGradientCheckTool:
    def test_quadratic_is_tight(self):
        store = ad.ParameterStore()
        store.add("w", [1.0, -2.0, 0.5])

        def build():
            w = store["w"]
            return ad.sum_all(ad.mul(w, w))

        assert ad.gradient_check(build, store, eps=1e-5) < 1e-8

    def test_softmax_cross_entropy_layer(self):
        rng = XorShiftRNG(21)
        store = ad.ParameterStore()
        store.add("W", rng.uniform_array((8, 5), -0.8, 0.8))
        store.add("b", rng.uniform_array((8,), -0.5, 0.5))
        x = np.asarray(rng.uniform_array((5,), -1, 1))

        def build():
            logits = ad.affine(store["W"], ad.constant(x), store["b"])
            return ad.neg(ad.log(ad.pick(ad.softmax(logits), 3)))

        assert ad.gradient_check(build, store, eps=1e-6) < 1e-6

    def test_coordinate_sampling(self):
        store = ad.ParameterStore()
        store.add("w", np.linspace(-1, 1, 50))

        def build():
            w = store["w"]
            return ad.sum_all(ad.mul(w, w))

        assert ad.gradient_check(build, store, max_coordinates=10, seed=1) < 1e-8


class TestDropout:
    def test_identity_at_zero(self):
        x = ad.constant([1.0, 2.0])
        assert ad.dropout(x, 0.0, XorShiftRNG(0)) is x

    def test_seeded_mask(self):
        x = ad.constant(np.ones(100))
        a = ad.dropout(x, 0.5, XorShiftRNG(4)).data
        b = ad.dropout(x, 0.5, XorShiftRNG(4)).data
        assert np.array_equal(a, b)
        assert set(np.unique(a)) <= {0.0, 2.0}
