import numpy as np
import pytest

from margctgan.netcore import (
    AdamState,
    NetError,
    NetSpec,
    Network,
    OutputHeads,
    adam_step,
    gradient_penalty,
    gumbel_softmax,
    gumbel_softmax_backward,
)


def fd_grad(fn, arr, h=1e-5):
    """Central finite differences of scalar fn() w.r.t. arr, in place."""
    g = np.zeros_like(arr)
    flat, gf = arr.ravel(), g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = fn()
        flat[i] = orig - h
        fm = fn()
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def max_rel_err(a, b):
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
    return float(np.max(np.abs(a - b) / denom))


def zero_params(net):
    net.set_parameters([np.zeros_like(p) for p in net.parameters()])


class TestNetSpec:
    def test_mismatched_activation_count(self):
        with pytest.raises(NetError):
            NetSpec(3, (4, 2), ("relu",))

    def test_unknown_activation(self):
        with pytest.raises(NetError):
            NetSpec(3, (4,), ("sigmoid",))

    def test_bad_widths(self):
        with pytest.raises(NetError):
            NetSpec(0, (4,), ("relu",))
        with pytest.raises(NetError):
            NetSpec(3, (0,), ("relu",))


class TestForward:
    def test_zero_params_zero_preactivations(self):
        net = Network(NetSpec(3, (4, 2), ("relu", "identity")), np.random.default_rng(0))
        zero_params(net)
        out, cache = net.forward(np.random.default_rng(1).normal(size=(5, 3)))
        np.testing.assert_array_equal(out, np.zeros((5, 2)))
        for a in cache["pre"]:
            np.testing.assert_array_equal(a, np.zeros_like(a))

    def test_identity_single_layer_is_affine(self):
        rng = np.random.default_rng(2)
        net = Network(NetSpec(4, (3,), ("identity",)), rng)
        x = rng.normal(size=(6, 4))
        out, _ = net.forward(x)
        np.testing.assert_allclose(out, x @ net.weights[0] + net.biases[0])

    def test_batch_of_one_matches_row_of_batch(self):
        rng = np.random.default_rng(3)
        net = Network(NetSpec(5, (6, 2), ("tanh", "identity")), rng)
        x = rng.normal(size=(4, 5))
        full, _ = net.forward(x)
        for i in range(4):
            single, _ = net.forward(x[i : i + 1])
            np.testing.assert_allclose(single[0], full[i])

    def test_width_mismatch_rejected(self):
        net = Network(NetSpec(3, (2,), ("identity",)), np.random.default_rng(0))
        with pytest.raises(NetError):
            net.forward(np.zeros((2, 4)))

    def test_non_finite_input_rejected(self):
        net = Network(NetSpec(2, (2,), ("identity",)), np.random.default_rng(0))
        with pytest.raises(NetError):
            net.forward(np.array([[1.0, np.nan]]))

    def test_init_within_fan_in_bound(self):
        net = Network(NetSpec(16, (8,), ("relu",)), np.random.default_rng(4))
        bound = 1.0 / 4.0
        assert np.all(np.abs(net.weights[0]) <= bound)
        assert np.all(np.abs(net.biases[0]) <= bound)


class TestBackward:
    def test_matches_finite_differences_two_layer(self):
        rng = np.random.default_rng(5)
        net = Network(NetSpec(4, (6, 3), ("tanh", "identity")), rng)
        x = rng.normal(size=(3, 4))
        r = rng.normal(size=(3, 3))

        def loss():
            return float((net.forward(x)[0] * r).sum())

        _, cache = net.forward(x)
        grads, _ = net.backward(cache, r)
        for i, p in enumerate(net.parameters()):
            fd = fd_grad(loss, p)
            assert max_rel_err(grads.arrays()[i], fd) < 1e-5

    def test_zero_output_gradient_gives_zero_grads(self):
        rng = np.random.default_rng(6)
        net = Network(NetSpec(3, (4, 2), ("leaky_relu", "identity")), rng)
        _, cache = net.forward(rng.normal(size=(2, 3)))
        grads, dx = net.backward(cache, np.zeros((2, 2)))
        for g in grads.arrays():
            np.testing.assert_array_equal(g, np.zeros_like(g))
        np.testing.assert_array_equal(dx, np.zeros((2, 3)))

    def test_linear_in_output_gradient(self):
        rng = np.random.default_rng(7)
        net = Network(NetSpec(3, (4, 2), ("tanh", "identity")), rng)
        x = rng.normal(size=(2, 3))
        r = rng.normal(size=(2, 2))
        _, cache = net.forward(x)
        g1, d1 = net.backward(cache, r)
        g2, d2 = net.backward(cache, 2.0 * r)
        for a, b in zip(g1.arrays(), g2.arrays()):
            np.testing.assert_allclose(2.0 * a, b)
        np.testing.assert_allclose(2.0 * d1, d2)

    def test_missing_cache_rejected(self):
        net = Network(NetSpec(3, (2,), ("identity",)), np.random.default_rng(0))
        with pytest.raises(NetError):
            net.backward({}, np.zeros((1, 2)))


class TestInputGradient:
    def test_affine_scalar_net_gradient_is_w(self):
        rng = np.random.default_rng(8)
        net = Network(NetSpec(4, (1,), ("identity",)), rng)
        x = rng.normal(size=(3, 4))
        _, cache = net.forward(x)
        g = net.input_gradient(cache)
        for i in range(3):
            np.testing.assert_allclose(g[i], net.weights[0][:, 0])

    def test_matches_finite_differences_leaky_net(self):
        rng = np.random.default_rng(9)
        net = Network(NetSpec(4, (5, 1), ("leaky_relu", "identity")), rng)
        x = rng.normal(size=(3, 4))

        def loss():
            return float(net.forward(x)[0].sum())

        _, cache = net.forward(x)
        g = net.input_gradient(cache)
        fd = fd_grad(loss, x)
        assert max_rel_err(g, fd) < 1e-5

    def test_dead_relu_unit_contributes_nothing(self):
        net = Network(NetSpec(2, (2, 1), ("relu", "identity")), np.random.default_rng(0))
        net.set_parameters(
            [
                np.array([[1.0, -1.0], [0.0, 0.0]]),
                np.array([[1.0], [1.0]]),
                np.zeros(2),
                np.zeros(1),
            ]
        )
        _, cache = net.forward(np.array([[1.0, 0.0]]))
        g = net.input_gradient(cache)
        np.testing.assert_allclose(g, [[1.0, 0.0]])

    def test_non_scalar_output_rejected(self):
        net = Network(NetSpec(3, (2,), ("identity",)), np.random.default_rng(0))
        _, cache = net.forward(np.zeros((1, 3)))
        with pytest.raises(NetError):
            net.input_gradient(cache)


class TestGradientPenalty:
    def test_affine_critic_closed_form(self):
        rng = np.random.default_rng(10)
        net = Network(NetSpec(3, (1,), ("identity",)), rng)
        real = rng.normal(size=(4, 3))
        fake = rng.normal(size=(4, 3))
        lam = 10.0
        penalty, grads = gradient_penalty(net, real, fake, np.random.default_rng(1), lam)
        w = net.weights[0][:, 0]
        norm = np.linalg.norm(w)
        assert penalty == pytest.approx(lam * (norm - 1.0) ** 2)
        expected_dw = 2.0 * lam * (norm - 1.0) * w / norm
        np.testing.assert_allclose(grads.weights[0][:, 0], expected_dw)
        np.testing.assert_allclose(grads.biases[0], np.zeros(1))

    def test_unit_norm_affine_critic_zero_penalty(self):
        net = Network(NetSpec(2, (1,), ("identity",)), np.random.default_rng(0))
        w = np.array([[3.0 / 5.0], [4.0 / 5.0]])
        net.set_parameters([w, np.array([0.5])])
        rng = np.random.default_rng(2)
        penalty, grads = gradient_penalty(net, rng.normal(size=(3, 2)), rng.normal(size=(3, 2)), rng)
        assert penalty == pytest.approx(0.0, abs=1e-12)
        for g in grads.arrays():
            np.testing.assert_allclose(g, np.zeros_like(g), atol=1e-12)

    def test_matches_finite_differences_random_net(self):
        rng = np.random.default_rng(11)
        net = Network(NetSpec(3, (5, 4, 1), ("leaky_relu", "tanh", "identity")), rng)
        real = rng.normal(size=(4, 3))
        fake = rng.normal(size=(4, 3))
        eps = rng.uniform(size=(4, 1))
        lam = 10.0

        def penalty_value():
            return gradient_penalty(net, real, fake, None, lam, eps=eps)[0]

        _, grads = gradient_penalty(net, real, fake, None, lam, eps=eps)
        for i, p in enumerate(net.parameters()):
            fd = fd_grad(penalty_value, p)
            assert max_rel_err(grads.arrays()[i], fd) < 1e-4

    def test_shape_mismatch_rejected(self):
        net = Network(NetSpec(2, (1,), ("identity",)), np.random.default_rng(0))
        with pytest.raises(NetError):
            gradient_penalty(net, np.zeros((2, 2)), np.zeros((3, 2)), np.random.default_rng(0))


class TestFiniteDifferenceSweep:
    """Gradient agreement on several random small nets for every op."""

    SPECS = [
        (NetSpec(3, (4, 1), ("tanh", "identity")), 21),
        (NetSpec(5, (8, 6, 1), ("leaky_relu", "tanh", "identity")), 22),
        (NetSpec(2, (7, 1), ("leaky_relu", "identity")), 23),
    ]

    @pytest.mark.parametrize("spec,seed", SPECS)
    def test_backward_and_input_and_penalty(self, spec, seed):
        rng = np.random.default_rng(seed)
        net = Network(spec, rng)
        n = 4
        x = rng.normal(size=(n, spec.in_dim))
        r = rng.normal(size=(n, spec.out_dim))

        def loss():
            return float((net.forward(x)[0] * r).sum())

        _, cache = net.forward(x)
        grads, dx = net.backward(cache, r)
        for i, p in enumerate(net.parameters()):
            assert max_rel_err(grads.arrays()[i], fd_grad(loss, p)) < 1e-4
        assert max_rel_err(dx, fd_grad(loss, x)) < 1e-4

        real = rng.normal(size=(n, spec.in_dim))
        fake = rng.normal(size=(n, spec.in_dim))
        eps = rng.uniform(size=(n, 1))

        def penalty_value():
            return gradient_penalty(net, real, fake, None, 10.0, eps=eps)[0]

        _, pgrads = gradient_penalty(net, real, fake, None, 10.0, eps=eps)
        for i, p in enumerate(net.parameters()):
            assert max_rel_err(pgrads.arrays()[i], fd_grad(penalty_value, p)) < 1e-4


class TestGumbelSoftmax:
    def test_rows_on_simplex(self):
        rng = np.random.default_rng(30)
        logits = rng.normal(size=(50, 7))
        out = gumbel_softmax(logits, 0.5, rng)
        np.testing.assert_allclose(out.sum(axis=1), np.ones(50), atol=1e-9)
        assert np.all(out >= 0)

    def test_low_temperature_concentrates_on_large_logit(self):
        rng = np.random.default_rng(31)
        logits = np.tile(np.array([10.0, 0.0, 0.0]), (10_000, 1))
        out = gumbel_softmax(logits, 0.1, rng)
        assert (out[:, 0] > 0.999).mean() >= 0.99

    def test_zero_noise_reduces_to_softmax(self):
        logits = np.array([[1.0, 2.0, 3.0]])
        out = gumbel_softmax(logits, 1.0, None, noise=np.zeros((1, 3)))
        e = np.exp(logits - logits.max())
        np.testing.assert_allclose(out, e / e.sum())

    def test_hard_returns_one_hot(self):
        rng = np.random.default_rng(32)
        out = gumbel_softmax(rng.normal(size=(20, 4)), 0.2, rng, hard=True)
        np.testing.assert_array_equal(out.sum(axis=1), np.ones(20))
        assert set(np.unique(out)) <= {0.0, 1.0}

    def test_non_positive_temperature_rejected(self):
        with pytest.raises(NetError):
            gumbel_softmax(np.zeros((1, 2)), 0.0, np.random.default_rng(0))

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(33)
        logits = rng.normal(size=(3, 4))
        noise = rng.gumbel(size=(3, 4))
        r = rng.normal(size=(3, 4))
        tau = 0.7

        def loss():
            return float((gumbel_softmax(logits, tau, None, noise=noise) * r).sum())

        soft = gumbel_softmax(logits, tau, None, noise=noise)
        g = gumbel_softmax_backward(soft, r, tau)
        assert max_rel_err(g, fd_grad(loss, logits)) < 1e-4


class TestOutputHeads:
    def make_heads(self, tau=0.5):
        # width 6: alpha slot 0, mode span (1,2), categorical span (3,3)
        return OutputHeads([0], [(1, 2), (3, 3)], 6, tau=tau)

    def test_coverage_gap_rejected(self):
        with pytest.raises(NetError):
            OutputHeads([0], [(2, 2)], 5)

    def test_overlap_rejected(self):
        with pytest.raises(NetError):
            OutputHeads([1], [(1, 2), (3, 2)], 5)

    def test_apply_structure(self):
        heads = self.make_heads()
        rng = np.random.default_rng(40)
        raw = rng.normal(size=(9, 6))
        out, _ = heads.apply(raw, rng)
        np.testing.assert_allclose(out[:, 0], np.tanh(raw[:, 0]))
        np.testing.assert_allclose(out[:, 1:3].sum(axis=1), np.ones(9), atol=1e-9)
        np.testing.assert_allclose(out[:, 3:6].sum(axis=1), np.ones(9), atol=1e-9)

    def test_hard_spans_one_hot(self):
        heads = self.make_heads()
        rng = np.random.default_rng(41)
        out, _ = heads.apply(rng.normal(size=(7, 6)), rng, hard=True)
        assert set(np.unique(out[:, 1:])) <= {0.0, 1.0}
        np.testing.assert_array_equal(out[:, 1:3].sum(axis=1), np.ones(7))

    def test_backward_matches_finite_differences(self):
        heads = self.make_heads(tau=0.8)
        rng = np.random.default_rng(42)
        raw = rng.normal(size=(3, 6))
        noise = rng.gumbel(size=(3, 6))
        r = rng.normal(size=(3, 6))

        def loss():
            out, _ = heads.apply(raw, None, noise=noise)
            return float((out * r).sum())

        out, cache = heads.apply(raw, None, noise=noise)
        draw = heads.backward(cache, r)
        assert max_rel_err(draw, fd_grad(loss, raw)) < 1e-4


class TestAdam:
    def test_zero_grads_leave_params_unchanged(self):
        rng = np.random.default_rng(50)
        params = [rng.normal(size=(3, 2)), rng.normal(size=2)]
        before = [p.copy() for p in params]
        state = AdamState()
        adam_step(params, [np.zeros_like(p) for p in params], state)
        for p, b in zip(params, before):
            np.testing.assert_array_equal(p, b)
        assert state.step == 1

    def test_first_step_closed_form(self):
        p = np.array([1.0, -2.0, 0.5])
        g = np.array([0.3, -0.7, 2.0])
        state = AdamState(lr=1e-3)
        adam_step([p], [g], state)
        expected = np.array([1.0, -2.0, 0.5]) - 1e-3 * g / (np.abs(g) + 1e-8)
        np.testing.assert_allclose(p, expected)

    def test_deterministic_across_identical_runs(self):
        def run():
            p = np.array([0.5, 0.5])
            state = AdamState(lr=0.01)
            for _ in range(10):
                adam_step([p], [p * 2.0 - 1.0], state)
            return p

        np.testing.assert_array_equal(run(), run())


class TestZeroParamHeads:
    def test_zero_net_gives_head_defaults(self):
        net = Network(NetSpec(3, (4, 6), ("relu", "identity")), np.random.default_rng(0))
        zero_params(net)
        heads = OutputHeads([0], [(1, 2), (3, 3)], 6, tau=1.0)
        raw, _ = net.forward(np.ones((2, 3)))
        out, _ = heads.apply(raw, None, noise=np.zeros((2, 6)))
        np.testing.assert_allclose(out[:, 0], np.zeros(2))
        np.testing.assert_allclose(out[:, 1:3], np.full((2, 2), 0.5))
        np.testing.assert_allclose(out[:, 3:6], np.full((2, 3), 1.0 / 3.0))
