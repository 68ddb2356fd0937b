import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracles import bootstrap_ustat_se, brute_ksd, brute_u
from steinflow import InputError
from steinflow.discrepancy import KsdEstimate, ksd_per_kernel, mksd, optimal_weights, stein_gram, u_term
from steinflow.kernel import BandwidthGrid, build_grid, build_pairwise_eval, multi_kernel_eval, normalize_weights, rbf_eval
from steinflow.targets import GaussianTarget

E1 = np.exp(-1.0)
STD_NORMAL = GaussianTarget([0.0], [[1.0]])


class TestUTerm:
    def test_standard_normal_pair(self):
        # x=0, y=1: scores (0, -1); only the third term and the trace survive
        k, gx, t = rbf_eval([0.0], [1.0], 1.0)
        val = u_term([0.0], [-1.0], k, gx, -gx, t)
        assert val == pytest.approx(-4 * E1, rel=1e-14)
        assert val == pytest.approx(-1.4715, abs=1e-4)

    def test_pair_by_term(self):
        sx, sy, k = np.array([0.0]), np.array([-1.0]), E1
        grad_x = 2 * E1  # d/dx exp(-(x-1)^2) at x=0
        grad_y = -2 * E1
        terms = [sx @ sy * k, sx @ [grad_y], grad_x * sy[0], -2 * E1]
        assert sum(float(np.sum(t)) for t in terms) == pytest.approx(u_term(sx, sy, k, [grad_x], [grad_y], -2 * E1))

    @pytest.mark.parametrize("d,h", [(1, 1.0), (3, 0.5)])
    def test_at_mode(self, d, h):
        x = np.zeros(d)
        k, g, t = rbf_eval(x, x, h)
        assert u_term(np.zeros(d), np.zeros(d), k, g, -g, t) == pytest.approx(2 * d / h)

    def test_zero_scores(self):
        k, g, t = rbf_eval([0.2, 0.1], [1.0, -1.0], 2.0)
        assert u_term([0, 0], [0, 0], k, g, -g, t) == pytest.approx(t)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            u_term([0.0], [0.0, 1.0], 1.0, [0.0], [0.0], 0.0)


class TestKsdPerKernel:
    def setup_method(self):
        self.x = np.array([[0.0], [1.0]])
        self.ev = build_pairwise_eval(self.x, BandwidthGrid((1.0,)))
        self.s = STD_NORMAL.score(self.x)

    def test_two_point_u_statistic(self):
        est = ksd_per_kernel(self.ev, self.s, "U")
        assert est.per_kernel[0] == pytest.approx(-4 * E1, rel=1e-13)
        assert est.per_kernel[0] == pytest.approx(brute_ksd(self.x, self.s, [1.0], "U")[0], abs=1e-14)

    def test_two_point_v_statistic(self):
        est = ksd_per_kernel(self.ev, self.s, "V")
        # u(0,0) = 2, u(1,1) = 3, cross terms -4/e each
        assert est.per_kernel[0] == pytest.approx((2 + 3 - 8 * E1) / 4, rel=1e-13)
        assert est.per_kernel[0] == pytest.approx(0.5142, abs=1e-4)
        assert est.per_kernel[0] >= 0

    def test_zero_scores_v_is_mean_trace(self):
        rng = np.random.default_rng(0)
        ev = build_pairwise_eval(rng.normal(size=(5, 2)), BandwidthGrid((0.7,)))
        est = ksd_per_kernel(ev, np.zeros((5, 2)), "V")
        assert est.per_kernel[0] == pytest.approx(ev.trace_mixed_hessian[0].mean(), rel=1e-12)

    def test_u_needs_two_particles(self):
        ev = build_pairwise_eval([[0.0]], BandwidthGrid((1.0,)))
        with pytest.raises(InputError):
            ksd_per_kernel(ev, [[0.0]], "U")
        assert ksd_per_kernel(ev, [[0.0]], "V").per_kernel[0] == pytest.approx(2.0)

    def test_bad_kind(self):
        with pytest.raises(InputError):
            ksd_per_kernel(self.ev, self.s, "W")

    def test_matches_brute_force_random(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n, d, m = rng.integers(2, 8), rng.integers(1, 4), rng.integers(1, 4)
            x = rng.normal(size=(n, d))
            s = rng.normal(size=(n, d))
            grid = build_grid(float(rng.uniform(0.2, 2.0)), m, 3.0)
            ev = build_pairwise_eval(x, grid)
            for kind in "UV":
                assert np.allclose(ksd_per_kernel(ev, s, kind).per_kernel, brute_ksd(x, s, grid, kind), rtol=0, atol=1e-10)

    def test_stein_gram_matches_pairs(self):
        rng = np.random.default_rng(2)
        x, s = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
        grid = build_grid(0.5, 2)
        gram = stein_gram(build_pairwise_eval(x, grid), s)
        for i, h in enumerate(grid):
            for j in range(4):
                for l in range(4):
                    assert gram[i, j, l] == pytest.approx(brute_u(x[j], x[l], s[j], s[l], h), abs=1e-12)

    def test_combined_kernel_path_is_linear(self):
        # KSD of the weighted kernel built from combined arrays equals <w, S>
        rng = np.random.default_rng(3)
        x = rng.normal(size=(6, 2))
        s = GaussianTarget([0.3, -0.2], [[1.0, 0.3], [0.3, 0.5]]).score(x)
        ev = build_pairwise_eval(x, build_grid(0.25, 4))
        w = normalize_weights(rng.uniform(size=4))
        kw, gw, tw = multi_kernel_eval(ev, w)
        # second-argument gradient: grad_{x_l} k(x_j, x_l) = grad_first_arg[l, j]
        total = sum(
            u_term(s[j], s[l], kw[j, l], gw[j, l], gw[l, j], tw[j, l]) for j in range(6) for l in range(6)
        )
        assert total / 36 == pytest.approx(mksd(ksd_per_kernel(ev, s, "V"), w), abs=1e-10)


class TestMksdAndWeights:
    def test_mksd(self):
        assert mksd([2.5], [1.0]) == 2.5
        assert mksd([3.0, 1.0], [np.sqrt(3) / 2, 0.5]) == pytest.approx((3 * np.sqrt(3) + 1) / 2)
        assert mksd([3.0, 1.0], [np.sqrt(3) / 2, 0.5]) == pytest.approx(3.098, abs=1e-3)
        assert mksd(np.zeros(4), np.full(4, 0.5)) == 0.0
        with pytest.raises(InputError):
            mksd([1.0, 2.0], [1.0])

    def test_optimal_weights_two_kernels(self):
        w = optimal_weights(KsdEstimate([3.0, 1.0]))
        assert np.allclose(w, [np.sqrt(0.75), 0.5])
        assert np.allclose(w, [0.8660, 0.5], atol=1e-4)

    def test_rules_against_grid_search(self):
        # quarter circle at resolution 1e-4
        theta = np.arange(0, np.pi / 2 + 1e-4, 1e-4)
        circle = np.column_stack([np.cos(theta), np.sin(theta)])
        s = np.array([3.0, 1.0])
        # the sqrt rule maximizes <w, sqrt(S)>, the argmax rule maximizes <w, S>
        assert np.allclose(optimal_weights(s), circle[np.argmax(circle @ np.sqrt(s))], atol=1e-4)
        assert np.allclose(optimal_weights(s, "argmax"), circle[np.argmax(circle @ s)], atol=1e-4)
        # and the two differ: sqrt-rule weights are not the maximizer of <w, S>
        assert optimal_weights(s) @ s < (circle @ s).max() - 0.05

    def test_unknown_rule(self):
        with pytest.raises(InputError):
            optimal_weights([1.0, 2.0], "l1")

    def test_equal_entries_uniform(self):
        assert np.allclose(optimal_weights([0.7] * 5), np.full(5, 5**-0.5))

    def test_single_kernel(self):
        assert np.array_equal(optimal_weights([0.3]), [1.0])

    def test_nonpositive_fallback(self):
        assert np.allclose(optimal_weights([-1.0, 0.0, -2.0]), np.full(3, 3**-0.5))

    def test_negative_entries_clamped(self):
        assert np.allclose(optimal_weights([-1.0, 4.0]), [0.0, 1.0])

    def test_estimate_rejects_nan(self):
        with pytest.raises(InputError):
            KsdEstimate([np.nan])


def random_unit_vectors(m, count=10_000, seed=0):
    w = np.abs(np.random.default_rng(seed).normal(size=(count, m)))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


@settings(max_examples=30, deadline=None)
@given(s=st.integers(1, 5).flatmap(lambda m: arrays(float, m, elements=st.floats(0, 10))))
def test_argmax_rule_beats_random_unit_vectors(s):
    w = random_unit_vectors(s.size)
    assert np.all(optimal_weights(s, "argmax") @ s >= w @ s - 1e-8)


@settings(max_examples=30, deadline=None)
@given(s=st.integers(1, 5).flatmap(lambda m: arrays(float, m, elements=st.floats(0, 10))))
def test_sqrt_rule_maximizes_direction_norm_sum(s):
    w = random_unit_vectors(s.size)
    assert np.all(optimal_weights(s) @ np.sqrt(s) >= w @ np.sqrt(s) - 1e-8)


@settings(max_examples=40, deadline=None)
@given(
    x=st.integers(1, 7).flatmap(lambda n: arrays(float, (n, 2), elements=st.floats(-4, 4))),
    mu=arrays(float, 2, elements=st.floats(-2, 2)),
)
def test_v_statistic_nonnegative(x, mu):
    s = GaussianTarget(mu, np.eye(2) * 0.5).score(x)
    est = ksd_per_kernel(build_pairwise_eval(x, build_grid(0.05, 6, 3.0)), s, "V")
    assert np.all(est.per_kernel >= -1e-10)


def test_stein_identity_at_truth_and_shift():
    target = GaussianTarget(np.zeros(2), np.eye(2))
    rng = np.random.default_rng(7)
    x = target.sample(2000, rng)
    grid = build_grid(2.0**-2, 6)
    ev = build_pairwise_eval(x, grid)
    scores = target.score(x)
    u = ksd_per_kernel(ev, scores, "U").per_kernel
    gram = stein_gram(ev, scores)
    for i in range(len(grid)):
        se = bootstrap_ustat_se(gram[i], rng, n_boot=200)
        assert abs(u[i]) <= 3 * se, (grid.bandwidths[i], u[i], se)
    shifted = x + 1.0
    ev = build_pairwise_eval(shifted, grid)
    v = ksd_per_kernel(ev, target.score(shifted), "V")
    assert mksd(v, np.full(len(grid), len(grid) ** -0.5)) > 0
