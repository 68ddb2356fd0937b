import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from steinflow import InputError
from steinflow.metrics import EvalReport, classification_metrics, particle_moments, regression_metrics


class TestClassification:
    def test_perfect(self):
        acc, ll = classification_metrics([[1.0, 0.0, 1.0]], [1, 0, 1])
        assert acc == 1.0
        assert ll == 0.0

    def test_uniform(self):
        acc, ll = classification_metrics(np.full((4, 5), 0.5), [1, 0, 1, 1, 0])
        assert ll == pytest.approx(np.log(0.5))
        assert acc == pytest.approx(0.4)  # 0.5 is not above threshold, so everything is predicted 0

    def test_two_particle_average(self):
        acc, ll = classification_metrics([[0.2], [0.6]], [1])
        assert ll == pytest.approx(np.log(0.4))
        assert acc == 0.0

    def test_clipping(self):
        _, ll = classification_metrics([[0.0]], [1])
        assert ll == pytest.approx(np.log(1e-12))

    def test_errors(self):
        with pytest.raises(InputError):
            classification_metrics([[0.5, 0.5]], [1])
        with pytest.raises(InputError):
            classification_metrics([[1.5]], [1])


class TestRegression:
    def test_exact(self):
        rmse, _ = regression_metrics([[1.0, 2.0]], [1.0], [1.0, 2.0])
        assert rmse == 0.0

    def test_single_point_density(self):
        r, g = 0.7, 2.5
        _, ll = regression_metrics([[r]], [g], [0.0])
        assert ll == pytest.approx(0.5 * np.log(g / (2 * np.pi)) - g * r**2 / 2, rel=1e-14)

    def test_constant_offset(self):
        y = np.array([1.0, -3.0, 2.0])
        rmse, _ = regression_metrics([y + 0.3, y + 0.3], [1.0, 2.0], y)
        assert rmse == pytest.approx(0.3)

    def test_mixture_density(self):
        # two particles, one point: log of the averaged density
        _, ll = regression_metrics([[0.0], [1.0]], [1.0, 4.0], [0.0])
        dens = 0.5 * (np.sqrt(1 / (2 * np.pi)) + np.sqrt(4 / (2 * np.pi)) * np.exp(-2.0))
        assert ll == pytest.approx(np.log(dens), rel=1e-14)

    def test_nonpositive_precision(self):
        with pytest.raises(InputError):
            regression_metrics([[0.0]], [0.0], [0.0])


class TestMoments:
    def test_pair(self):
        mean, cov = particle_moments([[-1.0], [1.0]])
        assert mean[0] == 0.0
        assert cov[0, 0] == 2.0

    def test_identical(self):
        _, cov = particle_moments(np.ones((4, 2)))
        assert np.all(cov == 0.0)

    def test_single_particle(self):
        mean, cov = particle_moments([[0.3, 0.4]])
        assert cov is None
        assert np.array_equal(mean, [0.3, 0.4])


def test_report_dict():
    rep = EvalReport(accuracy=0.75, mean=np.array([1.0, 2.0]), covariance=np.eye(2))
    assert rep.as_dict() == {"accuracy": 0.75, "mean": [1.0, 2.0], "covariance": [[1.0, 0.0], [0.0, 1.0]]}


@settings(max_examples=40, deadline=None)
@given(
    probs=st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
        lambda s: arrays(float, s, elements=st.floats(0, 1))
    ),
    data=st.data(),
)
def test_classification_permutation_invariant(probs, data):
    labels = data.draw(arrays(float, probs.shape[1], elements=st.sampled_from([0.0, 1.0])))
    perm = data.draw(st.permutations(range(probs.shape[0])))
    a = classification_metrics(probs, labels)
    b = classification_metrics(probs[list(perm)], labels)
    assert a[0] == b[0]
    assert a[1] == pytest.approx(b[1], abs=1e-12)
    assert 0 <= a[0] <= 1


@settings(max_examples=40, deadline=None)
@given(
    means=st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
        lambda s: arrays(float, s, elements=st.floats(-5, 5))
    ),
    data=st.data(),
)
def test_regression_permutation_invariant(means, data):
    prec = data.draw(arrays(float, means.shape[0], elements=st.floats(0.1, 10)))
    y = data.draw(arrays(float, means.shape[1], elements=st.floats(-5, 5)))
    perm = list(data.draw(st.permutations(range(means.shape[0]))))
    a = regression_metrics(means, prec, y)
    b = regression_metrics(means[perm], prec[perm], y)
    assert a[0] == pytest.approx(b[0], abs=1e-12)
    assert a[1] == pytest.approx(b[1], abs=1e-9)
    assert a[0] >= 0 and np.isfinite(a[1])
