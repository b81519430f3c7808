import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamuq.errors import DomainError
from beamuq.montecarlo import regression_rate
from beamuq.stochastic_space import RandomSpace, make_generator


@pytest.fixture
def box_2d():
    return RandomSpace(bounds=((0.0, 0.4), (0.65, 0.85)))


def test_bounds_must_be_ordered():
    with pytest.raises(DomainError):
        RandomSpace(bounds=((1.0, 1.0),))


def test_midpoint_maps_to_zero():
    space = RandomSpace(bounds=((0.8, 1.0),))
    assert space.map_to_reference(np.array([0.9]))[0] == pytest.approx(0.0)


def test_endpoint_maps_to_one():
    space = RandomSpace(bounds=((0.8, 1.0),))
    assert space.map_to_reference(np.array([1.0]))[0] == pytest.approx(1.0)


def test_affine_image_2d(box_2d):
    xi = box_2d.map_to_reference(np.array([0.1, 0.7]))
    assert np.allclose(xi, [-0.5, -0.5])
    back = box_2d.map_from_reference(xi)
    assert np.allclose(back, [0.1, 0.7], atol=1e-15)


def test_out_of_bounds_names_coordinate(box_2d):
    with pytest.raises(DomainError, match="coordinate 1"):
        box_2d.map_to_reference(np.array([0.1, 0.95]))
    with pytest.raises(DomainError):
        box_2d.map_from_reference(np.array([0.0, 1.5]))


def test_reference_endpoints():
    space = RandomSpace(bounds=((0.0, 0.4),))
    assert space.map_from_reference(np.array([-1.0]))[0] == pytest.approx(0.0)
    assert space.map_from_reference(np.array([0.0]))[0] == pytest.approx(0.2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.001, 0.999), min_size=2, max_size=4))
def test_round_trip_property(values):
    space = RandomSpace(bounds=tuple((0.0, 1.0) for _ in values))
    y = np.array(values)
    back = space.map_from_reference(space.map_to_reference(y))
    assert np.all(np.abs(back - y) <= 1e-14)


def test_density_inside_and_outside():
    space = RandomSpace(bounds=((0.0, 0.4),))
    assert space.density(np.array([0.2])) == pytest.approx(2.5)
    assert space.density(np.array([0.5])) == 0.0
    prod = RandomSpace(bounds=((0.8, 1.0), (1.0, 1.5)))
    assert prod.density(np.array([0.9, 1.2])) == pytest.approx(10.0)


def test_sampling_determinism():
    space = RandomSpace(bounds=((0.8, 1.0), (1.0, 1.5)))
    a = space.sample_array(make_generator(123), 10)
    b = space.sample_array(make_generator(123), 10)
    assert np.array_equal(a, b)
    # element-for-element match with repeated single draws
    rng = make_generator(123)
    singles = np.array([space.sample(rng) for _ in range(10)])
    assert np.array_equal(a, singles)


def test_samples_stay_inside():
    space = RandomSpace(bounds=((0.8, 1.0),))
    ys = space.sample_array(make_generator(7), 100_000)
    assert np.all(ys >= 0.8) and np.all(ys <= 1.0)
    # mean within 3 standard errors of 0.9
    stderr = (0.2 / np.sqrt(12.0)) / np.sqrt(len(ys))
    assert abs(ys.mean() - 0.9) < 3.0 * stderr


def test_mean_converges_at_half_rate():
    space = RandomSpace(bounds=((0.8, 1.0),))
    budgets = [10**k for k in range(2, 7)]
    reps = 32
    errors = []
    for eta in budgets:
        errs = []
        for rep in range(reps):
            ys = space.sample_array(make_generator(1000 * rep + eta), eta)
            errs.append(abs(ys[:, 0].mean() - 0.9))
        errors.append(np.mean(errs))
    rate = regression_rate(zip(budgets, errors))
    assert 0.4 <= rate <= 0.6
