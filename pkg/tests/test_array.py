import math

import numpy as np
import pytest

from ncbf.array import (
    SPEED_OF_LIGHT,
    ArrayConfig,
    Region,
    UserLocation,
    channel_correlation,
    channel_matrix,
    channel_vector,
    classify_region,
    fresnel_distance,
    rayleigh_distance,
    steering_vector,
    vector_correlation,
)
from ncbf.errors import ConfigError


def test_ref_array_distances(ref_array):
    assert ref_array.wavelength == pytest.approx(0.085657, abs=1e-6)
    assert ref_array.aperture == pytest.approx(0.92)
    assert rayleigh_distance(ref_array) == pytest.approx(19.75, abs=0.02)
    assert ref_array.element_spacing / ref_array.wavelength == pytest.approx(
        0.467, abs=0.001
    )
    assert fresnel_distance(ref_array) == pytest.approx(1.015, abs=0.01)


def test_rayleigh_distance_doubles_with_frequency():
    config = ArrayConfig(24, 0.04, 7.0e9)
    assert rayleigh_distance(config) == pytest.approx(39.51, abs=0.05)


def test_classify_region(ref_array):
    assert classify_region(ref_array, 0.5) == Region.REACTIVE
    assert classify_region(ref_array, 3.0) == Region.RADIATIVE
    assert classify_region(ref_array, 25.0) == Region.FAR


def test_elements_centered_on_origin(ref_array):
    pos = ref_array.element_positions
    assert pos.shape == (24, 2)
    assert np.all(pos[:, 0] == 0)
    assert pos[:, 1].mean() == pytest.approx(0, abs=1e-15)
    assert np.allclose(np.diff(pos[:, 1]), 0.04)


def test_invalid_array_lists_every_violation():
    with pytest.raises(ConfigError) as info:
        ArrayConfig(1, 0.0, -1.0)
    assert len(info.value.violations) == 3


@pytest.mark.parametrize("angle, r", [(0.0, 0.0), (math.pi / 2, 1.0), (0.1, -2.0)])
def test_invalid_location(angle, r):
    with pytest.raises(ValueError):
        UserLocation(angle, r)


def test_channel_amplitude_follows_free_space_loss(ref_array):
    loc = UserLocation.from_degrees(-32, 3.4)
    h = channel_vector(ref_array, loc)
    x, y = loc.cartesian()
    r_n = np.hypot(x, y - ref_array.element_positions[:, 1])
    assert np.allclose(np.abs(h), ref_array.wavelength / (4 * np.pi * r_n))
    phase = np.exp(1j * ref_array.propagation_constant * r_n)
    assert np.allclose(h / np.abs(h), phase)


def test_channel_matrix_columns(ref_array, scenario_1):
    c = channel_matrix(ref_array, scenario_1.users)
    assert c.shape == (24, 3)
    assert np.array_equal(c[:, 1], channel_vector(ref_array, scenario_1.users[1]))


def test_correlation_properties(ref_array):
    a = UserLocation.from_degrees(-10, 3.7)
    b = UserLocation.from_degrees(25, 2.0)
    assert channel_correlation(ref_array, a, a) == pytest.approx(1.0)
    assert channel_correlation(ref_array, a, b) == pytest.approx(
        channel_correlation(ref_array, b, a)
    )
    assert 0 <= channel_correlation(ref_array, a, b) < 1


def test_far_field_channel_matches_steering_vector(ref_array):
    loc = UserLocation.from_degrees(20, 1e4)
    h = channel_vector(ref_array, loc)
    a = steering_vector(ref_array, loc.direction_cosine)
    assert vector_correlation(h, a) > 0.999


def test_half_wavelength_steering_vectors_are_orthogonal():
    n = 16
    config = ArrayConfig(n, SPEED_OF_LIGHT / 3.5e9 / 2, 3.5e9)
    u = (2 * np.arange(n) - n + 1) / n
    vectors = np.column_stack([steering_vector(config, x) for x in u])
    gram = vectors.conj().T @ vectors
    assert np.allclose(gram, n * np.eye(n), atol=1e-9)


def test_mirror_symmetry(ref_array):
    h_pos = channel_vector(ref_array, UserLocation.from_degrees(25, 2.2))
    h_neg = channel_vector(ref_array, UserLocation.from_degrees(-25, 2.2))
    assert np.allclose(h_neg, h_pos[::-1], rtol=1e-12, atol=0)


def test_distances_grow_with_element_count():
    configs = [ArrayConfig(n, 0.04, 3.5e9) for n in (8, 16, 24, 32)]
    assert np.all(np.diff([rayleigh_distance(c) for c in configs]) > 0)
    assert np.all(np.diff([fresnel_distance(c) for c in configs]) > 0)


def test_correlation_ignores_unit_modulus_scaling(ref_array):
    a = channel_vector(ref_array, UserLocation.from_degrees(5, 1.5))
    b = channel_vector(ref_array, UserLocation.from_degrees(12, 4.0))
    assert vector_correlation(a * np.exp(0.7j), b) == pytest.approx(
        vector_correlation(a, b)
    )
