import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from multitime.errors import GridError, GridMismatchError, NonFiniteError
from multitime.wavegrid import (SpatialGrid, WaveField1, WaveField2, gaussian_packet, inner,
                                l2_distance, phase_aligned_distance, product_state, read_field,
                                write_field)


def random_field(grid, rng):
    v = rng.normal(size=(grid.n, grid.n)) + 1j * rng.normal(size=(grid.n, grid.n))
    return WaveField2(grid, grid, v)


@pytest.fixture
def small():
    return SpatialGrid.centered(32, 16.0)


def test_grid_validation():
    with pytest.raises(GridError):
        SpatialGrid(0.0, 0.1, 12)
    with pytest.raises(GridError):
        SpatialGrid(0.0, 0.1, 4)
    with pytest.raises(GridError):
        SpatialGrid(0.0, -0.1, 16)
    with pytest.raises(GridError):
        SpatialGrid(float("nan"), 0.1, 16)


def test_centered_grid(grid):
    assert grid.n == 256
    assert grid.dq == 40.0 / 256
    assert grid.points[128] == 0.0
    assert grid.extent == 40.0


def test_packet_normalized_and_symmetric(grid):
    psi = gaussian_packet(grid, 0.0, 1.0)
    assert abs(psi.norm() - 1.0) < 1e-12
    a = np.abs(psi.values)
    # grid midpoint is index 128; mirror pairs 128 +- j
    np.testing.assert_allclose(a[129:], a[127:0:-1], rtol=0, atol=1e-12)


def test_packet_moments(grid):
    psi = gaussian_packet(grid, 1.3, 1.0, 2.0)
    assert abs(psi.mean_position() - 1.3) < grid.dq
    assert abs(psi.width() - 1.0) < 1e-10


def test_packet_preconditions(grid):
    with pytest.raises(GridError):
        gaussian_packet(grid, 0.0, grid.dq)
    with pytest.raises(GridError):
        gaussian_packet(grid, 17.0, 1.0)


def test_product_state_properties(grid):
    a = gaussian_packet(grid, 0.5, 1.0, 0.3)
    b = gaussian_packet(grid, -1.0, 1.5)
    phi = product_state(a, b)
    assert abs(phi.norm() - 1) < 1e-10
    np.testing.assert_allclose(phi.marginal(1), np.abs(a.values) ** 2, atol=1e-10)
    np.testing.assert_allclose(phi.marginal(2), np.abs(b.values) ** 2, atol=1e-10)
    assert np.array_equal(product_state(b, a).values, phi.values.T)


def test_fields_are_immutable(small):
    f = WaveField2(small, small, np.zeros((32, 32)))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_field_shape_and_finiteness(small):
    with pytest.raises(GridMismatchError):
        WaveField2(small, small, np.zeros((32, 16)))
    bad = np.zeros((32, 32), dtype=complex)
    bad[3, 3] = np.nan
    with pytest.raises(NonFiniteError):
        WaveField2(small, small, bad)


def test_distances(small, rng):
    a = random_field(small, rng)
    assert l2_distance(a, a) == 0.0
    assert abs(l2_distance(a, a.with_values(-a.values)) - 2 * a.norm()) < 1e-12


def test_triangle_inequality(small, rng):
    a, b, c = (random_field(small, rng) for _ in range(3))
    assert l2_distance(a, c) <= l2_distance(a, b) + l2_distance(b, c) + 1e-12


def test_grid_mismatch(small, grid):
    a = WaveField2(small, small, np.ones((32, 32)))
    b = WaveField2(grid, grid, np.ones((256, 256)))
    with pytest.raises(GridMismatchError):
        l2_distance(a, b)


def test_phase_alignment_pure_phase(small, rng):
    a = random_field(small, rng)
    b = a.with_values(np.exp(0.7j) * a.values)
    res = phase_aligned_distance(a, b)
    assert abs(res.phase - (-0.7)) < 1e-12
    assert res.distance < 1e-12
    assert not res.orthogonal


def test_phase_alignment_identity(small, rng):
    a = random_field(small, rng)
    res = phase_aligned_distance(a, a)
    assert res.phase == 0.0 or abs(res.phase) < 1e-15
    assert res.distance < 1e-12


def test_phase_alignment_orthogonal(small, rng):
    a = random_field(small, rng)
    r = random_field(small, rng)
    # Gram-Schmidt: remove the component along a
    b = r.with_values(r.values - inner(a, r) / inner(a, a) * a.values)
    res = phase_aligned_distance(a, b)
    assert res.orthogonal
    assert res.phase == 0.0
    assert abs(res.distance - l2_distance(a, b)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(phi=st.floats(-3.0, 3.0), seed=st.integers(0, 2**32 - 1))
def test_phase_alignment_is_minimal(phi, seed):
    g = SpatialGrid.centered(16, 8.0)
    rng = np.random.default_rng(seed)
    a = random_field(g, rng)
    mixed = a.values * np.exp(1j * phi) + 0.3 * rng.normal(size=(16, 16))
    b = a.with_values(mixed)
    res = phase_aligned_distance(a, b)
    assert -math.pi < res.phase <= math.pi
    for trial in np.linspace(-math.pi, math.pi, 37):
        d = l2_distance(a, b.with_values(np.exp(1j * trial) * mixed))
        assert res.distance <= d + 1e-12


def test_parseval_round_trip(grid, rng):
    v = rng.normal(size=grid.n) + 1j * rng.normal(size=grid.n)
    back = np.fft.ifft(np.fft.fft(v))
    assert np.max(np.abs(back - v)) < 1e-12
    # unitary normalization preserves the norm
    assert abs(np.linalg.norm(np.fft.fft(v, norm="ortho")) - np.linalg.norm(v)) < 1e-12


@pytest.mark.parametrize("fmt", ["bin", "csv"])
def test_serialization_round_trip(tmp_path, small, rng, fmt):
    f = random_field(small, rng)
    path = tmp_path / f"field.{fmt}"
    write_field(f, path, fmt)
    g = read_field(path)
    assert g.grid1 == small and g.grid2 == small
    assert np.array_equal(g.values, f.values)


def test_serialization_1d(tmp_path, small):
    psi = gaussian_packet(small, 0.0, 1.0)
    write_field(psi, tmp_path / "p.bin")
    back = read_field(tmp_path / "p.bin")
    assert isinstance(back, WaveField1)
    assert np.array_equal(back.values, psi.values)


def test_binary_layout(tmp_path, small):
    # first axis index major: element (0, 1) follows (0, 0)
    v = np.zeros((32, 32), dtype=complex)
    v[0, 1] = 1 + 2j
    write_field(WaveField2(small, small, v), tmp_path / "f.bin")
    raw = (tmp_path / "f.bin").read_bytes()
    body = raw[raw.index(b"\n") + 1:]
    assert np.frombuffer(body[16:32], dtype="<c16")[0] == 1 + 2j
