from fractions import Fraction as F

import numpy as np
import pytest

from kml.discretization import (
    GridMismatchError,
    NormSpec,
    PhaseField,
    PhaseGrid,
    ResolutionWarning,
    SpatialGrid,
    SphereQuadrature,
    Trajectory,
    VelocityGrid,
    WindowError,
    mixed_norm,
    orthonormal_frame,
    read_field,
    read_trajectory,
    sample,
    velocity_norm,
    write_field,
    write_norm_history,
    write_trajectory,
)
from kml.exponents import Triplet, solvable_triplet


def maxwell(x, v):
    return (2 * np.pi) ** -1.5 * np.exp(-0.5 * np.sum(v * v, -1))


@pytest.fixture
def hgrid():
    return PhaseGrid(SpatialGrid(1.0, 1), VelocityGrid(6.0, 24))


def test_grid_validation():
    with pytest.raises(ValueError):
        VelocityGrid(3.0, 5)
    with pytest.raises(ValueError):
        VelocityGrid(3.0, 2)
    with pytest.raises(ValueError):
        SpatialGrid(1.0, 0)
    g = VelocityGrid(3.0, 12)
    assert g.h == 0.5 and g.nodes[0] == -2.75 and not np.any(g.nodes == 0)


def test_maxwellian_mass(hgrid):
    f = sample(maxwell, hgrid)
    assert abs(f.values.sum() * hgrid.v.cell_volume - 1) < 2e-3
    assert abs(velocity_norm(f.values[0, 0, 0], 1, 0.0, hgrid.v) - 1) < 2e-3


def test_sample_zero_and_warning():
    g = PhaseGrid(SpatialGrid(2.0, 4), VelocityGrid(2.0, 4))
    assert np.all(sample(lambda x, v: 0.0 * x[..., 0] * v[..., 0], g).values == 0)
    with pytest.warns(ResolutionWarning):
        sample(lambda x, v: np.exp(-40 * np.sum(v * v, -1)) + 0 * x[..., 0], g)
    with pytest.raises(ValueError):
        sample(lambda x, v: np.full(np.broadcast_shapes(x.shape, v.shape)[:-1], np.nan), g)


def test_field_invariants():
    g = PhaseGrid(SpatialGrid(1.0, 2), VelocityGrid(1.0, 4))
    with pytest.raises(GridMismatchError):
        PhaseField(np.zeros(10), g)
    f = PhaseField(np.ones(g.shape), g)
    with pytest.raises(ValueError):
        f.values[0, 0, 0, 0, 0, 0] = 2.0
    other = PhaseField.zeros(PhaseGrid(SpatialGrid(1.0, 2), VelocityGrid(2.0, 4)))
    with pytest.raises(GridMismatchError):
        f + other


def test_velocity_norm_examples():
    vg = VelocityGrid(1.0, 8)
    assert velocity_norm(np.ones((8, 8, 8)), F(1, 2), 0.0, vg) == pytest.approx(np.sqrt(8), rel=1e-12)
    vg = VelocityGrid(3.0, 12)
    rng = np.random.default_rng(0)
    gfun = rng.random((12, 12, 12))
    a = velocity_norm(gfun / vg.bracket(1.0), F(2, 5), 1.0, vg)
    assert a == pytest.approx(velocity_norm(gfun, F(2, 5), 0.0, vg), rel=1e-14)
    w = velocity_norm(gfun, F(1, 3), 0.7, vg)
    assert w == pytest.approx(velocity_norm(gfun * vg.bracket(0.7), F(1, 3), 0.0, vg), rel=1e-14)
    assert velocity_norm(gfun, 0, 0.0, vg) == gfun.max()


def test_sphere_quadrature():
    full = SphereQuadrature(8, 16, hemisphere=False)
    assert abs(full.weights.sum() - 4 * np.pi) < 1e-10
    for fn in (lambda w: w[:, 0], lambda w: w[:, 2], lambda w: w[:, 0] * w[:, 1] * w[:, 2],
               lambda w: w[:, 2] ** 3 - 0.6 * w[:, 2]):
        assert abs(full.integrate(fn)) < 1e-10
    assert full.integrate(lambda w: w[:, 2] ** 2) == pytest.approx(4 * np.pi / 3, abs=1e-10)
    half = SphereQuadrature(4, 8)
    assert abs(half.weights.sum() - 2 * np.pi) < 1e-10
    assert half.integrate(lambda w: w[:, 2]) == pytest.approx(np.pi, abs=1e-10)
    assert np.allclose(np.linalg.norm(half.nodes, axis=1), 1.0)


def test_orthonormal_frame():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(200, 3))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    a[0] = [0, 0, -1.0]
    e1, e2 = orthonormal_frame(a)
    for x, y in ((e1, e2), (e1, a), (e2, a)):
        assert np.abs(np.sum(x * y, 1)).max() < 1e-12
    assert np.allclose(np.linalg.norm(e1, axis=1), 1) and np.allclose(np.linalg.norm(e2, axis=1), 1)


def test_mixed_norm_examples():
    g = PhaseGrid(SpatialGrid(2.0, 2), VelocityGrid(2.0, 4))
    rng = np.random.default_rng(4)
    f0 = PhaseField(rng.random(g.shape), g)
    times = np.linspace(0, 1, 41)
    t_inf = Triplet(F(0), F(1, 3), F(1, 2))
    traj = Trajectory.constant(times, f0)
    assert mixed_norm(traj, NormSpec(t_inf)) == pytest.approx(_xv(f0, F(1, 3), F(1, 2)), rel=1e-13)
    t1 = Triplet(F(1), F(1, 3), F(1, 2))
    decay = Trajectory(times, np.exp(-times)[:, None, None, None, None, None, None] * f0.values, g)
    exact = (1 - np.exp(-1.0)) * _xv(f0, F(1, 3), F(1, 2))
    assert mixed_norm(decay, NormSpec(t1)) == pytest.approx(exact, rel=1e-4)
    # scaling and monotonicity
    spec = NormSpec(solvable_triplet(F(2, 5)), ell=0.5)
    assert mixed_norm(decay.with_values(3 * decay.values), spec) == pytest.approx(3 * mixed_norm(decay, spec),
                                                                                    rel=1e-14)
    assert mixed_norm(decay.with_values(0.5 * decay.values), spec) <= mixed_norm(decay, spec)
    with pytest.raises(WindowError):
        mixed_norm(decay, NormSpec(t1, time_window=(0.0, 2.0)))


def _xv(f, r_inv, p_inv):
    from kml.discretization import phase_norm

    return float(phase_norm(f.values, f.grid, r_inv, p_inv))


def test_homogeneous_measure_factor():
    X = 1.5
    g = PhaseGrid(SpatialGrid(X, 1), VelocityGrid(2.0, 4))
    f = PhaseField(np.random.default_rng(5).random(g.shape), g)
    r_inv = F(1, 4)
    vn = velocity_norm(f.values[0, 0, 0], F(1, 2), 0.0, g.v)
    assert _xv(f, r_inv, F(1, 2)) == pytest.approx((2 * X) ** (3 * float(r_inv)) * vn, rel=1e-13)


def test_binary_roundtrip(tmp_path):
    g = PhaseGrid(SpatialGrid(2.0, 2), VelocityGrid(3.0, 4))
    f = PhaseField(np.random.default_rng(6).random(g.shape), g)
    p = tmp_path / "f.bin"
    write_field(p, f)
    raw = p.read_bytes()
    assert raw[:4] == b"KMLF" and len(raw) == 64 + 8 * f.values.size
    back = read_field(p)
    assert back.grid == g and np.array_equal(back.values, f.values)
    p.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        read_field(p)
    traj = Trajectory([0.0, 0.5], np.stack([f.values, 2 * f.values]), g)
    write_trajectory(tmp_path / "traj", traj)
    t2 = read_trajectory(tmp_path / "traj")
    assert np.array_equal(t2.values, traj.values) and np.array_equal(t2.times, traj.times)
    write_norm_history(tmp_path / "h.csv", [(0.0, "gap", 1.5)])
    assert (tmp_path / "h.csv").read_text().splitlines()[0] == "t,norm_name,value"
