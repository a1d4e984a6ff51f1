import numpy as np
import pytest

from kml.discretization import PhaseField, PhaseGrid, SpatialGrid, Trajectory, VelocityGrid
from kml.transport import (
    TimeGrid,
    advect,
    advect_array,
    damped_propagate,
    duhamel,
    duhamel_values,
    free_trajectory,
    propagate_values,
)


def grid(n_x=8, n_v=4, X=4.0, V=1.0):
    return PhaseGrid(SpatialGrid(X, n_x), VelocityGrid(V, n_v))


def bump(g, s=0.8):
    x = g.x.points()[:, :, :, None, None, None, :]
    v = g.v.points()[None, None, None]
    return np.exp(-np.sum(x * x, -1) / (2 * s * s)) * np.exp(-np.sum(v * v, -1))


def test_time_grid():
    tg = TimeGrid(1.0, 5)
    assert tg.dt == 0.25 and tg.nodes[-1] == 1.0
    assert tg.refine(2).n_t == 9
    with pytest.raises(ValueError):
        TimeGrid(0.0, 3)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1)


def test_advect_identity_and_integer_shift():
    g = grid()
    f = PhaseField(bump(g), g)
    assert advect(f, 0.0) is f
    # v nodes are +-0.5, +-1.5 and h_x = 1, so t = 2 shifts by whole cells
    gv = PhaseGrid(SpatialGrid(4.0, 8), VelocityGrid(2.0, 4))
    vals = np.random.default_rng(5).random(gv.shape)
    out = advect_array(vals[None], [2.0], gv)[0]
    vn = gv.v.nodes
    ref = np.zeros_like(vals)
    for a in range(4):
        for b in range(4):
            for c in range(4):
                s = [int(round(2 * vn[k])) for k in (a, b, c)]
                src = vals[..., a, b, c]
                dst = np.zeros_like(src)
                sl_src = tuple(slice(max(0, -k), 8 - max(0, k)) for k in s)
                sl_dst = tuple(slice(max(0, k), 8 - max(0, -k)) for k in s)
                dst[sl_dst] = src[sl_src]
                ref[..., a, b, c] = dst
    assert np.abs(out - ref).max() < 1e-14


def test_advect_group_property():
    g = grid()
    vals = bump(g)
    a = advect_array(vals[None], [0.3], g)[0]
    ab = advect_array(a[None], [-0.3], g)[0]
    # interpolation is diffusive but keeps the bump centred
    assert np.abs(ab - vals).max() < 0.2 * vals.max()
    assert advect_array(vals[None], [0.0], g)[0].tolist() == vals.tolist()


def test_homogeneous_grid_is_frozen():
    g = PhaseGrid(SpatialGrid(1.0, 1), VelocityGrid(1.0, 4))
    vals = np.random.default_rng(0).random(g.shape)
    assert np.array_equal(advect_array(vals[None], [1.7], g)[0], vals)


def test_backends_agree():
    from kml import _kernels

    if _kernels.compiled_backend is None:
        pytest.skip("compiled extension not built")
    g = grid()
    vals = np.random.default_rng(1).random((3,) + g.shape)
    t = [0.1, -0.4, 0.9]
    a = advect_array(vals, t, g, backend="compiled")
    b = advect_array(vals, t, g, backend="python")
    assert np.abs(a - b).max() < 1e-14


def test_duhamel_constant_source_homogeneous():
    g = PhaseGrid(SpatialGrid(1.0, 1), VelocityGrid(1.0, 4))
    tg = TimeGrid(2.0, 9)
    F = np.ones((tg.n_t,) + g.shape)
    w = duhamel_values(F, tg.nodes, g)
    assert np.allclose(w[:, 0, 0, 0, 0, 0, 0], tg.nodes, atol=1e-14)
    traj = Trajectory(tg.nodes, F, g)
    assert duhamel(traj, 4).values.ravel()[0] == pytest.approx(1.0)
    assert np.all(duhamel(traj, 0).values == 0)
    with pytest.raises(IndexError):
        duhamel(traj, 9)


def test_duhamel_second_order():
    g = PhaseGrid(SpatialGrid(1.0, 1), VelocityGrid(1.0, 4))
    errs = []
    for n in (5, 9, 17):
        tg = TimeGrid(1.0, n)
        F = np.cos(tg.nodes)[:, None, None, None, None, None, None] * np.ones((1,) + g.shape)
        w = duhamel_values(F, tg.nodes, g)
        errs.append(abs(w[-1].ravel()[0] - np.sin(1.0)))
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_damped_propagate_homogeneous_exact():
    g = PhaseGrid(SpatialGrid(1.0, 1), VelocityGrid(1.0, 4))
    tg = TimeGrid(1.0, 11)
    f0 = PhaseField(np.full(g.shape, 2.0), g)
    damp = Trajectory.constant(tg.nodes, PhaseField(np.full(g.shape, 0.7), g))
    out = damped_propagate(f0, None, damp, tg)
    assert np.allclose(out.values[:, 0, 0, 0, 0, 0, 0], 2 * np.exp(-0.7 * tg.nodes), rtol=1e-12)


def test_damping_only_decreases():
    g = grid(n_x=6, n_v=4)
    tg = TimeGrid(1.0, 6)
    rng = np.random.default_rng(2)
    f0 = bump(g)
    src = rng.random((tg.n_t,) + g.shape)
    damp = rng.random((tg.n_t,) + g.shape)
    undamped = propagate_values(f0, src, None, tg.nodes, g)
    damped = propagate_values(f0, src, damp, tg.nodes, g)
    assert np.all(damped <= undamped) and damped.min() >= 0
    with pytest.raises(ValueError):
        propagate_values(f0, src, -damp, tg.nodes, g)


def test_free_trajectory_and_time_checks():
    g = grid(n_x=4, n_v=4)
    tg = TimeGrid(1.0, 3)
    f0 = PhaseField(bump(g), g)
    tr = free_trajectory(f0, tg)
    assert np.array_equal(tr.values[0], f0.values)
    other = Trajectory.constant(TimeGrid(2.0, 3).nodes, f0)
    with pytest.raises(ValueError):
        damped_propagate(f0, other, None, tg)
    with pytest.raises(ValueError):
        duhamel_values(np.ones((3,) + g.shape), np.array([0.0, 0.1, 0.5]), g)
