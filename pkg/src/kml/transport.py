"""Free transport ``U(t)``, the Duhamel operator ``W(t)`` and the damped propagator.

Advection is exact in ``v`` (velocity is a parameter along characteristics)
and separable linear interpolation in ``x``: the shift along ``x_a`` depends
only on ``v_a``, so three 1-D passes give the trilinear result.  Mass that
leaves the spatial box is lost (zero inflow).  With ``n_x = 1`` the spatial
variable is frozen and advection is the identity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .discretization import PhaseField, PhaseGrid, Trajectory, require_same_grid


@dataclass(frozen=True)
class TimeGrid:
    T_final: float
    n_t: int

    def __post_init__(self):
        if not self.T_final > 0:
            raise ValueError("T_final must be positive")
        if self.n_t < 2:
            raise ValueError("need at least two time nodes")

    @property
    def dt(self) -> float:
        return self.T_final / (self.n_t - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_t) * self.dt

    def refine(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.T_final, (self.n_t - 1) * factor + 1)


def advect_array(values: np.ndarray, times, grid: PhaseGrid, backend=None) -> np.ndarray:
    """Advect a stack ``(M, *grid.shape)`` by per-item times ``times`` (shape ``(M,)``).

    Negative times run the characteristics backwards, ``U(-t)``.
    """
    values = np.asarray(values, dtype=np.float64)
    times = np.broadcast_to(np.asarray(times, dtype=float), values.shape[:1])
    if grid.x.homogeneous or not np.any(times):
        return values.copy()
    M = values.shape[0]
    X3, V3 = grid.x.n ** 3, grid.v.n ** 3
    # per (m, v-node, axis): source position i - t v_a / h_x
    shift = times[:, None, None] * grid.v.points().reshape(1, V3, 3) / grid.x.h
    pos = -shift.reshape(M * V3, 3)
    base = np.floor(pos)
    fr = np.ascontiguousarray(pos - base)
    base = np.ascontiguousarray(base.astype(np.int64))
    rows = np.ascontiguousarray(values.reshape(M, X3, V3).transpose(0, 2, 1)).reshape(M * V3, X3)
    out = np.empty_like(rows)
    _kernels.get_backend(backend).advect_blocks(rows, base, fr, out)
    return np.ascontiguousarray(out.reshape(M, V3, X3).transpose(0, 2, 1)).reshape(values.shape)


def advect(f: PhaseField, t: float) -> PhaseField:
    """``U(t) f (x, v) = f(x - v t, v)``; ``t = 0`` returns the input unchanged."""
    if t == 0:
        return f
    return PhaseField(advect_array(f.values[None], [t], f.grid)[0], f.grid)


def _uniform_dt(times: np.ndarray) -> float:
    dt = np.diff(times)
    if dt.size and not np.allclose(dt, dt[0], rtol=1e-12, atol=0.0):
        raise ValueError("Duhamel quadrature requires uniform time nodes")
    return float(dt[0]) if dt.size else 0.0


def _trapz_row(n: int, dt: float) -> np.ndarray:
    """Trapezoid weights over nodes ``0..n`` with step ``dt``."""
    w = np.full(n + 1, dt)
    if n == 0:
        return np.zeros(1)
    w[0] = w[-1] = 0.5 * dt
    return w


def _lagged(stack: np.ndarray, n: int, dt: float, grid: PhaseGrid) -> np.ndarray:
    """``U((n - m) dt) stack[m]`` for ``m = 0..n``."""
    lags = (n - np.arange(n + 1)) * dt
    return advect_array(stack[: n + 1], lags, grid)


def _propagate_values(f0: np.ndarray | None, source: np.ndarray | None, damping: np.ndarray | None,
                      times: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    n_t = times.size
    dt = _uniform_dt(times)
    out = np.zeros((n_t,) + grid.shape)
    free = None
    if f0 is not None:
        free = advect_array(np.broadcast_to(f0, (n_t,) + grid.shape), times, grid)
    for n in range(n_t):
        w = _trapz_row(n, dt)
        if damping is not None:
            dl = _lagged(damping, n, dt, grid)
            # Lambda(t_n, t_m) = int_{t_m}^{t_n} U(t_n - tau) damping(tau) dtau, trapezoid
            half = 0.5 * dt * dl
            csum = np.cumsum((half[1:] + half[:-1])[::-1], axis=0)[::-1]
            lam = np.concatenate([csum, np.zeros((1,) + grid.shape)], axis=0)
            decay = np.exp(-lam)
        acc = np.zeros(grid.shape)
        if source is not None and n > 0:
            sl = _lagged(source, n, dt, grid)
            if damping is not None:
                sl = decay * sl
            acc = np.tensordot(w, sl, axes=(0, 0))
        if free is not None:
            head = free[n] if damping is None else free[n] * decay[0]
            acc = head + acc
        out[n] = acc
    return out


def duhamel_values(F: np.ndarray, times: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """``W(t_n) F`` at every node, returned as ``(n_t, *grid.shape)``."""
    return _propagate_values(None, F, None, np.asarray(times, dtype=float), grid)


def duhamel(F: Trajectory, t_index: int) -> PhaseField:
    """Composite trapezoid over ``s`` of ``U(t - s) F(s)``."""
    if not 0 <= t_index < len(F):
        raise IndexError(f"t_index {t_index} outside 0..{len(F) - 1}")
    n = t_index
    dt = _uniform_dt(F.times[: n + 1]) if n > 0 else 0.0
    if n == 0:
        return PhaseField.zeros(F.grid)
    sl = _lagged(F.values, n, dt, F.grid)
    return PhaseField(np.tensordot(_trapz_row(n, dt), sl, axes=(0, 0)), F.grid)


def free_trajectory(f0: PhaseField, tg: TimeGrid) -> Trajectory:
    """``U(t_k) f0`` at every node."""
    times = tg.nodes
    vals = advect_array(np.broadcast_to(f0.values, (times.size,) + f0.grid.shape), times, f0.grid)
    return Trajectory(times, vals, f0.grid)


def propagate_values(f0: np.ndarray, source: np.ndarray | None, damping: np.ndarray | None,
                     times: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """Array form of :func:`damped_propagate`; ``damping=None`` gives ``U f0 + W source``.

    Both forms share one summation order, so the damped result is bounded by
    the undamped one node by node in floating point as well.
    """
    if damping is not None and np.min(damping) < 0:
        raise ValueError("damping must be non-negative")
    return _propagate_values(f0, source, damping, np.asarray(times, dtype=float), grid)


def damped_propagate(f0: PhaseField, source: Trajectory | None, damping: Trajectory | None,
                     tg: TimeGrid) -> Trajectory:
    """Mild solution of ``d_t f + v.grad_x f + damping f = source``, ``f(0) = f0``.

    ``out(t) = U(t) f0 exp(-Lambda(t, 0)) + int_0^t exp(-Lambda(t, s)) U(t - s) source(s) ds``
    with ``Lambda(t, s) = int_s^t U(t - tau) damping(tau) dtau`` along characteristics.
    """
    times = tg.nodes
    parts = [f0] + [tr for tr in (source, damping) if tr is not None]
    require_same_grid(*parts)
    for tr in parts[1:]:
        if tr.times.size != times.size or not np.allclose(tr.times, times, rtol=1e-12, atol=1e-14):
            raise ValueError("source/damping trajectories do not match the time grid")
    vals = propagate_values(
        f0.values,
        None if source is None else source.values,
        None if damping is None else damping.values,
        times,
        f0.grid,
    )
    return Trajectory(times, vals, f0.grid)
