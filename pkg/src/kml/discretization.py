"""Truncated phase-space grids, sphere quadrature, fields and mixed norms.

Fields live on cell-centred uniform grids ``[-X, X]^3 x [-V, V]^3`` and are
taken to vanish outside the box.  Values are stored as a 6-D array indexed
``(x1, x2, x3, v1, v2, v3)``; trajectories add a leading time axis.
"""
from __future__ import annotations

import csv
import struct
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .exponents import Triplet


class ResolutionWarning(UserWarning):
    """A sampled field varies too fast for the grid."""


class GridMismatchError(ValueError):
    pass


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class VelocityGrid:
    V: float
    n: int

    def __post_init__(self):
        if not self.V > 0:
            raise ValueError("velocity half extent must be positive")
        if self.n < 4 or self.n % 2:
            raise ValueError("points per velocity axis must be even and >= 4")

    @property
    def h(self) -> float:
        return 2.0 * self.V / self.n

    @property
    def nodes(self) -> np.ndarray:
        return -self.V + (np.arange(self.n) + 0.5) * self.h

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    def points(self) -> np.ndarray:
        """All nodes, shape ``(n, n, n, 3)``."""
        a = self.nodes
        return np.stack(np.meshgrid(a, a, a, indexing="ij"), axis=-1)

    def bracket(self, ell: float) -> np.ndarray:
        """``<v>^ell = (1 + |v|^2)^(ell/2)`` on the nodes, shape ``(n, n, n)``."""
        p = self.points()
        return (1.0 + np.sum(p * p, axis=-1)) ** (0.5 * ell)


@dataclass(frozen=True)
class SpatialGrid:
    """``n = 1`` is the spatially homogeneous mode: a single cell of side ``2X``."""

    X: float
    n: int

    def __post_init__(self):
        if not self.X > 0:
            raise ValueError("spatial half extent must be positive")
        if self.n < 1:
            raise ValueError("points per spatial axis must be >= 1")

    @property
    def homogeneous(self) -> bool:
        return self.n == 1

    @property
    def h(self) -> float:
        return 2.0 * self.X / self.n

    @property
    def nodes(self) -> np.ndarray:
        return -self.X + (np.arange(self.n) + 0.5) * self.h

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    def points(self) -> np.ndarray:
        a = self.nodes
        return np.stack(np.meshgrid(a, a, a, indexing="ij"), axis=-1)


@dataclass(frozen=True)
class PhaseGrid:
    x: SpatialGrid
    v: VelocityGrid

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.x.n,) * 3 + (self.v.n,) * 3

    def describe(self) -> dict:
        return {"X": self.x.X, "n_x": self.x.n, "V": self.v.V, "n_v": self.v.n}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


class PhaseField:
    """Sampled ``f(x, v)``; the value array is read-only once built."""

    __slots__ = ("values", "grid", "_min")

    def __init__(self, values: np.ndarray, grid: PhaseGrid):
        values = np.asarray(values, dtype=np.float64)
        if values.size != int(np.prod(grid.shape)):
            raise GridMismatchError(f"{values.size} values for grid shape {grid.shape}")
        values = values.reshape(grid.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains NaN or Inf")
        self.values = _frozen(values)
        self.grid = grid
        self._min = None

    @classmethod
    def zeros(cls, grid: PhaseGrid) -> "PhaseField":
        return cls(np.zeros(grid.shape), grid)

    @property
    def min_value(self) -> float:
        if self._min is None:
            self._min = float(self.values.min())
        return self._min

    def flat(self) -> np.ndarray:
        """View of shape ``(n_x^3, n_v^3)``."""
        return self.values.reshape(self.grid.x.n ** 3, self.grid.v.n ** 3)

    def with_values(self, values: np.ndarray) -> "PhaseField":
        return PhaseField(values, self.grid)

    def __add__(self, other: "PhaseField") -> "PhaseField":
        require_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "PhaseField") -> "PhaseField":
        require_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c: float) -> "PhaseField":
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def mass(self) -> float:
        return float(self.values.sum()) * self.grid.x.cell_volume * self.grid.v.cell_volume


def require_same_grid(*fields) -> PhaseGrid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError("fields live on different grids")
    return grid


def sample(closed_form: Callable, grid: PhaseGrid, jump_threshold: float = 0.5) -> PhaseField:
    """Evaluate ``closed_form(x, v)`` at cell centres.

    ``x`` and ``v`` are passed as broadcastable arrays of shape
    ``(n_x, n_x, n_x, 1, 1, 1, 3)`` and ``(1, 1, 1, n_v, n_v, n_v, 3)``.
    """
    x = grid.x.points().reshape(grid.x.n, grid.x.n, grid.x.n, 1, 1, 1, 3)
    v = grid.v.points().reshape(1, 1, 1, grid.v.n, grid.v.n, grid.v.n, 3)
    with np.errstate(all="ignore"):
        vals = np.broadcast_to(np.asarray(closed_form(x, v), dtype=float), grid.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError("closed form produced NaN or Inf on the grid")
    peak = np.abs(vals).max()
    if peak > 0:
        jump = max(
            (np.abs(np.diff(vals, axis=ax)).max() for ax in range(6) if vals.shape[ax] > 1),
            default=0.0,
        )
        if jump > jump_threshold * peak:
            warnings.warn(
                f"field changes by {jump / peak:.2f} of its peak between neighbouring cells",
                ResolutionWarning,
                stacklevel=2,
            )
    return PhaseField(np.array(vals), grid)


# -- sphere quadrature ---------------------------------------------------------


@dataclass(frozen=True)
class SphereQuadrature:
    """Product rule: Gauss-Legendre in ``cos theta`` times periodic trapezoid in azimuth.

    With ``hemisphere=True`` the polar rule covers ``cos theta in [0, 1]``
    (weights sum to ``2 pi``); otherwise ``[-1, 1]`` (weights sum to ``4 pi``).
    Nodes are given in a reference frame whose pole is ``e_z``.
    """

    n_polar: int = 8
    n_azimuth: int = 16
    hemisphere: bool = True

    def __post_init__(self):
        if self.n_polar < 1 or self.n_azimuth < 1:
            raise ValueError("sphere quadrature needs at least one node per direction")

    @property
    def order(self) -> int:
        return min(2 * self.n_polar - 1, self.n_azimuth - 1)

    def polar(self) -> tuple[np.ndarray, np.ndarray]:
        x, w = np.polynomial.legendre.leggauss(self.n_polar)
        if self.hemisphere:
            return 0.5 * (x + 1.0), 0.5 * w
        return x, w

    def azimuth(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_azimuth) / self.n_azimuth

    def rule(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flattened ``(cos theta, phi, weight)`` arrays of length ``n_polar * n_azimuth``."""
        c, wc = self.polar()
        phi = self.azimuth()
        cc, pp = np.meshgrid(c, phi, indexing="ij")
        ww = np.outer(wc, np.full(self.n_azimuth, 2.0 * np.pi / self.n_azimuth))
        return cc.ravel(), pp.ravel(), ww.ravel()

    @property
    def nodes(self) -> np.ndarray:
        c, phi, _ = self.rule()
        s = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
        return np.stack([s * np.cos(phi), s * np.sin(phi), c], axis=-1)

    @property
    def weights(self) -> np.ndarray:
        return self.rule()[2]

    def integrate(self, func: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.sum(self.weights * func(self.nodes)))


def orthonormal_frame(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two unit vectors completing unit ``axis`` (..., 3) to a right-handed frame."""
    x, y, z = axis[..., 0], axis[..., 1], axis[..., 2]
    sign = np.where(z >= 0.0, 1.0, -1.0)
    a = -1.0 / (sign + z)
    b = x * y * a
    e1 = np.stack([1.0 + sign * x * x * a, sign * b, -sign * x], axis=-1)
    e2 = np.stack([b, sign + y * y * a, -y], axis=-1)
    return e1, e2


# -- norms -----------------------------------------------------------------------


def _inv(p_inv) -> float:
    return float(Fraction(p_inv)) if not isinstance(p_inv, float) else p_inv


def lp_sum(values: np.ndarray, p_inv, measure: float, axes) -> np.ndarray:
    """Discrete ``L^p`` over ``axes`` with cell ``measure``; ``p_inv = 0`` is the max."""
    pi = _inv(p_inv)
    a = np.abs(values)
    if pi == 0.0:
        return a.max(axis=axes)
    p = 1.0 / pi
    if p == 1.0:
        return a.sum(axis=axes) * measure
    m = a.max(axis=axes, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    s = np.sum((a / safe) ** p, axis=axes) * measure
    return np.squeeze(safe, axis=axes) * s ** pi


def velocity_norm(f_slice: np.ndarray, p_inv, ell: float, vgrid: VelocityGrid) -> float:
    """``(sum_j |<v_j>^ell f_j|^p h_v^3)^(1/p)`` for one spatial cell."""
    f_slice = np.asarray(f_slice, dtype=float).reshape((vgrid.n,) * 3)
    if ell:
        f_slice = f_slice * vgrid.bracket(ell)
    return float(lp_sum(f_slice, p_inv, vgrid.cell_volume, axes=(0, 1, 2)))


def phase_norm(values: np.ndarray, grid: PhaseGrid, r_inv, p_inv, ell: float = 0.0) -> np.ndarray:
    """``L^r_x L^p_v`` of ``values`` shaped ``(..., n_x^3 dims, n_v^3 dims)``."""
    if ell:
        values = values * grid.v.bracket(ell)
    inner = lp_sum(values, p_inv, grid.v.cell_volume, axes=(-3, -2, -1))
    return lp_sum(inner, r_inv, grid.x.cell_volume, axes=(-3, -2, -1))


def lebesgue_norm(field: PhaseField, a_inv, ell: float = 0.0) -> float:
    """``L^a_{x,v}`` norm of ``<v>^ell f``."""
    return float(phase_norm(field.values, field.grid, a_inv, a_inv, ell))


def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.size == 1:
        return np.zeros(1)
    dt = np.diff(times)
    w = np.zeros_like(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def time_norm(series: np.ndarray, times: np.ndarray, q_inv) -> float:
    """Composite-trapezoid ``L^q_t`` of a non-negative sampled series."""
    qi = _inv(q_inv)
    series = np.asarray(series, dtype=float)
    if qi == 0.0:
        return float(series.max())
    w = trapezoid_weights(times)
    return float(np.sum(w * series ** (1.0 / qi)) ** qi)


@dataclass(frozen=True)
class NormSpec:
    triplet: Triplet
    ell: float = 0.0
    time_window: tuple[float, float] | None = None

    def __post_init__(self):
        if self.ell < 0:
            raise ValueError("weight exponent must be non-negative")

    def describe(self) -> dict:
        d = {"triplet": self.triplet.as_strings(), "ell": self.ell}
        if self.time_window is not None:
            d["time_window"] = list(self.time_window)
        return d


class Trajectory:
    """Fields at the nodes of a time grid, stored as one array ``(n_t, *grid.shape)``."""

    def __init__(self, times: Sequence[float], values: np.ndarray, grid: PhaseGrid, norm_history=None):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (times.size,) + grid.shape:
            raise GridMismatchError(f"trajectory shape {values.shape} vs {(times.size,) + grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("trajectory contains NaN or Inf")
        self.times = _frozen(times)
        self.values = _frozen(values)
        self.grid = grid
        self.norm_history = dict(norm_history or {})

    @classmethod
    def from_fields(cls, times, fields: Iterable[PhaseField]) -> "Trajectory":
        fields = list(fields)
        grid = require_same_grid(*fields)
        return cls(times, np.stack([f.values for f in fields]), grid)

    @classmethod
    def constant(cls, times, field: PhaseField) -> "Trajectory":
        vals = np.broadcast_to(field.values, (len(times),) + field.grid.shape)
        return cls(times, np.array(vals), field.grid)

    def __len__(self) -> int:
        return self.times.size

    def __getitem__(self, k: int) -> PhaseField:
        return PhaseField(self.values[k], self.grid)

    @property
    def fields(self) -> list[PhaseField]:
        return [self[k] for k in range(len(self))]

    @property
    def min_value(self) -> float:
        return float(self.values.min())

    def with_values(self, values: np.ndarray) -> "Trajectory":
        return Trajectory(self.times, values, self.grid)


def _window_slice(times: np.ndarray, window) -> slice:
    if window is None:
        return slice(0, times.size)
    t0, t1 = window
    tol = 1e-12 * max(1.0, abs(times[-1]))
    i0 = np.flatnonzero(np.abs(times - t0) <= tol)
    i1 = np.flatnonzero(np.abs(times - t1) <= tol)
    if i0.size == 0 or i1.size == 0 or i1[0] < i0[0]:
        raise WindowError(f"window {window} does not match trajectory nodes [{times[0]}, {times[-1]}]")
    return slice(int(i0[0]), int(i1[0]) + 1)


def mixed_norm_values(values: np.ndarray, times: np.ndarray, grid: PhaseGrid, spec: NormSpec) -> float:
    sl = _window_slice(times, spec.time_window)
    t = spec.triplet
    per_time = phase_norm(values[sl], grid, t.r_inv, t.p_inv, spec.ell)
    return time_norm(per_time, times[sl], t.q_inv)


def mixed_norm(traj: Trajectory, spec: NormSpec) -> float:
    """Nested discrete ``L^q_t L^r_x L^p_v`` norm of ``<v>^ell f``."""
    return mixed_norm_values(traj.values, traj.times, traj.grid, spec)


# -- file formats ------------------------------------------------------------------

MAGIC = b"KMLF"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIII dd 32x")
assert HEADER.size == 64


def write_field(path, field: PhaseField) -> None:
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, FORMAT_VERSION, g.x.n, g.v.n, g.x.X, g.v.V))
        fh.write(field.values.astype("<f8", copy=False).tobytes(order="C"))


def read_field(path) -> PhaseField:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n_x, n_v, X, V = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    grid = PhaseGrid(SpatialGrid(X, n_x), VelocityGrid(V, n_v))
    count = n_x ** 3 * n_v ** 3
    if len(raw) != HEADER.size + 8 * count:
        raise ValueError(f"{path}: expected {count} values")
    vals = np.frombuffer(raw, dtype="<f8", offset=HEADER.size, count=count)
    return PhaseField(vals.astype(np.float64), grid)


def write_trajectory(directory, traj: Trajectory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for k in range(len(traj)):
        write_field(d / f"field_{k:04d}.bin", traj[k])
    (d / "times.txt").write_text("".join(f"{t!r}\n" for t in traj.times.tolist()))


def read_trajectory(directory) -> Trajectory:
    d = Path(directory)
    times = [float(s) for s in (d / "times.txt").read_text().split()]
    fields = [read_field(d / f"field_{k:04d}.bin") for k in range(len(times))]
    return Trajectory.from_fields(times, fields)


def write_norm_history(path, rows: Iterable[tuple[float, str, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "norm_name", "value"])
        for t, name, value in rows:
            w.writerow([repr(float(t)), name, repr(float(value))])
