"""Quadrature evaluation of the gain and loss terms on velocity grids.

For a node pair ``(v_i, v_j)`` the offset ``u = v_i - v_j = (i - j) h`` is a
lattice vector, so the post-collision displacements
``v' - v_i = -(w.u) w`` and ``v'_* - v_i = -u + (w.u) w`` depend only on the
integer offset ``d = i - j`` and the sphere node.  The gain is therefore a
fixed stencil applied at every output node: the stencil is tabulated once
(interpolation base offsets, the eight trilinear corner weights and the
kernel weight) and the hot loop lives in :mod:`kml._kernels`.

The sphere rule for each ``u`` is aligned with ``u`` itself: Gauss-Legendre
in ``cos theta = w.u/|u|`` on ``[0, 1]`` times a uniform azimuth, so the
kernel support ``0 <= theta <= pi/2`` is resolved exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .discretization import (
    PhaseField,
    SphereQuadrature,
    VelocityGrid,
    orthonormal_frame,
    require_same_grid,
)
from .kinematics import KernelSpec, grad_constant

# stencil entries kept in memory at once (about 230 bytes each)
STENCIL_BLOCK = 400_000
# batch columns per cache block in the gain loop
BATCH_CHUNK = 32


@dataclass(frozen=True)
class CollisionConfig:
    kernel: KernelSpec = field(default_factory=lambda: KernelSpec.parse("-1"))
    squad: SphereQuadrature = field(default_factory=SphereQuadrature)
    interpolation: str = "trilinear"
    diagonal_policy: str = "skip"
    eps_reg: float = 0.0

    def __post_init__(self):
        if self.interpolation != "trilinear":
            raise ValueError("only trilinear interpolation is implemented")
        if self.diagonal_policy not in ("skip", "epsilon_shift"):
            raise ValueError(f"unknown diagonal policy {self.diagonal_policy!r}")
        if self.diagonal_policy == "epsilon_shift" and not self.eps_reg > 0:
            raise ValueError("epsilon_shift needs eps_reg > 0")
        if not self.squad.hemisphere:
            raise ValueError("collision quadrature must cover the hemisphere cos(theta) >= 0")

    def check_grid(self, vgrid: VelocityGrid) -> None:
        if self.diagonal_policy == "epsilon_shift" and not self.eps_reg < vgrid.h:
            raise ValueError(f"eps_reg={self.eps_reg} must be below h_v={vgrid.h}")

    def describe(self) -> dict:
        d = dict(self.kernel.to_config())
        d.update(
            n_polar=self.squad.n_polar,
            n_azimuth=self.squad.n_azimuth,
            interpolation=self.interpolation,
            diagonal_policy=self.diagonal_policy,
        )
        if self.diagonal_policy == "epsilon_shift":
            d["eps_reg"] = self.eps_reg
        return d


# -- stencil tables ----------------------------------------------------------------


def _offsets(n: int) -> np.ndarray:
    r = np.arange(-(n - 1), n)
    d = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    return d[np.any(d != 0, axis=1)]


def _corner_weights(fr: np.ndarray) -> np.ndarray:
    """Eight trilinear weights ``prod (fr or 1 - fr)``, corner index ``4 a1 + 2 a2 + a3``."""
    lo, hi = 1.0 - fr, fr
    parts = []
    for a1 in (lo[:, 0], hi[:, 0]):
        for a2 in (lo[:, 1], hi[:, 1]):
            for a3 in (lo[:, 2], hi[:, 2]):
                parts.append(a1 * a2 * a3)
    return np.stack(parts, axis=-1)


def _stencil_block(d: np.ndarray, n: int, h: float, cfg: CollisionConfig):
    """Entries for the integer offsets ``d`` (shape ``(D, 3)``)."""
    c, phi, wq = cfg.squad.rule()
    bc = cfg.kernel.angular(c)
    dn = np.linalg.norm(d, axis=1)
    uhat = d / dn[:, None]
    e1, e2 = orthonormal_frame(uhat)
    s = np.sqrt(np.clip(1.0 - c * c, 0.0, None))
    # omega[D, K, 3]
    omega = (c[None, :, None] * uhat[:, None, :]
             + (s * np.cos(phi))[None, :, None] * e1[:, None, :]
             + (s * np.sin(phi))[None, :, None] * e2[:, None, :])
    # displacements in index units
    shift1 = -(c[None, :] * dn[:, None])[..., None] * omega
    shift2 = -d[:, None, :] - shift1
    weight = (h * dn[:, None]) ** cfg.kernel.gamma_f * (bc * wq)[None, :] * h ** 3

    shift1 = shift1.reshape(-1, 3)
    shift2 = shift2.reshape(-1, 3)
    weight = weight.reshape(-1)
    dd = np.repeat(d, c.size, axis=0)
    b1 = np.floor(shift1).astype(np.int64)
    b2 = np.floor(shift2).astype(np.int64)
    fr1 = np.clip(shift1 - b1, 0.0, 1.0)
    fr2 = np.clip(shift2 - b2, 0.0, 1.0)
    lo = np.maximum.reduce([np.zeros_like(dd), dd, -1 - b1, -1 - b2])
    hi = np.minimum.reduce([np.full_like(dd, n - 1), n - 1 + dd, n - 1 - b1, n - 1 - b2])
    keep = np.all(hi >= lo, axis=1) & (weight > 0)
    return (
        np.ascontiguousarray(weight[keep]),
        np.ascontiguousarray(b1[keep] + 1),
        np.ascontiguousarray(b2[keep] + 1),
        np.ascontiguousarray(_corner_weights(fr1[keep])),
        np.ascontiguousarray(_corner_weights(fr2[keep])),
        np.ascontiguousarray(lo[keep]),
        np.ascontiguousarray(hi[keep]),
    )


def stencil_blocks(vgrid: VelocityGrid, cfg: CollisionConfig):
    """Yield stencil tables in blocks of at most ``STENCIL_BLOCK`` entries."""
    d = _offsets(vgrid.n)
    per = max(1, STENCIL_BLOCK // cfg.squad.n_polar // cfg.squad.n_azimuth)
    for start in range(0, d.shape[0], per):
        yield _stencil_block(d[start:start + per], vgrid.n, vgrid.h, cfg)


@lru_cache(maxsize=8)
def _cached_stencil(vgrid: VelocityGrid, cfg: CollisionConfig):
    return list(stencil_blocks(vgrid, cfg))


def _stencil(vgrid: VelocityGrid, cfg: CollisionConfig):
    n_entries = (2 * vgrid.n - 1) ** 3 * cfg.squad.n_polar * cfg.squad.n_azimuth
    if n_entries <= 2 * STENCIL_BLOCK:
        return _cached_stencil(vgrid, cfg)
    return stencil_blocks(vgrid, cfg)


def stencil_size(vgrid: VelocityGrid, cfg: CollisionConfig) -> int:
    return sum(b[0].size for b in _stencil(vgrid, cfg))


# -- array level operators -----------------------------------------------------------


def _as_batch(a: np.ndarray, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.shape[-3:] != (n, n, n):
        raise ValueError(f"trailing axes {a.shape[-3:]} do not match velocity grid n={n}")
    return a.reshape(-1, n, n, n)


def _padded_chunks(a: np.ndarray, chunk: int):
    """Split ``(B, n, n, n)`` into zero-padded ``(n+2, n+2, n+2, b)`` blocks."""
    out = []
    for s in range(0, a.shape[0], chunk):
        blk = np.moveaxis(a[s:s + chunk], 0, -1)
        out.append(np.ascontiguousarray(np.pad(blk, ((1, 1),) * 3 + ((0, 0),))))
    return out


def gain_array(f: np.ndarray, g: np.ndarray, vgrid: VelocityGrid, cfg: CollisionConfig,
               backend=None) -> np.ndarray:
    """Gain term for arrays whose last three axes are the velocity grid."""
    cfg.check_grid(vgrid)
    if np.shape(f) != np.shape(g):
        raise ValueError("gain operands must have the same shape")
    shape = np.shape(f)
    n = vgrid.n
    fb, gb = _as_batch(f, n), _as_batch(g, n)
    kern = _kernels.get_backend(backend)
    fch = _padded_chunks(fb, BATCH_CHUNK)
    gch = fch if g is f else _padded_chunks(gb, BATCH_CHUNK)
    outs = [np.zeros((n, n, n, c.shape[-1])) for c in fch]
    for w, o1, o2, c1, c2, lo, hi in _stencil(vgrid, cfg):
        for F, G, O in zip(fch, gch, outs):
            kern.gain_accumulate(F, G, w, o1, o2, c1, c2, lo, hi, O)
    res = np.moveaxis(np.concatenate(outs, axis=-1), -1, 0)
    diag = _diagonal_weight(vgrid, cfg)
    if diag:
        # u = 0: v' = v'_* = v, the sphere integral gives grad_constant
        res = res + grad_constant(cfg.kernel) * diag * fb * gb
    return res.reshape(shape)


def _diagonal_weight(vgrid: VelocityGrid, cfg: CollisionConfig) -> float:
    """Weight of the ``v_* = v`` node: ``h^3`` when gamma = 0 (no singularity), else per policy."""
    if cfg.kernel.gamma == 0:
        return vgrid.cell_volume
    if cfg.diagonal_policy == "epsilon_shift":
        return cfg.eps_reg ** cfg.kernel.gamma_f * vgrid.cell_volume
    return 0.0


@lru_cache(maxsize=8)
def _potential_matrix(n: int, h: float, gamma: float, diag: float) -> np.ndarray:
    idx = np.stack(np.meshgrid(*(np.arange(n),) * 3, indexing="ij"), axis=-1).reshape(-1, 3)
    dist = np.linalg.norm(idx[:, None, :] - idx[None, :, :], axis=-1) * h
    with np.errstate(divide="ignore"):
        m = np.where(dist > 0, dist, 1.0) ** gamma * h ** 3
    np.fill_diagonal(m, diag)
    m.setflags(write=False)
    return m


MATRIX_LIMIT = 4096


def potential_array(g: np.ndarray, vgrid: VelocityGrid, gamma: float, diag: float = 0.0,
                    backend=None) -> np.ndarray:
    """``sum_{j != i} g_j |v_i - v_j|^gamma h^3`` plus ``diag * g_i``."""
    shape = np.shape(g)
    n = vgrid.n
    gb = _as_batch(g, n)
    if n ** 3 <= MATRIX_LIMIT and backend is None:
        m = _potential_matrix(n, vgrid.h, float(gamma), float(diag))
        return (gb.reshape(gb.shape[0], -1) @ m.T).reshape(shape)
    kern = _kernels.get_backend(backend)
    d = _offsets(n)
    k = (np.linalg.norm(d, axis=1) * vgrid.h) ** float(gamma) * vgrid.cell_volume
    G = np.ascontiguousarray(np.moveaxis(gb, 0, -1))
    out = np.zeros_like(G)
    kern.convolve_accumulate(G, np.ascontiguousarray(k), np.ascontiguousarray(d), out)
    res = np.moveaxis(out, -1, 0) + diag * gb
    return res.reshape(shape)


def loss_rate_array(g: np.ndarray, vgrid: VelocityGrid, cfg: CollisionConfig, backend=None) -> np.ndarray:
    cfg.check_grid(vgrid)
    diag = _diagonal_weight(vgrid, cfg)
    return grad_constant(cfg.kernel) * potential_array(g, vgrid, cfg.kernel.gamma_f, diag, backend)


def loss_rate_at(g: np.ndarray, vgrid: VelocityGrid, cfg: CollisionConfig, v) -> np.ndarray:
    """Discrete ``L(g)`` at an arbitrary velocity ``v`` (nodes closer than ``1e-12`` are skipped).

    ``v = 0`` is never a node of the cell-centred grid, so no diagonal rule is
    involved there.
    """
    p = vgrid.points() - np.asarray(v, dtype=float)
    d = np.sqrt(np.sum(p * p, axis=-1))
    with np.errstate(divide="ignore"):
        k = np.where(d > 1e-12, np.where(d > 1e-12, d, 1.0) ** cfg.kernel.gamma_f, 0.0)
    if cfg.kernel.gamma == 0:
        k = np.ones_like(d)
    return grad_constant(cfg.kernel) * np.sum(np.asarray(g) * k, axis=(-3, -2, -1)) * vgrid.cell_volume


# -- field level API ------------------------------------------------------------------


def gain(f: PhaseField, g: PhaseField, cfg: CollisionConfig, backend=None) -> PhaseField:
    grid = require_same_grid(f, g)
    return PhaseField(gain_array(f.values, g.values if g is not f else f.values, grid.v, cfg, backend), grid)


def loss_rate(g: PhaseField, cfg: CollisionConfig, backend=None) -> PhaseField:
    return PhaseField(loss_rate_array(g.values, g.grid.v, cfg, backend), g.grid)


def loss(f: PhaseField, g: PhaseField, cfg: CollisionConfig) -> PhaseField:
    """``Q^-(f, g) = f L(g)``."""
    require_same_grid(f, g)
    return PhaseField(f.values * loss_rate_array(g.values, g.grid.v, cfg), f.grid)


def collide(f: PhaseField, cfg: CollisionConfig) -> PhaseField:
    return PhaseField(gain_array(f.values, f.values, f.grid.v, cfg)
                      - f.values * loss_rate_array(f.values, f.grid.v, cfg), f.grid)


def weak_moments(q: np.ndarray, vgrid: VelocityGrid) -> np.ndarray:
    """``int q phi dv`` for ``phi`` in ``(1, v1, v2, v3, |v|^2)``, over the last three axes."""
    p = vgrid.points()
    phis = [np.ones(p.shape[:-1]), p[..., 0], p[..., 1], p[..., 2], np.sum(p * p, axis=-1)]
    return np.stack([np.sum(q * phi, axis=(-3, -2, -1)) * vgrid.cell_volume for phi in phis], axis=-1)


def maxwellian(vgrid: VelocityGrid, mass: float = 1.0, temperature: float = 1.0,
               mean=(0.0, 0.0, 0.0)) -> np.ndarray:
    p = vgrid.points() - np.asarray(mean)
    return mass * (2 * np.pi * temperature) ** -1.5 * np.exp(-np.sum(p * p, axis=-1) / (2 * temperature))
