"""Probes for the bilinear collision estimates and the homogeneous Strichartz bound.

Each probe validates its exponent relation exactly before any quadrature,
draws a seeded family of non-negative test functions, evaluates both sides
of the inequality, and reports the empirical constant.  Sample ``i`` depends
only on ``(seed, i)``, so a run with ``2n`` samples extends the run with
``n`` samples.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .collision import CollisionConfig, gain_array, loss_rate_array, potential_array
from .discretization import (
    NormSpec,
    PhaseGrid,
    SpatialGrid,
    SphereQuadrature,
    VelocityGrid,
    lp_sum,
    mixed_norm_values,
    phase_norm,
)
from .exponents import (
    ExponentError,
    Triplet,
    as_rational,
    check_weighted_scaling,
    gain_scaling_holds,
    harmonic_mean,
    hls_relation_holds,
    is_endpoint,
    is_kt_admissible,
    rational_str,
)
from .kinematics import KernelSpec
from .transport import TimeGrid, advect_array

DENOM_FLOOR = 1e-12
EXPLORE_WIDTHS = (0.3, 0.5, 0.8, 1.2, 2.0)
FAMILIES = ("gaussian_mixture", "anisotropic_gaussian", "polynomial_times_gaussian")


class PreconditionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FunctionFamily:
    kind: str = "gaussian_mixture"
    sample_count: int = 200
    seed: int = 0
    width_range: tuple = (0.3, 2.0)
    components: tuple = (1, 4)

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown family {self.kind!r}")
        if self.sample_count < 1:
            raise ValueError("need at least one sample")

    def rngs(self, count=None):
        ss = np.random.SeedSequence(self.seed)
        return [np.random.default_rng(s) for s in ss.spawn(count or self.sample_count)]

    def draw(self, rng, points: np.ndarray, half_extent: float) -> np.ndarray:
        """One non-negative sample on ``points`` (``(..., 3)``)."""
        lo, hi = self.width_range
        k = int(rng.integers(self.components[0], self.components[1] + 1))
        out = np.zeros(points.shape[:-1])
        for _ in range(k):
            c = rng.uniform(-half_extent / 2, half_extent / 2, size=3)
            wgt = rng.uniform(0.5, 1.5)
            if self.kind == "anisotropic_gaussian":
                s = rng.uniform(lo, hi, size=3)
            else:
                s = np.full(3, rng.uniform(lo, hi))
            z = (points - c) / s
            bump = np.exp(-0.5 * np.sum(z * z, axis=-1))
            if self.kind == "polynomial_times_gaussian":
                coef = rng.uniform(0.0, 1.0, size=3)
                bump = bump * (1.0 + np.sum(coef * z * z, axis=-1))
            out += wgt * bump
        return out


@dataclass
class ProbeReport:
    estimate_id: str
    exponents: dict
    ell: float
    samples: int
    max_ratio: float
    ratio_quantiles: tuple
    violations_of_preconditions: int
    ratios: list = field(default_factory=list, repr=False)
    resolution: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self, with_ratios: bool = True) -> dict:
        d = asdict(self)
        d["ratio_quantiles"] = list(self.ratio_quantiles)
        if not with_ratios:
            d.pop("ratios")
        return d

    def histogram(self, bins: int = 20):
        r = np.asarray(self.ratios)
        if r.size == 0:
            return np.zeros(bins, dtype=int), np.linspace(0.0, 1.0, bins + 1)
        return np.histogram(r, bins=bins)


def _report(estimate_id, exponents, ell, ratios, excluded, resolution, notes=()):
    r = np.sort(np.asarray(ratios, dtype=float))
    if r.size:
        mx, q = float(r[-1]), (float(np.quantile(r, 0.5)), float(np.quantile(r, 0.95)))
    else:
        mx, q = 0.0, (0.0, 0.0)
    return ProbeReport(estimate_id, {k: rational_str(as_rational(v)) for k, v in exponents.items()},
                       float(ell), int(r.size + excluded), mx, q, int(excluded), r.tolist(), resolution, list(notes))


@dataclass(frozen=True)
class ProbeGrid:
    """Velocity grid and sphere rule used by the bilinear probes."""

    V: float = 4.5
    n_v: int = 12
    squad: SphereQuadrature = field(default_factory=lambda: SphereQuadrature(2, 4))

    @property
    def vgrid(self) -> VelocityGrid:
        return VelocityGrid(self.V, self.n_v)

    def describe(self) -> dict:
        return {"V": self.V, "n_v": self.n_v, "n_x": 1, "n_polar": self.squad.n_polar,
                "n_azimuth": self.squad.n_azimuth}


def _draw_pairs(family: FunctionFamily, vgrid: VelocityGrid, count=None):
    pts = vgrid.points()
    fs, gs = [], []
    for rng in family.rngs(count):
        fs.append(family.draw(rng, pts, vgrid.V))
        gs.append(family.draw(rng, pts, vgrid.V))
    return np.array(fs), np.array(gs)


def _vnorm(a: np.ndarray, p_inv, vgrid: VelocityGrid, ell: float = 0.0) -> np.ndarray:
    if ell:
        a = a * vgrid.bracket(ell)
    return lp_sum(a, p_inv, vgrid.cell_volume, axes=(-3, -2, -1))


def _ratios(num: np.ndarray, den: np.ndarray):
    keep = den >= DENOM_FLOOR
    return (num[keep] / den[keep]).tolist(), int((~keep).sum())


def _open_unit(name, x: Fraction):
    if not 0 < x < 1:
        raise ExponentError(f"{name}={rational_str(x)} must lie in (0, 1)")


def probe_gain(gamma, p_inv, q_inv, r_inv, family: FunctionFamily = FunctionFamily(),
               pgrid: ProbeGrid = ProbeGrid(), ell: float = 0.0, pairs=None) -> ProbeReport:
    """``||<v>^l Q+(f,g)||_r / (||<v>^l f||_p ||<v>^l g||_q)`` under ``1/p+1/q = 1+gamma/3+1/r``."""
    gamma, p_inv, q_inv, r_inv = (as_rational(x) for x in (gamma, p_inv, q_inv, r_inv))
    for name, x in (("p_inv", p_inv), ("q_inv", q_inv), ("r_inv", r_inv)):
        _open_unit(name, x)
    if not gain_scaling_holds(p_inv, q_inv, r_inv, gamma, 3):
        raise ExponentError("scaling relation 1/p + 1/q = 1 + gamma/3 + 1/r violated")
    if ell < 0:
        raise ExponentError("ell must be non-negative")
    vg = pgrid.vgrid
    cfg = CollisionConfig(KernelSpec(gamma), pgrid.squad)
    f, g = _draw_pairs(family, vg) if pairs is None else pairs
    q = gain_array(f, g, vg, cfg)
    num = _vnorm(q, r_inv, vg, ell)
    den = _vnorm(f, p_inv, vg, ell) * _vnorm(g, q_inv, vg, ell)
    ratios, excl = _ratios(num, den)
    eid = "gain" if ell == 0 else "gain-weighted"
    return _report(eid, {"gamma": gamma, "p_inv": p_inv, "q_inv": q_inv, "r_inv": r_inv}, ell,
                   ratios, excl, pgrid.describe() | {"family": family.kind, "seed": family.seed})


def probe_gain_weighted(gamma, ell: float, p_inv, q_inv, r_inv, m_inv=None,
                        family: FunctionFamily = FunctionFamily(), pgrid: ProbeGrid = ProbeGrid(),
                        explore: bool = False) -> ProbeReport:
    """Weighted gain bound; with ``m_inv`` the exponents follow the extra-weight relation
    ``1/p + 1/q + 1/m = 1 + gamma/3 + 1/r`` and ``ell > 3/m`` is required.

    ``explore`` lets ``ell <= 3/m`` run with a warning instead of an error.
    """
    if m_inv is None:
        rep = probe_gain(gamma, p_inv, q_inv, r_inv, family, pgrid, ell)
        rep.estimate_id = "gain-weighted"
        return rep
    gamma, p_inv, q_inv, r_inv, m_inv = (as_rational(x) for x in (gamma, p_inv, q_inv, r_inv, m_inv))
    if not check_weighted_scaling(p_inv, q_inv, m_inv, r_inv, gamma, 3, loss_variant=False):
        raise ExponentError("weighted scaling relation or size conditions violated")
    notes = []
    if not ell > 3 * m_inv:
        if not explore:
            raise ExponentError(f"ell={ell} must exceed 3/m={float(3 * m_inv)}")
        warnings.warn(f"ell={ell} is not above 3/m={float(3 * m_inv)}; exploratory run",
                      PreconditionWarning, stacklevel=2)
        notes.append("weight threshold waived")
    elif ell < 3 * m_inv * 1.05:
        warnings.warn(f"ell={ell} is within 5% of the threshold 3/m", PreconditionWarning, stacklevel=2)
        notes.append("ell near threshold")
    vg = pgrid.vgrid
    cfg = CollisionConfig(KernelSpec(gamma), pgrid.squad)
    f, g = _draw_pairs(family, vg)
    q = gain_array(f, g, vg, cfg)
    num = _vnorm(q, r_inv, vg, ell)
    den = _vnorm(f, p_inv, vg, ell) * _vnorm(g, q_inv, vg, ell)
    ratios, excl = _ratios(num, den)
    return _report("gain-weighted", {"gamma": gamma, "p_inv": p_inv, "q_inv": q_inv, "m_inv": m_inv,
                                     "r_inv": r_inv}, ell, ratios, excl,
                   pgrid.describe() | {"family": family.kind, "seed": family.seed}, notes)


def probe_loss(gamma, ell: float, p_inv, q_inv, m_inv, r_inv, family: FunctionFamily = FunctionFamily(),
               pgrid: ProbeGrid = ProbeGrid(), explore: bool = False, single_weight: bool = False) -> ProbeReport:
    """``||<v>^l f L(g)||_r / (||<v>^l f||_p ||<v>^l g||_q)``.

    ``single_weight`` drops the weight on ``g`` and measures it in ``L^{a2}``
    with ``1/a2 = 1/q + 1/m``.  ``explore`` waives ``1/p < 1/r`` and the
    other size conditions; the relation itself is still enforced.
    """
    gamma, p_inv, q_inv, m_inv, r_inv = (as_rational(x) for x in (gamma, p_inv, q_inv, m_inv, r_inv))
    for name, x in (("p_inv", p_inv), ("q_inv", q_inv), ("m_inv", m_inv), ("r_inv", r_inv)):
        _open_unit(name, x)
    if not gamma < 0:
        raise ExponentError("loss estimate needs gamma < 0")
    if p_inv + q_inv + m_inv != 1 + gamma / 3 + r_inv:
        raise ExponentError("scaling relation 1/p + 1/q + 1/m = 1 + gamma/3 + 1/r violated")
    notes = []
    if not check_weighted_scaling(p_inv, q_inv, m_inv, r_inv, gamma, 3, loss_variant=True):
        if not explore:
            raise ExponentError("size conditions violated (need 1/p < 1/r and 1/q + 1/m < 1)")
        notes.append("size conditions waived")
    if not ell > 3 * m_inv:
        if not explore:
            raise ExponentError(f"ell={ell} must exceed 3/m={float(3 * m_inv)}")
        notes.append("weight threshold waived")
    vg = pgrid.vgrid
    cfg = CollisionConfig(KernelSpec(gamma), pgrid.squad)
    f, g = _draw_pairs(family, vg)
    q = f * loss_rate_array(g, vg, cfg)
    num = _vnorm(q, r_inv, vg, ell)
    if single_weight:
        den = _vnorm(f, p_inv, vg, ell) * _vnorm(g, q_inv + m_inv, vg, 0.0)
    else:
        den = _vnorm(f, p_inv, vg, ell) * _vnorm(g, q_inv, vg, ell)
    ratios, excl = _ratios(num, den)
    eid = "loss-single-weight" if single_weight else "loss"
    rep = _report(eid, {"gamma": gamma, "p_inv": p_inv, "q_inv": q_inv, "m_inv": m_inv, "r_inv": r_inv},
                  ell, ratios, excl, pgrid.describe() | {"family": family.kind, "seed": family.seed}, notes)
    if explore:
        def ratio_of(w):
            fw = np.exp(-0.5 * np.sum(vg.points() ** 2, axis=-1) / w ** 2)[None]
            nq = _vnorm(fw * loss_rate_array(fw, vg, cfg), r_inv, vg, ell)
            dg = _vnorm(fw, q_inv + m_inv, vg) if single_weight else _vnorm(fw, q_inv, vg, ell)
            return float(nq[0] / (_vnorm(fw, p_inv, vg, ell)[0] * dg[0]))

        # ratio growth as the support widens, in place of a boundedness verdict
        rep.extras["support_growth"] = {"widths": list(EXPLORE_WIDTHS),
                                        "ratios": [ratio_of(w) for w in EXPLORE_WIDTHS]}
    return rep


def probe_hls(gamma, a1_inv, a2_inv, family: FunctionFamily = FunctionFamily(),
              pgrid: ProbeGrid = ProbeGrid(), pairs=None) -> ProbeReport:
    """``|sum f(x)|x-y|^gamma g(y)| / (||f||_{a1} ||g||_{a2})`` in three dimensions."""
    gamma, a1_inv, a2_inv = (as_rational(x) for x in (gamma, a1_inv, a2_inv))
    _open_unit("a1_inv", a1_inv)
    _open_unit("a2_inv", a2_inv)
    if not -3 < gamma < 0:
        raise ExponentError("HLS needs -3 < gamma < 0")
    if not hls_relation_holds(a1_inv, a2_inv, gamma, 3):
        raise ExponentError("relation 1/a1 + 1/a2 = 2 + gamma/3 violated")
    vg = pgrid.vgrid
    f, g = _draw_pairs(family, vg) if pairs is None else pairs
    conv = potential_array(g, vg, float(gamma))
    num = np.abs(np.sum(f * conv, axis=(-3, -2, -1)) * vg.cell_volume)
    den = _vnorm(f, a1_inv, vg) * _vnorm(g, a2_inv, vg)
    ratios, excl = _ratios(num, den)
    return _report("hls", {"gamma": gamma, "a1_inv": a1_inv, "a2_inv": a2_inv}, 0.0, ratios, excl,
                   pgrid.describe() | {"family": family.kind, "seed": family.seed})


@dataclass(frozen=True)
class StrichartzGrid:
    X: float = 4.0
    n_x: int = 8
    V: float = 3.0
    n_v: int = 8

    @property
    def grid(self) -> PhaseGrid:
        return PhaseGrid(SpatialGrid(self.X, self.n_x), VelocityGrid(self.V, self.n_v))


def strichartz_samples(family: FunctionFamily, sgrid: StrichartzGrid, count=None, dilation: float = 1.0):
    """Phase-space samples ``f(x) g(v)`` (spatial factor dilated by ``1/dilation``)."""
    grid = sgrid.grid
    xs, vs = grid.x.points() / dilation, grid.v.points()
    out = []
    for rng in family.rngs(count):
        fx = family.draw(rng, xs, sgrid.X / dilation)
        gv = family.draw(rng, vs, sgrid.V)
        out.append(fx[:, :, :, None, None, None] * gv[None, None, None])
    return np.array(out)


def probe_strichartz(triplet: Triplet, a_inv=None, family: FunctionFamily = FunctionFamily(),
                     tg: TimeGrid = TimeGrid(1.0, 9), sgrid: StrichartzGrid = StrichartzGrid(),
                     samples: np.ndarray | None = None) -> ProbeReport:
    """``||U(t) f0||_{L^q_t L^r_x L^p_v} / ||f0||_{L^a}`` over the window ``[0, T]``."""
    if is_endpoint(triplet, 3):
        raise ExponentError("endpoint triplets are excluded: the endpoint Strichartz estimate fails")
    if not is_kt_admissible(triplet, 3):
        raise ExponentError(f"triplet {triplet.as_strings()} is not KT-admissible")
    hm = harmonic_mean(triplet)
    a_inv = hm if a_inv is None else as_rational(a_inv)
    if a_inv != hm:
        raise ExponentError("data exponent must be the harmonic mean of p and r")
    grid = sgrid.grid
    f0 = strichartz_samples(family, sgrid) if samples is None else samples
    times = tg.nodes
    spec = NormSpec(triplet)
    ratios, excl = [], 0
    for s in f0:
        traj = advect_array(np.broadcast_to(s, (times.size,) + grid.shape), times, grid)
        den = float(phase_norm(s, grid, a_inv, a_inv))
        if den < DENOM_FLOOR:
            excl += 1
            continue
        ratios.append(mixed_norm_values(traj, times, grid, spec) / den)
    ex = dict(zip(("q_inv", "r_inv", "p_inv"), triplet)) | {"a_inv": a_inv}
    res = {"X": sgrid.X, "n_x": sgrid.n_x, "V": sgrid.V, "n_v": sgrid.n_v, "T": tg.T_final, "n_t": tg.n_t,
           "family": family.kind, "seed": family.seed}
    return _report("strichartz", ex, 0.0, ratios, excl, res)


def doubling_check(run, n: int) -> tuple[ProbeReport, ProbeReport, float]:
    """Run a probe at ``n`` and ``2n`` samples; returns both reports and the max-ratio growth."""
    small = run(n)
    big = run(2 * n)
    growth = big.max_ratio / small.max_ratio if small.max_ratio > 0 else np.inf
    return small, big, growth


def dilation_drift(gamma, p_inv, q_inv, r_inv, lambdas=(0.5, 1.0, 2.0), pgrid: ProbeGrid = ProbeGrid(),
                   width: float = 1.0) -> dict:
    """Gain ratio for ``f(lam v), g(lam v)`` with Gaussian ``f = g``; relative spread across ``lam``."""
    vg = pgrid.vgrid
    pts = vg.points()
    fs = np.array([np.exp(-0.5 * np.sum((lam * pts / width) ** 2, axis=-1)) for lam in lambdas])
    gamma, p_inv, q_inv, r_inv = (as_rational(x) for x in (gamma, p_inv, q_inv, r_inv))
    if not gain_scaling_holds(p_inv, q_inv, r_inv, gamma, 3):
        raise ExponentError("scaling relation 1/p + 1/q = 1 + gamma/3 + 1/r violated")
    q = gain_array(fs, fs, vg, CollisionConfig(KernelSpec(gamma), pgrid.squad))
    r = _vnorm(q, r_inv, vg) / (_vnorm(fs, p_inv, vg) * _vnorm(fs, q_inv, vg))
    ref = r[list(lambdas).index(1.0)] if 1.0 in lambdas else r.mean()
    return {"lambdas": list(lambdas), "ratios": r.tolist(), "drift": float(np.max(np.abs(r / ref - 1.0))),
            "max_ratio": float(r.max())}


def strichartz_dilation_drift(triplet: Triplet, lambdas=(0.5, 1.0, 2.0), tg: TimeGrid = TimeGrid(1.0, 9),
                              sgrid: StrichartzGrid = StrichartzGrid(), family: FunctionFamily = FunctionFamily(
                                  sample_count=1, seed=1)) -> dict:
    """Strichartz ratio of one sample whose spatial profile is dilated by ``lam``."""
    r = []
    for lam in lambdas:
        s = strichartz_samples(family, sgrid, 1, dilation=lam)
        r.append(probe_strichartz(triplet, family=family, tg=tg, sgrid=sgrid, samples=s).max_ratio)
    r = np.asarray(r)
    ref = r[list(lambdas).index(1.0)] if 1.0 in lambdas else r.mean()
    return {"lambdas": list(lambdas), "ratios": r.tolist(), "drift": float(np.max(np.abs(r / ref - 1.0)))}
