from fractions import Fraction

import numpy as np
import pytest

from kml.collision import CollisionConfig
from kml.discretization import PhaseGrid, SpatialGrid, SphereQuadrature, VelocityGrid, mixed_norm
from kml.kinematics import KernelSpec
from kml.solver import (
    ConvergenceError,
    SmallnessWarning,
    SolverConfig,
    calibrate_amplitude,
    data_size,
    default_norms,
    first_picard_correction,
    gaussian_data,
    kaniel_shinbrot,
    lipschitz_table,
    product_data,
    scattering,
    solve,
    solve_gain_picard,
    solve_gain_series,
    uniqueness_probe,
)
from kml.transport import TimeGrid, free_trajectory

GRID = PhaseGrid(SpatialGrid(3.0, 4), VelocityGrid(2.5, 6))
TG = TimeGrid(1.0, 5)


def config(**kw):
    kw.setdefault("tol_fixed_point", 1e-9)
    return SolverConfig(CollisionConfig(KernelSpec.parse("-1"), SphereQuadrature(1, 4)), **kw)


def data(a=0.05):
    return gaussian_data(GRID, a, 1.0, 0.6)


def test_default_norms():
    mon, comp = default_norms(Fraction(-1), 0.0)
    assert mon.triplet.p_inv == Fraction(2, 5)
    assert comp.ell == 0.0
    cfg = SolverConfig(weighted=True, collision=CollisionConfig(KernelSpec.parse("-1/2")))
    assert cfg.ell == pytest.approx(0.51)
    with pytest.raises(ValueError):
        SolverConfig(mode="bogus")
    with pytest.raises(ValueError):
        SolverConfig(series_terms=0)


def test_picard_monotone_from_below():
    f0 = data()
    cfg = config()
    sol = solve_gain_picard(f0, cfg, TG)
    free = free_trajectory(f0, TG).values
    assert np.all(sol.values >= free - 1e-15)
    hist = sol.norm_history["picard_change"]
    assert hist[-1] < 1e-9 and all(b < a for a, b in zip(hist, hist[1:]))
    assert first_picard_correction(f0, cfg, TG) > 0


def test_picard_failure_reports_ratios():
    with pytest.raises(ConvergenceError) as exc:
        solve_gain_picard(data(), config(max_iterations=1), TG)
    assert "contraction ratios" in str(exc.value)


def test_series_matches_picard_to_third_order():
    gaps = []
    for a in (0.05, 0.025):
        f0 = data(a)
        cfg = config(series_terms=3)
        pic = solve_gain_picard(f0, cfg, TG)
        ser = solve_gain_series(f0, cfg, TG)
        assert ser.trajectory.min_value >= 0
        assert ser.term_norms == sorted(ser.term_norms, reverse=True)
        gaps.append(mixed_norm(pic.with_values(pic.values - ser.trajectory.values), cfg.monitored_norm)
                    / mixed_norm(pic, cfg.monitored_norm))
    assert gaps[0] / gaps[1] == pytest.approx(8.0, rel=0.15)


def test_kaniel_shinbrot_sandwich():
    f0 = data()
    cfg = config()
    state, f = kaniel_shinbrot(f0, cfg, TG)
    assert state.sandwich_ok and min(state.sandwich_margins) >= -1e-10
    assert state.gap_history[-1] < cfg.tol_fixed_point
    assert f.min_value >= 0
    assert state.domination_margin >= -1e-10
    assert state.residual < 0.05
    rep = state.report()
    assert rep["iteration"] == state.iteration and len(rep["gap_ratios"]) == len(state.gap_history) - 1
    assert solve(f0, config(mode="gain_only_series"), TG).values.shape == (TG.n_t,) + GRID.shape


def test_data_checks():
    f0 = data()
    with pytest.warns(SmallnessWarning):
        solve_gain_picard(f0, config(eta=0.5 * data_size(f0)), TG)
    neg = f0.with_values(-f0.values)
    with pytest.raises(ValueError):
        kaniel_shinbrot(neg, config(), TG)


def test_calibration_scales_linearly():
    make = lambda a: gaussian_data(GRID, a)  # noqa: E731
    c1 = calibrate_amplitude(make, config(), TG, 1e-3)
    c2 = calibrate_amplitude(make, config(), TG, 2e-3)
    assert c2["probe_ratio"] / c1["probe_ratio"] == pytest.approx(2.0, rel=0.02)
    assert c2["amplitude"] == pytest.approx(c1["amplitude"], rel=0.02)
    assert c1["eta"] > 0


@pytest.mark.slow
def test_uniqueness_and_lipschitz():
    f0 = data(0.02)
    cfg = config()
    rep = uniqueness_probe(f0, cfg, TimeGrid(1.0, 3), levels=3, deltas=(1e-3,))
    assert len(rep.differences) == 2 and rep.n_t == [3, 5, 9]
    assert 3.0 < rep.ratios[0] < 5.0
    assert all(np.isfinite(v) and v > 0 for v in rep.lipschitz.values())
    lt = lipschitz_table(f0, cfg, TimeGrid(1.0, 3), (1e-3, 1e-4))
    a, b = lt.values()
    assert a == pytest.approx(b, rel=0.05)


def test_scattering_tail():
    f0 = product_data(GRID, 0.05)
    cfg = config()
    _, f = kaniel_shinbrot(f0, cfg, TimeGrid(2.0, 9))
    rep = scattering(f, cfg, f0)
    assert len(rep.cauchy_tail) == 8 and len(rep.cauchy_tail_direct) == 8
    assert rep.cauchy_tail[-1] < rep.cauchy_tail[0]
    assert rep.f_infty.grid == GRID
    rows = list(rep.rows())
    assert rows[0][0] == pytest.approx(0.25)
