"""Command-line entry point: ``kml <subcommand> [options]``.

Solver subcommands read an optional flat ``key = value`` config file
(``--config``) and then apply command-line overrides.  Every run directory
gets a ``manifest.json`` with the resolved configuration, a content hash of
the inputs and the library versions.

Exit codes: 0 success, 1 precondition or input errors, 2 numerical failures
(sandwich violation, non-convergence).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import platform
import re
import sys
import warnings
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .discretization import (
    PhaseField,
    PhaseGrid,
    SpatialGrid,
    SphereQuadrature,
    VelocityGrid,
    read_field,
    read_trajectory,
    write_field,
    write_norm_history,
    write_trajectory,
)
from .exponents import (
    ExponentError,
    Triplet,
    as_rational,
    check_weighted_scaling,
    companion_triplets,
    conjugate_triplet,
    harmonic_mean,
    is_endpoint,
    is_kt_admissible,
    local_triplet,
    rational_str,
    solvable_triplet,
    weight_exponent,
)
from .kinematics import KernelSpec

log = logging.getLogger("kml")

EXIT_OK, EXIT_PRECONDITION, EXIT_NUMERICAL = 0, 1, 2
CONFIG_DIR = Path(__file__).resolve().parent / "configs"


class ConfigError(ValueError):
    pass


# -- configuration ---------------------------------------------------------------------------


def _frac(text: str) -> Fraction:
    try:
        return as_rational(text.strip())
    except (ValueError, ZeroDivisionError, ExponentError) as exc:
        raise ValueError(f"not a rational number: {text!r}") from exc


def _triple(kind):
    def conv(text: str):
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated values, got {text!r}")
        return tuple(kind(p) for p in parts)

    return conv


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple:
    return tuple(float(p) for p in text.split(",") if p.strip())


@dataclass
class ExperimentConfig:
    command: str = "solve-full"
    gamma: Fraction = Fraction(-1)
    angular: str = "const:1.0"
    eps: Fraction = Fraction(1, 100)
    ell: str = "0"
    grid: tuple = (6, 12, 33)
    extent: tuple = (4.0, 3.0, 2.0)
    sphere: tuple = (1, 4)
    family: str = "gaussian"
    amplitude: float = 1e-3
    sigma_x: float = 1.0
    sigma_v: float = 0.6
    eta: float | None = None
    tol: float = 1e-8
    max_iterations: int = 40
    method: str = "picard"
    series_terms: int = 3
    levels: int = 3
    deltas: tuple = (1e-3, 1e-4)
    out_dir: str = "kml_run"

    _CONVERT = {
        "command": str,
        "gamma": _frac,
        "angular": str,
        "eps": _frac,
        "ell": str,
        "grid": _triple(int),
        "extent": _triple(float),
        "sphere": lambda t: tuple(int(p) for p in t.split(",")),
        "family": str,
        "amplitude": float,
        "sigma_x": float,
        "sigma_v": float,
        "eta": lambda t: None if t.strip().lower() == "none" else float(t),
        "tol": float,
        "max_iterations": int,
        "method": str,
        "series_terms": int,
        "levels": int,
        "deltas": _floats,
        "out_dir": str,
    }

    def __post_init__(self):
        self.validate()

    def validate(self):
        n_x, n_v, n_t = self.grid
        if n_x < 1 or n_v < 4 or n_v % 2 or n_t < 2:
            raise ConfigError(f"grid {self.grid} below minimums (n_x >= 1, even n_v >= 4, n_t >= 2)")
        if min(self.extent) <= 0:
            raise ConfigError("extents must be positive")
        if not self.amplitude > 0:
            raise ConfigError("amplitude must be positive")
        if len(self.sphere) != 2 or min(self.sphere) < 1:
            raise ConfigError("sphere needs two positive node counts")
        if self.family not in ("gaussian", "two_bump", "product"):
            raise ConfigError(f"unknown initial-data family {self.family!r}")
        if self.method not in ("picard", "series"):
            raise ConfigError(f"unknown gain-only method {self.method!r}")

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    def set(self, key: str, text: str):
        if key not in self._CONVERT:
            raise KeyError(key)
        setattr(self, key, self._CONVERT[key](text))

    def resolved(self) -> dict:
        d = {}
        for k in self.keys():
            v = getattr(self, k)
            if isinstance(v, Fraction):
                v = rational_str(v)
            elif isinstance(v, tuple):
                v = list(v)
            d[k] = v
        return d


def parse_config(text: str, base: ExperimentConfig | None = None, source: str = "<config>") -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Errors carry line numbers."""
    cfg = base or ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            cfg.set(key, value)
        except KeyError:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}") from None
        except (ValueError, ExponentError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    try:
        cfg.validate()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file() and (CONFIG_DIR / p.name).is_file() and not p.parent.parts:
        p = CONFIG_DIR / p.name
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config(p.read_text(), source=str(path))


def bundled_configs() -> list[str]:
    return sorted(p.name for p in CONFIG_DIR.glob("*.cfg"))


# -- manifests --------------------------------------------------------------------------------


def blob_hash(data: bytes) -> str:
    """Git blob object id of ``data``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _versions() -> dict:
    import scipy

    return {"kml": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version(), "backend": _kernels.BACKEND}


def write_manifest(out_dir: Path, command: str, resolved: dict, inputs: dict[str, bytes]) -> dict:
    # the output location is recorded but is not an input
    canon = json.dumps({k: v for k, v in resolved.items() if k != "out_dir"}, sort_keys=True).encode()
    items = {"config": blob_hash(canon)} | {k: blob_hash(v) for k, v in sorted(inputs.items())}
    combined = hashlib.sha1("".join(f"{k}:{v}\n" for k, v in sorted(items.items())).encode()).hexdigest()
    man = {"command": command, "config": resolved, "input_hashes": items, "input_hash": combined,
           "versions": _versions()}
    _write_json(out_dir / "manifest.json", man)
    return man


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, Fraction):
        return rational_str(o)
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    else:
        print(text)


# -- building library objects -----------------------------------------------------------------


def build_solver_setup(cfg: ExperimentConfig):
    from .collision import CollisionConfig
    from .solver import INITIAL_DATA, SolverConfig, default_norms
    from .transport import TimeGrid

    n_x, n_v, n_t = cfg.grid
    X, V, T = cfg.extent
    grid = PhaseGrid(SpatialGrid(X, n_x), VelocityGrid(V, n_v))
    tg = TimeGrid(T, n_t)
    ccfg = CollisionConfig(KernelSpec(cfg.gamma, _parse_angular(cfg.angular)), SphereQuadrature(*cfg.sphere))
    kw = dict(collision=ccfg, tol_fixed_point=cfg.tol, max_iterations=cfg.max_iterations,
              series_terms=cfg.series_terms, eps=cfg.eps, eta=cfg.eta)
    ell = cfg.ell.strip().lower()
    if ell == "auto":
        scfg = SolverConfig(weighted=True, **kw)
    else:
        val = float(_frac(ell))
        if val < 0:
            raise ExponentError("ell must be non-negative")
        mon, comp = default_norms(cfg.gamma, val)
        scfg = SolverConfig(monitored_norm=mon, companion_norm=comp, **kw)
    make = INITIAL_DATA[cfg.family]
    extra = {"sigma_x": cfg.sigma_x}
    if cfg.family == "product":
        extra["temperature"] = cfg.sigma_v ** 2
    else:
        extra["sigma_v"] = cfg.sigma_v
    f0 = make(grid, cfg.amplitude, **extra)
    return f0, scfg, tg


def _parse_angular(text):
    from .kinematics import parse_angular

    return parse_angular(text)


def _resolution(cfg: ExperimentConfig) -> dict:
    return {"n_x": cfg.grid[0], "n_v": cfg.grid[1], "n_t": cfg.grid[2], "X": cfg.extent[0],
            "V": cfg.extent[1], "T": cfg.extent[2], "n_polar": cfg.sphere[0], "n_azimuth": cfg.sphere[1]}


# -- subcommands --------------------------------------------------------------------------------


def _tri(t: Triplet) -> dict:
    d = t.as_strings()
    d["hm_inv"] = rational_str(harmonic_mean(t))
    return d


def cmd_triplets(args) -> int:
    mode = args.mode
    out: dict = {"mode": mode}
    if mode in ("solvable", "conjugate"):
        if args.p_inv is None:
            raise ExponentError("--p-inv is required")
        t = solvable_triplet(_frac(args.p_inv))
        c = conjugate_triplet(t)
        out |= {"p_inv": rational_str(_frac(args.p_inv)), "solvable": _tri(t), "conjugate": _tri(c),
                "admissible": is_kt_admissible(t), "endpoint": is_endpoint(t)}
    elif mode == "companion":
        if args.p_inv is None or args.gamma is None:
            raise ExponentError("--p-inv and --gamma are required")
        t = solvable_triplet(_frac(args.p_inv))
        t2, src = companion_triplets(_frac(args.gamma), t)
        out |= {"gamma": rational_str(_frac(args.gamma)), "solvable": _tri(t), "companion": _tri(t2),
                "source": _tri(src), "companion_admissible": is_kt_admissible(t2)}
    elif mode == "local":
        if args.alpha is None or args.gamma is None:
            raise ExponentError("--alpha and --gamma are required")
        t, beta = local_triplet(_frac(args.alpha), _frac(args.gamma))
        out |= {"alpha": rational_str(_frac(args.alpha)), "gamma": rational_str(_frac(args.gamma)),
                "local": _tri(t), "beta": rational_str(beta)}
    else:  # weighted-check
        if args.gamma is None:
            raise ExponentError("--gamma is required")
        g = _frac(args.gamma)
        out |= {"gamma": rational_str(g), "eps": rational_str(_frac(args.eps)),
                "ell": rational_str(weight_exponent(g, _frac(args.eps)))}
        if args.exponents:
            vals = [_frac(x) for x in args.exponents.split(",")]
            if len(vals) != 4:
                raise ExponentError("--exponents takes p_inv,q_inv,m_inv,r_inv")
            out["exponents"] = [rational_str(v) for v in vals]
            out["loss_variant"] = bool(args.loss)
            out["holds"] = check_weighted_scaling(*vals, g, 3, loss_variant=bool(args.loss))
    _emit(out, args.out)
    return EXIT_OK


def cmd_collide(args) -> int:
    from .collision import CollisionConfig, gain_array, loss_rate_array, weak_moments

    src = Path(args.input)
    if not src.is_file():
        raise FileNotFoundError(f"input field not found: {args.input}")
    f = read_field(src)
    ccfg = CollisionConfig(KernelSpec(_frac(args.kernel_gamma), _parse_angular(args.angular)),
                           SphereQuadrature(*args.sphere))
    vg = f.grid.v
    gq = gain_array(f.values, f.values, vg, ccfg)
    lq = f.values * loss_rate_array(f.values, vg, ccfg)
    q = gq - lq
    mom = weak_moments(q, vg).reshape(-1, 5).sum(axis=0) * f.grid.x.cell_volume
    gain_l1 = float(np.abs(gq).sum() * vg.cell_volume * f.grid.x.cell_volume)
    report = {
        "moments": dict(zip(("mass", "momentum_1", "momentum_2", "momentum_3", "energy"), mom.tolist())),
        "relative_moments": (mom / gain_l1).tolist() if gain_l1 > 0 else [0.0] * 5,
        "gain_l1": gain_l1,
        "positivity_min": {"input": float(f.values.min()), "gain": float(gq.min()), "loss": float(lq.min())},
        "collision": ccfg.describe(),
        "resolution": f.grid.describe(),
    }
    if args.out:
        write_field(args.out, PhaseField(q, f.grid))
    _emit(report, args.report)
    return EXIT_OK


def _configure(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else parse_config("")
    ov = {
        "gamma": args.gamma, "ell": args.ell, "amplitude": args.amplitude, "grid": args.grid,
        "extent": args.extent, "tol": args.tol, "out_dir": args.out_dir,
    }
    for k, v in ov.items():
        if v is not None:
            try:
                cfg.set(k, str(v))
            except (ValueError, ExponentError) as exc:
                raise ConfigError(f"--{k.replace('_', '-')}: {exc}") from None
    cfg.validate()
    return cfg


def _run_dir(cfg: ExperimentConfig, command: str, config_path) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    inputs = {}
    if config_path:
        p = Path(config_path)
        p = p if p.is_file() else CONFIG_DIR / p.name
        inputs["config_file"] = p.read_bytes()
    write_manifest(out, command, cfg.resolved() | {"command": command}, inputs)
    return out


def _dump_trajectory(out: Path, traj, name="trajectory"):
    write_trajectory(out / name, traj)


def cmd_solve_gain(args) -> int:
    from .solver import SeriesGrowthError, solve_gain_picard, solve_gain_series
    from .discretization import mixed_norm

    cfg = _configure(args)
    if args.method:
        cfg.method = args.method
    out = _run_dir(cfg, "solve-gain", args.config)
    f0, scfg, tg = build_solver_setup(cfg)
    report = {"method": cfg.method, "resolution": _resolution(cfg), "solver": scfg.describe()}
    rows = []
    try:
        if cfg.method == "series":
            res = solve_gain_series(f0, scfg, tg)
            traj = res.trajectory
            report["term_norms"] = res.term_norms
            rows = [(float(k + 1), "series_term", v) for k, v in enumerate(res.term_norms)]
        else:
            traj = solve_gain_picard(f0, scfg, tg)
            hist = traj.norm_history
            report["picard_change"] = hist.get("picard_change", [])
            report["contraction_ratio"] = hist.get("contraction_ratio", [])
            rows = [(float(k + 1), "picard_change", v) for k, v in enumerate(report["picard_change"])]
    except SeriesGrowthError as exc:
        report["error"] = str(exc)
        _write_json(out / "solve_report.json", report)
        raise
    report["monitored_norm"] = mixed_norm(traj, scfg.monitored_norm)
    report["min_value"] = float(traj.min_value)
    _dump_trajectory(out, traj)
    write_norm_history(out / "norm_history.csv", rows)
    _write_json(out / "solve_report.json", report)
    return EXIT_OK


def _ks(cfg, out: Path):
    from .solver import ConvergenceError, SandwichError, kaniel_shinbrot

    f0, scfg, tg = build_solver_setup(cfg)
    extra = {"resolution": _resolution(cfg), "solver": scfg.describe()}
    try:
        state, f = kaniel_shinbrot(f0, scfg, tg)
    except (SandwichError, ConvergenceError) as exc:
        rep = {"error": str(exc), "sandwich_ok": not isinstance(exc, SandwichError)} | extra
        if isinstance(exc, ConvergenceError):
            rep["gap_history"] = list(exc.history)
        _write_json(out / "ks_report.json", rep)
        raise
    rep = state.report() | extra
    rep["tol"] = scfg.tol_fixed_point
    rep["residual_ok"] = state.residual is not None and state.residual <= 5 * scfg.tol_fixed_point
    _write_json(out / "ks_report.json", rep)
    write_norm_history(out / "norm_history.csv",
                       [(float(k), "ks_gap", g) for k, g in enumerate(state.gap_history)])
    _dump_trajectory(out, f)
    return f0, scfg, tg, state, f


def cmd_solve_full(args) -> int:
    cfg = _configure(args)
    out = _run_dir(cfg, "solve-full", args.config)
    _ks(cfg, out)
    return EXIT_OK


def cmd_scatter(args) -> int:
    from .solver import scattering

    cfg = _configure(args)
    out = _run_dir(cfg, "scatter", args.config)
    if args.trajectory:
        _, scfg, _ = build_solver_setup(cfg)
        traj = read_trajectory(args.trajectory)
        f0 = None
    else:
        f0, scfg, _, _, traj = _ks(cfg, out)
    rep = scattering(traj, scfg, f0)
    write_scatter_csv(out / "scatter.csv", rep)
    write_field(out / "f_infty.bin", rep.f_infty)
    return EXIT_OK


def write_scatter_csv(path: Path, rep) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "cauchy_difference", "direct_difference"])
        for t, d, dd in rep.rows():
            w.writerow([repr(float(t)), repr(float(d)), repr(float(dd))])


def cmd_unique_probe(args) -> int:
    from .solver import uniqueness_probe

    cfg = _configure(args)
    out = _run_dir(cfg, "unique-probe", args.config)
    f0, scfg, tg = build_solver_setup(cfg)
    rep = uniqueness_probe(f0, scfg, tg, levels=cfg.levels, deltas=cfg.deltas)
    _write_json(out / "uniqueness_report.json", rep.to_dict() | {"resolution": _resolution(cfg)})
    return EXIT_OK


PROBE_DEFAULTS = {
    "gain": {"gamma": "-1", "exponents": "2/3,2/3,2/3"},
    "gain-weighted": {"gamma": "-1/2", "ell": "51/100", "exponents": "2/5,2/5,1/6,2/15"},
    "loss": {"gamma": "-1/2", "ell": "51/100", "exponents": "2/5,23/30,1/6,1/2"},
    "loss-single-weight": {"gamma": "-1", "ell": "51/100", "exponents": "2/5,3/5,1/6,1/2"},
    "hls": {"gamma": "-1", "exponents": "5/6,5/6"},
    "strichartz": {"exponents": "2/5"},
}


def run_probe(estimate: str, samples: int = 200, seed: int = 0, family: str = "gaussian_mixture",
              gamma=None, ell=None, exponents=None, explore: bool = False, single_weight: bool = False):
    from . import estimates as E

    d = PROBE_DEFAULTS[estimate]
    if estimate == "loss" and single_weight and exponents is None:
        d = PROBE_DEFAULTS["loss-single-weight"]
    gamma = _frac(gamma or d.get("gamma", "-1"))
    ell_v = float(_frac(ell or d.get("ell", "0")))
    ex = [_frac(x) for x in (exponents or d["exponents"]).split(",")]
    fam = E.FunctionFamily(family, samples, seed)
    if estimate == "gain":
        return E.probe_gain(gamma, *ex, fam, ell=ell_v)
    if estimate == "gain-weighted":
        if len(ex) == 3:
            return E.probe_gain_weighted(gamma, ell_v, *ex, family=fam)
        p, q, m, r = ex
        return E.probe_gain_weighted(gamma, ell_v, p, q, r, m_inv=m, family=fam, explore=explore)
    if estimate in ("loss", "loss-single-weight"):
        single_weight = single_weight or estimate == "loss-single-weight"
        return E.probe_loss(gamma, ell_v, *ex, family=fam, explore=explore, single_weight=single_weight)
    if estimate == "hls":
        return E.probe_hls(gamma, *ex, fam)
    # strichartz: one value is the solvable-family parameter, three a full triplet
    t = solvable_triplet(ex[0]) if len(ex) == 1 else Triplet(*ex)
    return E.probe_strichartz(t, family=fam)


def cmd_probe(args) -> int:
    rep = run_probe(args.estimate, args.samples, args.seed, args.family, args.gamma, args.ell,
                    args.exponents, args.explore, args.single_weight)
    _emit(rep.to_dict(), args.out)
    return EXIT_OK


def emit_plots(run_dir) -> list[Path]:
    """CSV series for external plotting from a completed run directory."""
    run = Path(run_dir)
    if not run.is_dir():
        raise FileNotFoundError(f"run directory not found: {run_dir}")
    written = []
    ks = run / "ks_report.json"
    if ks.is_file():
        rep = json.loads(ks.read_text())
        gh = rep.get("gap_history") or []
        p = run / "plot_gap_history.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "gap", "ratio"])
            for k, g in enumerate(gh):
                ratio = gh[k] / gh[k - 1] if k > 0 and gh[k - 1] > 0 else ""
                w.writerow([k, repr(float(g)), repr(ratio) if ratio != "" else ""])
        written.append(p)
    sc = run / "scatter.csv"
    if sc.is_file():
        p = run / "plot_scatter.csv"
        with open(sc) as src, open(p, "w", newline="") as fh:
            rows = list(csv.reader(src))
            w = csv.writer(fh)
            w.writerow(["t", "cauchy_difference", "log10_difference"])
            for row in rows[1:]:
                d = float(row[1])
                w.writerow([row[0], row[1], repr(float(np.log10(d))) if d > 0 else ""])
        written.append(p)
    for probe in sorted(run.glob("probe*.json")):
        rep = json.loads(probe.read_text())
        if "ratios" not in rep:
            continue
        r = np.asarray(rep["ratios"], dtype=float)
        counts, edges = np.histogram(r, bins=20) if r.size else (np.zeros(20, int), np.linspace(0, 1, 21))
        p = run / f"plot_{probe.stem}_histogram.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_lo", "bin_hi", "count"])
            for lo, hi, c in zip(edges[:-1], edges[1:], counts):
                w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
        written.append(p)
    if not written:
        raise FileNotFoundError(f"no plottable outputs in {run_dir}")
    return written


def cmd_emit_plots(args) -> int:
    for p in emit_plots(args.run_dir):
        print(p)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    ns = argparse.Namespace(config=args.config, gamma=None, ell=None, amplitude=None, grid=None, extent=None,
                            tol=None, out_dir=args.out_dir, method=None, trajectory=None)
    handlers = {"solve-gain": cmd_solve_gain, "solve-full": cmd_solve_full, "scatter": cmd_scatter,
                "unique-probe": cmd_unique_probe}
    if cfg.command not in handlers:
        raise ConfigError(f"{args.config}: command {cfg.command!r} is not a solver pipeline")
    return handlers[cfg.command](ns)


def run(config_path) -> int:
    """Execute the pipeline named by ``command`` in ``config_path``; returns the exit code."""
    return main(["run", str(config_path)])


# -- argument parsing -----------------------------------------------------------------------------


def _solver_flags(p):
    p.add_argument("--config", help="key = value config file (bundled names accepted)")
    p.add_argument("--gamma", help="kernel exponent, rational (e.g. -1/2)")
    p.add_argument("--ell", help="velocity weight: auto or a rational")
    p.add_argument("--amplitude", type=float)
    p.add_argument("--grid", help="n_x,n_v,n_t")
    p.add_argument("--extent", help="X,V,T")
    p.add_argument("--tol", type=float)
    p.add_argument("--out-dir")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kml", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("triplets", help="exact exponent triplets as JSON")
    p.add_argument("--p-inv")
    p.add_argument("--gamma")
    p.add_argument("--alpha")
    p.add_argument("--eps", default="1/100")
    p.add_argument("--mode", default="solvable",
                   choices=["solvable", "conjugate", "companion", "local", "weighted-check"])
    p.add_argument("--exponents", help="weighted-check: p_inv,q_inv,m_inv,r_inv")
    p.add_argument("--loss", action="store_true", help="weighted-check: loss-term size conditions")
    p.add_argument("--out")
    p.set_defaults(func=cmd_triplets)

    p = sub.add_parser("collide", help="apply the collision operator to a field file")
    p.add_argument("--input", required=True)
    p.add_argument("--kernel-gamma", default="-1")
    p.add_argument("--angular", default="const:1.0")
    p.add_argument("--sphere", type=_triple_int2, default=(2, 4), help="n_polar,n_azimuth")
    p.add_argument("--out")
    p.add_argument("--report")
    p.set_defaults(func=cmd_collide)

    p = sub.add_parser("solve-gain", help="gain-only Picard or Duhamel series")
    _solver_flags(p)
    p.add_argument("--method", choices=["picard", "series"])
    p.set_defaults(func=cmd_solve_gain)

    p = sub.add_parser("solve-full", help="Kaniel-Shinbrot iteration for the full equation")
    _solver_flags(p)
    p.set_defaults(func=cmd_solve_full)

    p = sub.add_parser("scatter", help="scattering diagnostic (runs solve-full unless --trajectory)")
    _solver_flags(p)
    p.add_argument("--trajectory", help="existing trajectory directory")
    p.set_defaults(func=cmd_scatter)

    p = sub.add_parser("unique-probe", help="time-refinement and Lipschitz stability probe")
    _solver_flags(p)
    p.set_defaults(func=cmd_unique_probe)

    p = sub.add_parser("probe", help="empirical constants of the bilinear and Strichartz estimates")
    p.add_argument("--estimate", required=True, choices=sorted(PROBE_DEFAULTS))
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--family", default="gaussian_mixture")
    p.add_argument("--gamma")
    p.add_argument("--ell")
    p.add_argument("--exponents", help="comma-separated reciprocal exponents")
    p.add_argument("--explore", action="store_true", help="waive size conditions (not the scaling relation)")
    p.add_argument("--single-weight", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("emit-plots", help="CSV series from a completed run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_emit_plots)

    p = sub.add_parser("run", help="run the pipeline named in a config file")
    p.add_argument("config")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_run)
    return ap


def _triple_int2(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected n_polar,n_azimuth")
    return tuple(int(x) for x in parts)


_NEG_VALUE = re.compile(r"^-\d+(/\d+)?(\.\d*)?([eE][-+]?\d+)?(,.*)?$")


def _join_negative_values(argv):
    """Rewrite ``--gamma -1/2`` as ``--gamma=-1/2`` so argparse keeps the sign."""
    out = []
    for tok in argv:
        if out and _NEG_VALUE.match(tok) and out[-1].startswith("--") and "=" not in out[-1]:
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    from .solver import ConvergenceError, SandwichError

    ap = build_parser()
    argv = _join_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PRECONDITION if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", category=RuntimeWarning)
    try:
        return args.func(args)
    except (SandwichError, ConvergenceError) as exc:
        print(f"kml: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ExponentError, ValueError, FileNotFoundError, KeyError, OSError) as exc:
        print(f"kml: error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
