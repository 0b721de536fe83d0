"""Command-line experiment harness.

::

    qfbsim <subcommand> --config <path> --out <path> [--set key=value ...]
           [--seed N] [--n N] [--dt SECONDS] [--check]

Subcommands: simulate, sweep-gain, sweep-alpha, sweep-beta, sweep-theta,
transient, optimize-gfm, oracle-compare.

The JSON config has sections ``physical``, ``controller``, ``target``,
``sim`` and (optionally) ``experiment``; unknown keys are rejected.  Every
subcommand is a pure function of (config, overrides, seed): the output CSV
is byte-identical across reruns.  A sidecar ``<out>.meta.json`` carries the
fully resolved configuration, seed, code version and wall time.

Exit codes: 0 success; 1 configuration error; 2 numerical failure;
3 check failure (with ``--check``).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .controller import (ControllerConfig, DEFAULT_FM_KG2, FmNonlinearity,
                         feedback_law)
from .ensemble import FitError
from .experiments import (SimSettings, Table, optimize_gfm, oracle_compare,
                          sweep_alpha, sweep_beta, sweep_gain, sweep_theta,
                          transient)
from .model import BlochVector, PhysicalParams, TargetState, bloch_from_angles
from .oracle import OracleResidualError, SingularGeneratorError
from .sme import IntegrationError

__all__ = ["main", "run_spec", "ExperimentSpec", "load_config",
           "run_subcommand", "ConfigError"]

SUBCOMMANDS = ("simulate", "sweep-gain", "sweep-alpha", "sweep-beta",
               "sweep-theta", "transient", "optimize-gfm", "oracle-compare")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    """One CLI invocation: subcommand, config source, output, overrides."""

    subcommand: str
    out_path: str
    config_path: str | None = None
    overrides: tuple[str, ...] = ()
    seed: int | None = None
    n_trajectories: int | None = None
    dt: float | None = None
    check: bool = False


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_PHYSICAL_KEYS = {f.name for f in dataclasses.fields(PhysicalParams)}
_TARGET_KEYS = {"theta", "phi"}
_CONTROLLER_KEYS = {"auto", "G_R", "alpha", "G_FM", "beta", "u_bar", "v_bar",
                    "fm_mode", "fm_nl", "kG2", "G_R_scale"}
_SIM_KEYS = {"dt", "duration", "n_trajectories", "seed", "stride",
             "markovian_limit", "init", "workers", "chunk"}
_EXPERIMENT_KEYS = {
    "simulate": set(),
    "sweep-gain": {"gain_ratios", "jpc_off_eta"},
    "sweep-alpha": {"alphas", "gain_ratios"},
    "sweep-beta": {"betas", "gfm", "fm_mode", "kG2"},
    "sweep-theta": {"thetas", "gfm_opt", "beta", "fm_mode", "kG2", "phi"},
    "transient": {"n_out", "fit_components", "min_fit_amplitude"},
    "optimize-gfm": {"bracket", "rel_tol", "max_iter", "beta", "fm_mode", "kG2"},
    "oracle-compare": {"n_probe", "sigma_limit"},
}

_DEFAULT_SIM = {"dt": 2e-9, "duration": 30e-6, "n_trajectories": 4000,
                "seed": 12345, "stride": None, "markovian_limit": False,
                "init": "thermal", "workers": 1, "chunk": 2048}
_DEFAULT_CONTROLLER = {"auto": True, "G_R": None, "alpha": None, "G_FM": None,
                       "beta": None, "u_bar": None, "v_bar": None,
                       "fm_mode": None, "fm_nl": None, "kG2": DEFAULT_FM_KG2,
                       "G_R_scale": 1.0}


def _check_keys(section: str, d: dict, allowed: set):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)} "
                          f"(allowed: {sorted(allowed)})")


def load_config(path: str | None, subcommand: str) -> dict:
    """Load, default-fill and validate a config document."""
    doc = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
    _check_keys("config", doc, {"physical", "controller", "target", "sim",
                                "experiment"})
    cfg = {
        "physical": dict(doc.get("physical", {})),
        "controller": {**_DEFAULT_CONTROLLER, **doc.get("controller", {})},
        "target": {"theta": 0.0, "phi": 0.0, **doc.get("target", {})},
        "sim": {**_DEFAULT_SIM, **doc.get("sim", {})},
        "experiment": dict(doc.get("experiment", {})),
    }
    _check_keys("physical", cfg["physical"], _PHYSICAL_KEYS)
    _check_keys("controller", doc.get("controller", {}), _CONTROLLER_KEYS)
    _check_keys("target", cfg["target"], _TARGET_KEYS)
    _check_keys("sim", doc.get("sim", {}), _SIM_KEYS)
    _check_keys("experiment", cfg["experiment"], _EXPERIMENT_KEYS[subcommand])
    return cfg


def _parse_set(value: str) -> tuple[list[str], object]:
    if "=" not in value:
        raise ConfigError(f"--set expects key=value, got {value!r}")
    key, _, raw = value.partition("=")
    path = key.strip().split(".")
    if not all(path):
        raise ConfigError(f"bad override key {key!r}")
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw  # bare string
    return path, val


def apply_overrides(cfg: dict, sets: list[str], subcommand: str) -> dict:
    for item in sets:
        path, val = _parse_set(item)
        if len(path) != 2:
            raise ConfigError(f"override keys are section.key, got {'.'.join(path)}")
        section, key = path
        if section not in cfg:
            raise ConfigError(f"unknown config section {section!r}")
        allowed = {"physical": _PHYSICAL_KEYS, "controller": _CONTROLLER_KEYS,
                   "target": _TARGET_KEYS, "sim": _SIM_KEYS,
                   "experiment": _EXPERIMENT_KEYS[subcommand]}[section]
        if key not in allowed:
            raise ConfigError(f"unknown key {section}.{key}")
        cfg[section][key] = val
    return cfg


def build_objects(cfg: dict) -> tuple[PhysicalParams, TargetState,
                                      ControllerConfig, SimSettings, dict]:
    """Instantiate validated domain objects from the config document."""
    try:
        params = PhysicalParams(**cfg["physical"])
        target = TargetState(**cfg["target"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    c = cfg["controller"]
    try:
        ctrl = feedback_law(target, params) if c["auto"] else ControllerConfig()
        explicit = {k: c[k] for k in
                    ("G_R", "alpha", "G_FM", "beta", "u_bar", "v_bar", "fm_mode")
                    if c[k] is not None}
        if explicit:
            if explicit.get("fm_mode") == "exact":
                explicit.pop("fm_mode")
                ctrl = replace(ctrl, **explicit, fm_nl=None,
                               fm_mode="linear" if (explicit.get("G_FM", ctrl.G_FM) or 0) > 0 else "off")
                if c["fm_nl"] is not None:
                    nl = FmNonlinearity(**c["fm_nl"])
                    ctrl = replace(ctrl, fm_mode="exact", fm_nl=nl, G_FM=nl.linear_gain)
                else:
                    ctrl = ctrl.with_exact_fm(c["kG2"])
            else:
                ctrl = replace(ctrl, **explicit)
        if c["G_R_scale"] != 1.0:
            ctrl = replace(ctrl, G_R=ctrl.G_R * float(c["G_R_scale"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"controller: {exc}") from exc

    s = cfg["sim"]
    try:
        sim = SimSettings(n=int(s["n_trajectories"]), duration=float(s["duration"]),
                          dt=float(s["dt"]), seed=int(s["seed"]),
                          workers=int(s["workers"]),
                          markovian_limit=bool(s["markovian_limit"]),
                          stride=None if s["stride"] is None else int(s["stride"]),
                          chunk=int(s["chunk"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sim: {exc}") from exc
    if sim.n < 2 or sim.duration < sim.dt or sim.dt <= 0:
        raise ConfigError("sim requires n >= 2, dt > 0, duration >= dt")
    return params, target, ctrl, sim, cfg["experiment"]


def _initial_state(cfg: dict, params: PhysicalParams,
                   target: TargetState) -> BlochVector:
    init = cfg["sim"]["init"]
    if init == "thermal":
        return params.thermal_state()
    if init == "target":
        return bloch_from_angles(target)
    if isinstance(init, (list, tuple)) and len(init) == 3:
        return BlochVector(*map(float, init))
    raise ConfigError(f"sim.init must be 'thermal', 'target' or [x, y, z], got {init!r}")


# ---------------------------------------------------------------------------
# checks (used with --check; mirror the experiment-level acceptance numbers)
# ---------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def _fourier_argmax(angles: np.ndarray, values: np.ndarray) -> float:
    """Phase of the fundamental harmonic: angle at which values peak."""
    c = np.sum(values * np.exp(-1j * angles))
    return float(np.angle(c))


def _crossing(xs: np.ndarray, ys: np.ndarray) -> float | None:
    """First descending zero crossing of ys(xs), linearly interpolated."""
    for i in range(len(xs) - 1):
        if ys[i] > 0.0 >= ys[i + 1]:
            return float(xs[i] - ys[i] * (xs[i + 1] - xs[i]) / (ys[i + 1] - ys[i]))
    return None


def check_sweep_gain(table: Table, params: PhysicalParams) -> list[Check]:
    checks = []
    main = table.col("eta") == table.col("eta").max()
    ratios = table.col("gain_ratio")[main]
    mz = table.col("mean_z")[main]
    k = int(np.argmax(mz))
    checks.append(Check("peak-z-value", abs(mz[k] - 0.17) <= 0.05,
                        f"max mean_z = {mz[k]:.3f} (want 0.17 +- 0.05)"))
    checks.append(Check("peak-z-location", abs(ratios[k] - 1.0) <= 0.2,
                        f"argmax gain_ratio = {ratios[k]:.2f} (want 1 +- 0.2)"))
    if np.any(ratios == 0.0):
        z0 = mz[ratios == 0.0][0]
        s0 = table.col("sem_z")[main][ratios == 0.0][0]
        checks.append(Check("zero-gain-free-decay", abs(z0 + 1.0) <= 3 * s0 + 1e-6,
                            f"mean_z(0) = {z0:.4f} (want -1)"))
    off = ~main
    if np.any(off):
        zo = table.col("mean_z")[off]
        so = table.col("sem_z")[off]
        mono = bool(np.all(np.diff(zo) >= -2.0 * np.hypot(so[1:], so[:-1])))
        checks.append(Check("jpc-off-monotone", mono, "mean_z monotone within 2 sem"))
        checks.append(Check("jpc-off-saturation", float(zo[-1]) <= 0.02,
                            f"final mean_z = {zo[-1]:.4f} (want <= 0.02)"))
        checks.append(Check("jpc-off-no-inversion", bool(np.all(zo <= 3 * so + 1e-9)),
                            "never positive beyond noise"))
    return checks


def check_sweep_alpha(table: Table, params: PhysicalParams) -> list[Check]:
    checks = []
    ratios = table.col("gain_ratio")
    for ratio in np.unique(ratios):
        m = ratios == ratio
        alphas, mz = table.col("alpha")[m], table.col("mean_z")[m]
        if ratio >= 10.0:
            worst = float(np.max(np.abs(mz)))
            checks.append(Check(f"randomized-at-{ratio:g}", worst <= 0.05,
                                f"max |mean_z| = {worst:.3f} (want <= 0.05)"))
        if abs(ratio - 1.0) < 1e-9:
            a0 = _fourier_argmax(alphas, mz)
            checks.append(Check("optimal-alpha", abs(a0 - math.pi / 2) <= 0.2,
                                f"argmax alpha = {a0:.3f} rad (want pi/2 +- 0.2)"))
        for comp in ("x", "y"):
            mv = table.col(f"mean_{comp}")[m]
            sv = table.col(f"sem_{comp}")[m]
            ok = bool(np.all(np.abs(mv) <= 3.0 * sv + 5e-3))
            checks.append(Check(f"coherence-{comp}-zero-at-{ratio:g}", ok,
                                f"max |mean_{comp}| = {np.max(np.abs(mv)):.4f}"))
    return checks


def check_sweep_beta(table: Table, params: PhysicalParams) -> list[Check]:
    checks = []
    betas = table.col("beta")
    mx, my = table.col("mean_x"), table.col("mean_y")
    n = len(betas)
    quarter = n // 4
    if 4 * quarter == n:
        c = np.corrcoef(mx, np.roll(my, -quarter))[0, 1]
        c2 = np.corrcoef(mx, np.roll(my, quarter))[0, 1]
        best = max(abs(c), abs(c2))
        checks.append(Check("quadrature-sinusoids", best > 0.9,
                            f"|corr(x, y shifted pi/2)| = {best:.3f} (want > 0.9)"))
    cross = _crossing(betas, mx)
    if cross is None:
        checks.append(Check("x-zero-crossing", False, "no descending zero crossing"))
        return checks
    mode = table.meta.get("fm_mode", "linear")
    lo, hi = (-math.radians(15.0), -math.radians(5.0)) if mode == "exact" \
        else (-math.radians(5.0), math.radians(5.0))
    checks.append(Check("optimal-beta", lo <= cross <= hi,
                        f"x crossing at {math.degrees(cross):+.1f} deg "
                        f"(want [{math.degrees(lo):.0f}, {math.degrees(hi):.0f}])"))
    i0 = int(np.argmin(np.abs(betas - cross)))
    sem = table.col("sem_y")
    checks.append(Check("y-maximal-at-crossing",
                        my[i0] >= my.max() - 3 * float(sem[i0] + sem[np.argmax(my)]),
                        f"mean_y at crossing = {my[i0]:.3f}, grid max = {my.max():.3f}"))
    if mode != "exact":
        checks.append(Check("y-amplitude", 0.22 <= float(my[i0]) <= 0.45,
                            f"mean_y at optimum = {my[i0]:.3f} (want [0.22, 0.45])"))
        checks.append(Check("x-zero-at-optimum", abs(float(mx[i0])) <= 0.05,
                            f"mean_x at optimum = {mx[i0]:.3f} (want 0 +- 0.05)"))
    return checks


def check_sweep_theta(table: Table, params: PhysicalParams) -> list[Check]:
    checks = []
    th = table.col("theta")
    coh = np.hypot(table.col("mean_x"), table.col("mean_y"))
    cmax = float(coh.max())
    checks.append(Check("max-coherence", 0.30 <= cmax <= 0.60,
                        f"max coherence = {cmax:.3f} (want [0.30, 0.60])"))
    m = th >= math.pi / 2 - 1e-9
    pur = table.col("purity")[m]
    sem = np.sqrt(table.col("sem_x")[m]**2 + table.col("sem_y")[m]**2
                  + table.col("sem_z")[m]**2)
    slack = 3.0 * (sem[1:] + sem[:-1])
    mono = bool(np.all(np.diff(pur) >= -slack))
    checks.append(Check("purity-monotone-to-ground", mono,
                        f"purity along theta >= pi/2: {np.array2string(pur, precision=3)}"))
    return checks


def check_transient(table: Table, params: PhysicalParams,
                    target: TargetState) -> list[Check]:
    checks = []
    g1 = params.gamma1
    fits = table.meta.get("fits", {})
    if target.theta == 0.0:
        if "z" in fits:
            rate = fits["z"]["rate"]
            checks.append(Check("excited-rate", abs(rate - 4 * g1) <= 0.3 * 4 * g1,
                                f"z rate = {rate / g1:.2f} gamma1 (want 4 +- 30%)"))
        else:
            checks.append(Check("excited-rate", False, "no z fit available"))
    elif abs(target.theta - math.pi / 2) < 1e-9:
        if "z" in fits:
            rate = fits["z"]["rate"]
            checks.append(Check("equator-rate", abs(rate - 1.5 * g1) <= 0.3 * 1.5 * g1,
                                f"z rate = {rate / g1:.2f} gamma1 (want 1.5 +- 30%)"))
        my, sy = table.col("mean_y"), table.col("sem_y")
        tail = slice(int(0.9 * len(my)), None)
        bump = float(my.max() - np.mean(my[tail]))
        checks.append(Check("y-transient-bump",
                            bump > 2.0 * float(np.mean(sy[tail])),
                            f"y bump = {bump:.3f} above final (want > 2 sem)"))
    for comp, f in fits.items():
        checks.append(Check(f"rate-floor-{comp}", f["rate"] >= 0.9 * g1,
                            f"{comp} rate = {f['rate'] / g1:.2f} gamma1 (want >= 0.9)"))
    return checks


def check_optimize_gfm(result, params: PhysicalParams) -> list[Check]:
    checks = [
        Check("bracket-converged", result.bracket_width_rel <= 0.02 + 1e-12,
              f"final bracket = {result.bracket_width_rel:.3f} of initial"),
        Check("unimodal", result.unimodal, "objective unimodal within noise"),
    ]
    tab = result.table
    gs, vals = tab.col("G_FM"), tab.col("coherence2")
    if gs.min() <= 1e-12:
        base = float(vals[np.argmin(gs)])
        checks.append(Check("beats-zero-gain", result.coherence2 > base,
                            f"coherence2 {result.coherence2:.3f} vs {base:.3f} at G_FM=0"))
    return checks


def check_oracle_compare(table: Table, params: PhysicalParams) -> list[Check]:
    passed = table.col("passed")
    dist = table.col("max_sigma_distance")
    names = table.meta["names"]
    return [Check(f"oracle-vs-mc-{names[i]}", bool(passed[i]),
                  f"max distance = {dist[i]:.2f} sigma") for i in range(len(names))]


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return format(float(v), ".12g")


def write_csv(path: Path, table: Table, subcommand: str):
    lines = [f"# qfbsim {subcommand}"]
    cols = list(table.columns)
    lines.append("# columns: " + ", ".join(
        f"{c} [{table.units.get(c, '1')}]" for c in cols))
    lines.append(",".join(cols))
    data = [table.columns[c] for c in cols]
    for i in range(table.n_rows):
        lines.append(",".join(_fmt(col[i]) for col in data))
    path.write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def write_meta(out: Path, subcommand: str, cfg: dict, table_meta: dict,
               checks: list[Check] | None, wall_time: float):
    meta = {
        "subcommand": subcommand,
        "version": __version__,
        "seed": cfg["sim"]["seed"],
        "n_trajectories": cfg["sim"]["n_trajectories"],
        "dt": cfg["sim"]["dt"],
        "config": cfg,
        "result_meta": table_meta,
        "checks": None if checks is None else [
            {"name": c.name, "passed": bool(c.passed), "detail": c.detail}
            for c in checks],
        "wall_time_s": wall_time,
    }
    Path(str(out) + ".meta.json").write_text(
        json.dumps(_jsonable(meta), indent=2) + "\n")


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def run_subcommand(subcommand: str, cfg: dict) -> tuple[Table, list[Check] | None, dict]:
    """Execute a subcommand; returns (table, checks-or-None, extra meta)."""
    params, target, ctrl, sim, exp = build_objects(cfg)
    checks: list[Check] | None = None

    if subcommand == "simulate":
        init = _initial_state(cfg, params, target)
        steps = int(round(sim.duration / sim.dt))
        stats = sim.run(ctrl, params, (sim.seed, 0, 0), init=init,
                        stride=max(1, steps // 300))
        table = Table(
            {"t": stats.times, "mean_x": stats.mean_x, "mean_y": stats.mean_y,
             "mean_z": stats.mean_z, "sem_x": stats.sem_x,
             "sem_y": stats.sem_y, "sem_z": stats.sem_z},
            {"t": "s", "mean_x": "1", "mean_y": "1", "mean_z": "1",
             "sem_x": "1", "sem_y": "1", "sem_z": "1"},
            meta={"clip_fraction": stats.clip_fraction})
        checks = []
    elif subcommand == "sweep-gain":
        table = sweep_gain(params, sim,
                           gain_ratios=exp.get("gain_ratios"),
                           jpc_off_eta=exp.get("jpc_off_eta"))
        checks = check_sweep_gain(table, params)
    elif subcommand == "sweep-alpha":
        table = sweep_alpha(params, sim, alphas=exp.get("alphas"),
                            gain_ratios=tuple(exp.get("gain_ratios", (0.35, 1.0, 11.4))))
        checks = check_sweep_alpha(table, params)
    elif subcommand == "sweep-beta":
        table = sweep_beta(params, sim, betas=exp.get("betas"),
                           gfm=exp.get("gfm"),
                           fm_mode=exp.get("fm_mode", "linear"),
                           kG2=exp.get("kG2", DEFAULT_FM_KG2))
        checks = check_sweep_beta(table, params)
    elif subcommand == "sweep-theta":
        table = sweep_theta(params, sim, thetas=exp.get("thetas"),
                            gfm_opt=exp.get("gfm_opt"),
                            beta=exp.get("beta", math.radians(-10.0)),
                            fm_mode=exp.get("fm_mode", "exact"),
                            kG2=exp.get("kG2", DEFAULT_FM_KG2),
                            phi=exp.get("phi", math.pi / 2))
        checks = check_sweep_theta(table, params)
    elif subcommand == "transient":
        table, _ = transient(params, sim, target=target, cfg=ctrl,
                             n_out=exp.get("n_out", 300),
                             fit_components=tuple(exp.get("fit_components", ("y", "z"))),
                             min_fit_amplitude=exp.get("min_fit_amplitude", 0.05))
        checks = check_transient(table, params, target)
    elif subcommand == "optimize-gfm":
        result = optimize_gfm(params, sim, target=target,
                              beta=exp.get("beta"),
                              bracket=tuple(exp["bracket"]) if "bracket" in exp else None,
                              rel_tol=exp.get("rel_tol", 0.02),
                              max_iter=exp.get("max_iter", 40),
                              fm_mode=exp.get("fm_mode", "linear"),
                              kG2=exp.get("kG2", DEFAULT_FM_KG2))
        table = result.table
        table.meta.update({"gfm_opt": result.gfm_opt,
                           "coherence2": result.coherence2,
                           "n_evaluations": result.n_evaluations,
                           "unimodal": result.unimodal})
        checks = check_optimize_gfm(result, params)
    elif subcommand == "oracle-compare":
        table = oracle_compare(params, replace(sim, markovian_limit=True),
                               n_probe=exp.get("n_probe", 400_000),
                               sigma_limit=exp.get("sigma_limit", 3.0))
        checks = check_oracle_compare(table, params)
    else:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    return table, checks, {}


def run_spec(spec: ExperimentSpec) -> int:
    """Execute one fully-described invocation; returns the process exit code."""
    t0 = time.perf_counter()
    try:
        cfg = load_config(spec.config_path, spec.subcommand)
        cfg = apply_overrides(cfg, list(spec.overrides), spec.subcommand)
        if spec.seed is not None:
            cfg["sim"]["seed"] = spec.seed
        if spec.n_trajectories is not None:
            cfg["sim"]["n_trajectories"] = spec.n_trajectories
        if spec.dt is not None:
            cfg["sim"]["dt"] = spec.dt
        build_objects(cfg)  # fail fast on invalid physical/controller values
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        table, checks, _ = run_subcommand(spec.subcommand, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (IntegrationError, FitError, OracleResidualError,
            SingularGeneratorError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2

    out = Path(spec.out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, table, spec.subcommand)
    write_meta(out, spec.subcommand, cfg, table.meta,
               checks if spec.check else None, time.perf_counter() - t0)
    print(f"wrote {out} ({table.n_rows} rows)")

    if spec.check and checks is not None:
        failed = [c for c in checks if not c.passed]
        for c in checks:
            print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
        if failed:
            return 3
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qfbsim",
        description="Monte Carlo simulator for a heterodyne-feedback-stabilized qubit")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", default=None, help="JSON config path")
    parser.add_argument("--out", required=True, help="output CSV path")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted-key config override (repeatable)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--n", type=int, default=None, help="trajectories per point")
    parser.add_argument("--dt", type=float, default=None, help="step size (s)")
    parser.add_argument("--check", action="store_true",
                        help="run the subcommand's acceptance checks")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    return run_spec(ExperimentSpec(
        subcommand=args.subcommand, out_path=args.out, config_path=args.config,
        overrides=tuple(args.set), seed=args.seed, n_trajectories=args.n,
        dt=args.dt, check=args.check))


if __name__ == "__main__":
    sys.exit(main())
