"""Batch front end: JSON config in, manifest + CSV artifacts out.

Subcommands: synthesize | evolve | grape | anneal | fit-field | scan |
derivative.  Config parsing is strict (unknown keys are rejected) and
every applied default is echoed back through the run manifest, which
also records the config hash, seed, backend and library versions.
Exit codes: 0 success, 2 config/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .analysis import (AnalyticFieldModel, field_model, field_spectrum,
                       fit_model, orientation_derivative, robustness_scan)
from .anneal import SAConfig, anneal
from .core import (Molecule, boltzmann_channels, default_j_max,
                   default_target_harmonics, molecule, molecule_from_config)
from .grape import GrapeConfig, optimize_pulse
from .propagator import (NonFiniteField, SplineField, measure_fourier,
                         propagate_ensemble, pulse_orientation)
from .synthesis import (InfeasibleAmplitude, ZeroCoefficient,
                        state_to_fourier, synthesize_state)
from .waveforms import (WaveformSpec, analytic_fourier,
                        fourier_to_timeseries)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    """Bad or missing configuration."""


# ---------------------------------------------------------------- helpers

def _fmt(value) -> str:
    return format(float(value), ".17g")


def _write_csv(path: Path, meta: dict, header: list[str], rows):
    lines = [f"# {k} = {v}" for k, v in meta.items()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(
            _fmt(v) if isinstance(v, (int, float, np.floating)) else str(v)
            for v in row))
    path.write_text("\n".join(lines) + "\n")


def _read_csv(path: Path) -> np.ndarray:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            continue  # header row
    if not rows:
        raise ConfigError(f"no numeric rows in {path}")
    return np.asarray(rows)


def _take(block: dict, schema: dict, where: str) -> dict:
    """Validate a config block against {key: (default, required)}."""
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(block) - set(schema)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: "
                          f"{', '.join(sorted(unknown))}")
    out = {}
    for key, (default, required) in schema.items():
        if key in block:
            out[key] = block[key]
        elif required:
            raise ConfigError(f"missing required key '{key}' in {where}")
        else:
            out[key] = default
    return out


def _load_config(path: str) -> tuple[dict, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = p.read_bytes()
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg, hashlib.sha256(raw).hexdigest()


_TOP_KEYS = {"molecule", "temperature_K", "j_max", "waveform", "seed",
             "method", "synthesize", "evolve", "grape", "anneal",
             "fit-field", "scan", "derivative"}

_WAVEFORM_SCHEMA = {
    "kind": (None, True),
    "A0": (1.0, False),
    "r": (0.5, False),
    "sigma": (False, False),
    "N_sigma": (None, False),
}


def _top(cfg: dict, command: str) -> dict:
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level key(s): "
                          f"{', '.join(sorted(unknown))}")
    method = cfg.get("method")
    if method is not None and method != command:
        raise ConfigError(f"config method {method!r} does not match "
                          f"subcommand {command!r}")
    return cfg


def _molecule(cfg: dict) -> Molecule:
    if "molecule" not in cfg:
        raise ConfigError("missing required key 'molecule'")
    spec = cfg["molecule"]
    if isinstance(spec, str):
        try:
            return molecule(spec)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    return molecule_from_config(spec)


def _waveform(cfg: dict) -> WaveformSpec:
    if "waveform" not in cfg:
        raise ConfigError("missing required key 'waveform'")
    w = _take(cfg["waveform"], _WAVEFORM_SCHEMA, "waveform")
    return WaveformSpec(kind=w["kind"], a0=float(w["A0"]), r=float(w["r"]),
                        sigma_smoothing=bool(w["sigma"]),
                        n_sigma=w["N_sigma"])


def _require_j_max(cfg: dict) -> int:
    if cfg.get("j_max") is None:
        raise ConfigError("missing required key 'j_max'")
    return int(cfg["j_max"])


def _field_model_from(block_value, period: float,
                      samples=None) -> AnalyticFieldModel:
    if block_value == "auto":
        if samples is None:
            raise ConfigError("'auto' model guess needs field samples")
        from .analysis import initial_model_guess
        return initial_model_guess(samples[:, 0], samples[:, 1], period)
    if isinstance(block_value, str):
        return field_model(block_value, period)
    schema = {k: (None, True) for k in
              ("Em_au", "E0", "E1", "E2", "E3", "f1_over_fr", "f2_over_fr",
               "f3_over_fr", "phi1_pi", "phi2_pi", "phi3_pi",
               "sigma1_over_Tr", "sigma2_over_Tr")}
    p = _take(block_value, schema, "field model")
    return AnalyticFieldModel(
        period=period, em=float(p["Em_au"]), e0=float(p["E0"]),
        e1=float(p["E1"]), e2=float(p["E2"]), e3=float(p["E3"]),
        f1=float(p["f1_over_fr"]), f2=float(p["f2_over_fr"]),
        f3=float(p["f3_over_fr"]), phi1=float(p["phi1_pi"]),
        phi2=float(p["phi2_pi"]), phi3=float(p["phi3_pi"]),
        sigma1=float(p["sigma1_over_Tr"]), sigma2=float(p["sigma2_over_Tr"]))


# ------------------------------------------------------------ subcommands

def _run_synthesize(cfg, args, out: Path, manifest: dict) -> list[Path]:
    mol = _molecule(cfg)
    wave = _waveform(cfg)
    j_max = _require_j_max(cfg)
    block = _take(cfg.get("synthesize", {}), {
        "rescale": (False, False),
        "trace_samples": (1000, False),
    }, "synthesize")
    manifest["resolved"]["synthesize"] = block

    target = analytic_fourier(wave, j_max, period=mol.tr)
    state = synthesize_state(target, rescale=bool(block["rescale"]))
    realized = state_to_fourier(state, period=mol.tr)

    taus = np.linspace(0.0, 1.0, int(block["trace_samples"]),
                       endpoint=False)
    trace = fourier_to_timeseries(realized, taus * mol.tr)
    meta = {"seed": manifest["seed"], "molecule": mol.name,
            "command": "synthesize"}
    f_state = out / "state.csv"
    _write_csv(f_state, meta, ["j", "re_C", "im_C"],
               [(j, c.real, c.imag)
                for j, c in zip(state.basis.j_values(), state.amps)])
    f_trace = out / "trace.csv"
    _write_csv(f_trace, meta, ["tau_over_Tr", "cos_theta"],
               zip(taus, trace))
    return [f_state, f_trace]


def _run_evolve(cfg, args, out: Path, manifest: dict) -> list[Path]:
    mol = _molecule(cfg)
    temp = float(cfg.get("temperature_K", 0.0))
    block = _take(cfg.get("evolve", {}), {
        "field_csv": (None, True),
        "steps_per_period": (20000, False),
        "free_periods": (3, False),
        "samples_per_period": (1000, False),
        "cutoff": (0.999, False),
    }, "evolve")
    manifest["resolved"]["evolve"] = block

    data = _read_csv(Path(block["field_csv"]))
    if data.shape[1] < 2:
        raise ConfigError("field CSV needs (t, E) columns")
    knots = data[:, 1].copy()
    knots[0] = knots[-1] = 0.0
    field = SplineField(float(data[-1, 0]), knots)

    j_max = cfg.get("j_max")
    ensemble = boltzmann_channels(
        mol, temp, j_max=int(j_max) if j_max else None,
        cutoff=float(block["cutoff"]))
    steps = int(block["steps_per_period"])
    times_pulse, cos_pulse = pulse_orientation(
        ensemble, field, n_steps=steps, threads=args.threads)
    stride = max(1, steps // int(block["samples_per_period"]))
    # one uniform grid across the pulse/free-evolution seam
    rows = [(t / mol.tr, c) for t, c in
            zip(times_pulse[stride - 1::stride],
                cos_pulse[stride - 1::stride])]

    k = measure_fourier(propagate_ensemble(
        ensemble, field, n_steps=steps, threads=args.threads))
    spacing = stride * field.period / steps
    n_free = int(round(int(block["free_periods"]) * mol.tr / spacing))
    taus = np.arange(1, n_free + 1) * spacing
    free_vals = fourier_to_timeseries(k, taus)
    t_off = times_pulse[stride - 1::stride][-1]
    rows += [((t_off + tau) / mol.tr, c) for tau, c in zip(taus, free_vals)]

    meta = {"seed": manifest["seed"], "molecule": mol.name,
            "temperature_K": temp, "command": "evolve"}
    f_trace = out / "trace.csv"
    _write_csv(f_trace, meta, ["t_over_Tr", "cos_theta"], rows)
    return [f_trace]


def _run_grape(cfg, args, out: Path, manifest: dict) -> list[Path]:
    mol = _molecule(cfg)
    wave = _waveform(cfg)
    j_max = _require_j_max(cfg)
    block = _take(cfg.get("grape", {}), {
        "n_slices": (512, False),
        "substeps": (None, False),
        "max_iter": (1000, False),
        "grad_tol": (1e-12, False),
        "stall_tol": (1e-10, False),
        "stall_iters": (20, False),
        "amp_max": (2e-3, False),
        "ramp_fraction": (0.05, False),
        "init_amp": (3e-4, False),
        "rescale_target": (True, False),
        "trace_samples": (1000, False),
    }, "grape")
    manifest["resolved"]["grape"] = block

    target_k = analytic_fourier(wave, j_max, period=mol.tr)
    psi_target = synthesize_state(target_k,
                                  rescale=bool(block["rescale_target"]))
    from .core import RotorState
    psi0 = RotorState.basis_state(psi_target.basis, 0)
    gcfg = GrapeConfig(
        n_slices=int(block["n_slices"]),
        substeps=block["substeps"] and int(block["substeps"]),
        max_iter=int(block["max_iter"]), grad_tol=float(block["grad_tol"]),
        stall_tol=float(block["stall_tol"]),
        stall_iters=int(block["stall_iters"]),
        amp_max=float(block["amp_max"]),
        ramp_fraction=float(block["ramp_fraction"]),
        init_amp=float(block["init_amp"]), seed=manifest["seed"])
    field, history = optimize_pulse(mol, psi0, psi_target, gcfg)

    meta = {"seed": manifest["seed"], "molecule": mol.name,
            "command": "grape"}
    tgrid = np.linspace(0.0, field.period, 4 * gcfg.n_slices + 1)
    evals = field.values_at(tgrid)
    f_field = out / "field.csv"
    _write_csv(f_field, meta, ["t_atomic_units", "E_atomic_units"],
               zip(tgrid, evals))
    freq, mag = field_spectrum(tgrid[:-1], evals[:-1])
    f_spec = out / "field_spectrum.csv"
    _write_csv(f_spec, meta, ["f_over_fr", "magnitude"],
               zip(freq / mol.fr, mag))
    f_hist = out / "fidelity_history.csv"
    _write_csv(f_hist, meta, ["iteration", "f0", "projection"],
               zip(range(len(history["f0"])), history["f0"],
                   history["projection"]))
    manifest["resolved"]["grape_result"] = {
        "iterations": int(history["iterations"]),
        "reason": history["reason"],
        "final_f0": float(history["f0"][-1]),
        "final_projection": float(history["projection"][-1]),
    }
    return [f_field, f_spec, f_hist]


_ANNEAL_SCHEMA = {
    "T0_MC": (0.1, False),
    "N": (40, False),
    "kappa": (0.08, False),
    "epsilon": (0.01, False),
    "N_MC": (2500, False),
    "E0": (6e-5, False),
    "p": (1.0 / 3.0, False),
    "cooling_epoch": (25, False),
    "temp_floor": (1e-10, False),
    "area_constrained": (False, False),
    "steps_per_period": (2000, False),
    "n_seeds": (1, False),
    "target_j_max": (None, False),
    "trace_samples": (1000, False),
}


def _run_anneal(cfg, args, out: Path, manifest: dict) -> list[Path]:
    mol = _molecule(cfg)
    wave = _waveform(cfg)
    if "temperature_K" not in cfg:
        raise ConfigError("missing required key 'temperature_K'")
    temp = float(cfg["temperature_K"])
    block = _take(cfg.get("anneal", {}), _ANNEAL_SCHEMA, "anneal")
    manifest["resolved"]["anneal"] = block

    j_max = cfg.get("j_max")
    ensemble = boltzmann_channels(mol, temp,
                                  j_max=int(j_max) if j_max else None)
    n_target = block["target_j_max"] or default_target_harmonics(mol, temp)
    if n_target > ensemble.j_max:
        raise ConfigError("target_j_max exceeds the basis j_max")
    target = analytic_fourier(wave, int(n_target), period=mol.tr)
    manifest["resolved"]["anneal"]["target_j_max"] = int(n_target)

    results = []
    for i in range(int(block["n_seeds"])):
        sa = SAConfig(
            t0_mc=float(block["T0_MC"]), n_knots=int(block["N"]),
            kappa=float(block["kappa"]), epsilon=float(block["epsilon"]),
            n_mc=int(block["N_MC"]), e0=float(block["E0"]),
            p=float(block["p"]), cooling_epoch=int(block["cooling_epoch"]),
            temp_floor=float(block["temp_floor"]),
            area_constrained=bool(block["area_constrained"]),
            seed=manifest["seed"] + i,
            steps_per_period=int(block["steps_per_period"]),
            threads=args.threads)
        results.append(anneal(ensemble, target, sa))
    best = min(results, key=lambda r: r.best_f)
    manifest["resolved"]["anneal_result"] = {
        "best_f": best.best_f, "best_iteration": int(best.best_iteration),
        "chains": [r.best_f for r in results],
    }

    meta = {"seed": manifest["seed"], "molecule": mol.name,
            "temperature_K": temp, "command": "anneal"}
    f_field = out / "field.csv"
    _write_csv(f_field, meta, ["t_atomic_units", "E_atomic_units"],
               zip(best.field.knots, best.field.values))
    f_hist = out / "history.csv"
    _write_csv(f_hist, meta,
               ["iteration", "F", "T_MC", "accepted", "area"],
               zip(best.iterations, best.f_current, best.t_mc,
                   best.accepted.astype(int), best.area))

    k = measure_fourier(propagate_ensemble(
        ensemble, best.field, n_steps=int(block["steps_per_period"]),
        threads=args.threads))
    taus = np.linspace(0.0, 1.0, int(block["trace_samples"]),
                       endpoint=False) * mol.tr
    f_trace = out / "trace.csv"
    _write_csv(f_trace, meta, ["tau_over_Tr", "cos_theta"],
               zip(taus / mol.tr, fourier_to_timeseries(k, taus)))
    full_target = analytic_fourier(wave, ensemble.j_max, period=mol.tr)
    f_coeff = out / "coefficients.csv"
    _write_csv(f_coeff, meta,
               ["j", "harmonic", "K_measured_abs", "K_target_abs",
                "in_fom"],
               [(j, j + 1, abs(k.coeffs[j]), abs(full_target.coeffs[j]),
                 int(j < len(target)))
                for j in range(ensemble.j_max)])
    return [f_field, f_hist, f_trace, f_coeff]


def _run_fit_field(cfg, args, out: Path, manifest: dict) -> list[Path]:
    mol = _molecule(cfg)
    block = _take(cfg.get("fit-field", {}), {
        "field_csv": (None, True),
        "initial": (None, True),   # preset name or parameter object
        "n_starts": (16, False),
    }, "fit-field")
    manifest["resolved"]["fit-field"] = {
        k: v for k, v in block.items() if k != "initial"}

    data = _read_csv(Path(block["field_csv"]))
    initial = _field_model_from(block["initial"], mol.tr, samples=data)
    result = fit_model(data[:, 0], data[:, 1], initial,
                       n_starts=int(block["n_starts"]),
                       seed=manifest["seed"])
    manifest["resolved"]["fit_result"] = {
        "residual_rms": result.residual, "improved": result.improved,
        "degenerate": result.degenerate,
    }
    f_params = out / "model_params.txt"
    lines = [f"{k} = {_fmt(v)}" for k, v in
             result.model.parameters().items()]
    lines.append(f"residual_rms = {_fmt(result.residual)}")
    f_params.write_text("\n".join(lines) + "\n")
    f_fit = out / "fitted_field.csv"
    meta = {"seed": manifest["seed"], "molecule": mol.name,
            "command": "fit-field"}
    _write_csv(f_fit, meta, ["t_atomic_units", "E_atomic_units"],
               zip(data[:, 0], result.model.values_at(data[:, 0])))
    return [f_params, f_fit]


def _run_scan(cfg, args, out: Path, manifest: dict) -> list[Path]:
    mol = _molecule(cfg)
    wave = _waveform(cfg)
    block = _take(cfg.get("scan", {}), {
        "model": (None, True),
        "temperatures_K": (None, True),
        "amplitude_factors": (None, True),
        "j_max": (None, False),
        "target_j_max": (None, False),
        "steps_per_period": (2000, False),
        "trace_samples": (500, False),
        "cutoff": (0.999, False),
    }, "scan")
    manifest["resolved"]["scan"] = {
        k: v for k, v in block.items() if k != "model"}

    model = _field_model_from(block["model"], mol.tr)
    temps = [float(t) for t in block["temperatures_K"]]
    factors = [float(f) for f in block["amplitude_factors"]]
    j_max = block["j_max"]
    j_max = int(j_max) if j_max else max(default_j_max(mol, t)
                                         for t in temps)
    design_temp = float(cfg.get("temperature_K", max(temps)))
    n_target = block["target_j_max"] or \
        default_target_harmonics(mol, design_temp)
    if n_target > j_max:
        raise ConfigError("target_j_max exceeds the basis j_max")
    target = analytic_fourier(wave, int(n_target), period=mol.tr)
    manifest["resolved"]["scan"]["target_j_max"] = int(n_target)
    points = robustness_scan(
        model, mol, temps, factors, target, j_max=j_max,
        cutoff=float(block["cutoff"]),
        steps_per_period=int(block["steps_per_period"]),
        threads=args.threads)

    meta = {"seed": manifest["seed"], "molecule": mol.name,
            "command": "scan"}
    f_scan = out / "scan.csv"
    _write_csv(f_scan, meta,
               ["temperature_K", "amp_factor", "fourier_distance",
                "shape_distance"],
               [(p.temperature, p.factor, p.distance, p.shape)
                for p in points])
    files = [f_scan]
    taus = np.linspace(0.0, 1.0, int(block["trace_samples"]),
                       endpoint=False)
    for i, p in enumerate(points):
        f_tr = out / f"trace_{i:03d}.csv"
        m = dict(meta)
        m["temperature_K"] = p.temperature
        m["amp_factor"] = p.factor
        _write_csv(f_tr, m, ["tau_over_Tr", "cos_theta"],
                   zip(taus, fourier_to_timeseries(p.measured,
                                                   taus * mol.tr)))
        files.append(f_tr)
    return files


def _run_derivative(cfg, args, out: Path, manifest: dict) -> list[Path]:
    block = _take(cfg.get("derivative", {}), {
        "trace_csv": (None, True),
    }, "derivative")
    manifest["resolved"]["derivative"] = block
    data = _read_csv(Path(block["trace_csv"]))
    result = orientation_derivative(data[:, 0], data[:, 1])
    meta = {"seed": manifest["seed"], "command": "derivative"}
    f_der = out / "derivative.csv"
    _write_csv(f_der, meta, ["tau_over_Tr", "dcos_dtau"],
               zip(result.times, result.derivative))
    f_peaks = out / "peaks.csv"
    _write_csv(f_peaks, meta, ["peak_tau_over_Tr", "fwhm_over_Tr"],
               zip(result.peak_positions, result.peak_fwhm))
    return [f_der, f_peaks]


_RUNNERS = {
    "synthesize": _run_synthesize,
    "evolve": _run_evolve,
    "grape": _run_grape,
    "anneal": _run_anneal,
    "fit-field": _run_fit_field,
    "scan": _run_scan,
    "derivative": _run_derivative,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotorshape",
        description="design and analyze THz pulses that shape the "
                    "field-free orientation signal of a linear molecule")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $ROTORSHAPE_THREADS "
                            "or 1)")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads is None:
        args.threads = int(os.environ.get("ROTORSHAPE_THREADS", "1"))
    started = time.time()
    try:
        cfg, digest = _load_config(args.config)
        cfg = _top(cfg, args.command)
        seed = int(cfg.get("seed", 0) if args.seed is None else args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        manifest = {
            "command": args.command,
            "config": str(args.config),
            "config_sha256": digest,
            "seed": seed,
            "threads": args.threads,
            "backend": BACKEND,
            "versions": {
                "rotorshape": __version__,
                "python": sys.version.split()[0],
                "numpy": np.__version__,
            },
            "resolved": {},
        }
        import scipy
        manifest["versions"]["scipy"] = scipy.__version__
        files = _RUNNERS[args.command](cfg, args, out, manifest)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleAmplitude, ZeroCoefficient, NonFiniteField,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest["wall_time_s"] = round(time.time() - started, 3)
    manifest["outputs"] = [f.name for f in files]
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
