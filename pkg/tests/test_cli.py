import json

import numpy as np

from rotorshape.cli import main

WAVE = {"kind": "sawtooth", "A0": 0.3, "sigma": True}


def write_config(tmp_path, data, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run(args):
    return main([str(a) for a in args])


def test_missing_molecule_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, {"waveform": WAVE, "j_max": 3})
    assert run(["synthesize", "--config", cfg, "--out", tmp_path]) == 2
    assert "molecule" in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, {"molecule": "OCS", "waveform": WAVE,
                                  "j_max": 3, "typo_key": 1})
    assert run(["synthesize", "--config", cfg, "--out", tmp_path]) == 2
    assert "typo_key" in capsys.readouterr().err


def test_unknown_block_key_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "molecule": "OCS", "waveform": WAVE, "j_max": 3,
        "synthesize": {"rescale": True, "oops": 1}})
    assert run(["synthesize", "--config", cfg, "--out", tmp_path]) == 2
    assert "oops" in capsys.readouterr().err


def test_method_mismatch_exits_2(tmp_path):
    cfg = write_config(tmp_path, {"molecule": "OCS", "waveform": WAVE,
                                  "j_max": 3, "method": "grape"})
    assert run(["synthesize", "--config", cfg, "--out", tmp_path]) == 2


def test_infeasible_amplitude_exits_3(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "molecule": "OCS", "j_max": 3,
        "waveform": {"kind": "sawtooth", "A0": 1.0}})
    assert run(["synthesize", "--config", cfg, "--out", tmp_path]) == 3
    assert "rescale" in capsys.readouterr().err


def test_synthesize_outputs_and_determinism(tmp_path):
    cfg = write_config(tmp_path, {
        "molecule": "OCS", "waveform": WAVE, "j_max": 4, "seed": 7,
        "synthesize": {"trace_samples": 64}})
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    assert run(["synthesize", "--config", cfg, "--out", out1]) == 0
    assert run(["synthesize", "--config", cfg, "--out", out2]) == 0
    for name in ("state.csv", "trace.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["seed"] == 7
    assert manifest["outputs"] == ["state.csv", "trace.csv"]
    assert "# seed = 7" in (out1 / "trace.csv").read_text()
    header = (out1 / "state.csv").read_text().splitlines()
    assert header[3] == "j,re_C,im_C"  # header row after meta comments


def test_seed_flag_overrides_config(tmp_path):
    cfg = write_config(tmp_path, {"molecule": "OCS", "waveform": WAVE,
                                  "j_max": 4, "seed": 7})
    out = tmp_path / "o"
    assert run(["synthesize", "--config", cfg, "--out", out,
                "--seed", 99]) == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 99


def test_anneal_defaults_echoed(tmp_path):
    cfg = write_config(tmp_path, {
        "molecule": "OCS", "temperature_K": 0.0, "j_max": 3,
        "waveform": {"kind": "sawtooth", "A0": 0.05},
        "anneal": {"N_MC": 3, "N": 6, "steps_per_period": 32,
                   "target_j_max": 3, "trace_samples": 16}})
    out = tmp_path / "o"
    assert run(["anneal", "--config", cfg, "--out", out]) == 0
    resolved = json.loads((out / "manifest.json").read_text())["resolved"]
    # omitted parameters come back at their published defaults
    assert resolved["anneal"]["T0_MC"] == 0.1
    assert resolved["anneal"]["kappa"] == 0.08
    assert resolved["anneal"]["epsilon"] == 0.01
    assert resolved["anneal"]["E0"] == 6e-5
    assert resolved["anneal"]["N_MC"] == 3
    for name in ("field.csv", "history.csv", "trace.csv",
                 "coefficients.csv"):
        assert (out / name).is_file()


def test_grape_run_tiny(tmp_path):
    cfg = write_config(tmp_path, {
        "molecule": "OCS", "waveform": {"kind": "sawtooth", "A0": 0.2},
        "j_max": 2,
        "grape": {"n_slices": 8, "substeps": 2, "max_iter": 4}})
    out = tmp_path / "o"
    assert run(["grape", "--config", cfg, "--out", out]) == 0
    for name in ("field.csv", "field_spectrum.csv",
                 "fidelity_history.csv"):
        assert (out / name).is_file()
    resolved = json.loads((out / "manifest.json").read_text())["resolved"]
    assert "final_projection" in resolved["grape_result"]


def test_evolve_and_derivative_pipeline(tmp_path):
    from rotorshape.core import molecule
    mol = molecule("OCS")
    knots = np.linspace(0, mol.tr, 8)
    values = 1e-4 * np.sin(np.pi * knots / mol.tr)
    field_csv = tmp_path / "field.csv"
    field_csv.write_text("t_atomic_units,E_atomic_units\n" + "\n".join(
        f"{t:.17g},{v:.17g}" for t, v in zip(knots, values)) + "\n")

    cfg = write_config(tmp_path, {
        "molecule": "OCS", "temperature_K": 0.0, "j_max": 4,
        "evolve": {"field_csv": str(field_csv), "steps_per_period": 64,
                   "free_periods": 2, "samples_per_period": 32}})
    out = tmp_path / "evolve"
    assert run(["evolve", "--config", cfg, "--out", out]) == 0
    trace = out / "trace.csv"
    assert trace.is_file()

    cfg2 = write_config(tmp_path, {"derivative": {"trace_csv": str(trace)}},
                        name="deriv.json")
    out2 = tmp_path / "deriv"
    assert run(["derivative", "--config", cfg2, "--out", out2]) == 0
    assert (out2 / "derivative.csv").is_file()
    assert (out2 / "peaks.csv").is_file()


def test_fit_field_run(tmp_path):
    from rotorshape.analysis import field_model
    from rotorshape.core import molecule
    mol = molecule("CO")
    model = field_model("sawtooth-30K", mol.tr)
    t = np.linspace(0, mol.tr, 60)
    csv = tmp_path / "field.csv"
    csv.write_text("t,E\n" + "\n".join(
        f"{a:.17g},{b:.17g}" for a, b in zip(t, model.values_at(t))) + "\n")
    cfg = write_config(tmp_path, {
        "molecule": "CO",
        "fit-field": {"field_csv": str(csv), "initial": "sawtooth-30K",
                      "n_starts": 1}})
    out = tmp_path / "o"
    assert run(["fit-field", "--config", cfg, "--out", out]) == 0
    params = (out / "model_params.txt").read_text()
    assert "Em_au" in params and "residual_rms" in params
    assert (out / "fitted_field.csv").is_file()


def test_scan_run_tiny(tmp_path):
    cfg = write_config(tmp_path, {
        "molecule": "CO", "temperature_K": 10.0,
        "waveform": {"kind": "sawtooth", "A0": 0.005},
        "scan": {"model": "sawtooth-30K", "temperatures_K": [10.0],
                 "amplitude_factors": [1.0, 0.5], "j_max": 6,
                 "target_j_max": 4, "steps_per_period": 64,
                 "trace_samples": 16}})
    out = tmp_path / "o"
    assert run(["scan", "--config", cfg, "--out", out]) == 0
    lines = (out / "scan.csv").read_text().splitlines()
    assert lines[3].startswith("temperature_K")
    assert len(lines) == 6  # 3 meta + header + 2 grid points
    assert (out / "trace_000.csv").is_file()
    assert (out / "trace_001.csv").is_file()
