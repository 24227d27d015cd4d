"""Command-line front end.

Verbs:

* ``run <config-or-preset>``: execute one scenario (lock, bode, psd,
  ber-sweep, or trace) and write CSV reports, an optional SVG, and a run
  manifest that reproduces the outputs byte for byte.
* ``presets``: list the bundled scenarios.
* ``plot <csv> <spec.json>``: render a tool CSV to SVG.

Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, analysis, phasenoise
from .ber import snr_sweep
from .channel import received_trace
from .config import ScenarioConfig, load_config, set_by_path, validate_config
from .cpr import simulate_lock
from .errors import ConfigError, ConvergenceError
from .presets import PRESETS, list_presets, preset_config
from .reports import (
    format_number,
    resolve_output_dir,
    value_slug,
    write_csv,
    write_manifest,
)
from .svgplot import emit_svg

TOOL_NAME = "oqamcpr"


@dataclass
class RunResult:
    """Files written by one scenario run."""

    files: list[Path] = field(default_factory=list)
    manifest: Path | None = None
    metrics: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


def _metric_comments(metrics: dict) -> list[str]:
    parts = []
    for key in sorted(metrics):
        value = metrics[key]
        if value is None:
            parts.append(f"{key}=absent")
        elif isinstance(value, str):
            parts.append(f"{key}={value}")
        else:
            parts.append(f"{key}={format_number(value)}")
    return [" ".join(parts)] if parts else []


def _run_bode(sc: ScenarioConfig, outdir: Path, label: str):
    params = sc.loop_params()
    grid = analysis.log_frequency_grid()
    h = analysis.open_loop_response(params, grid)
    mag_db = 20.0 * np.log10(np.abs(h))
    phase_deg = analysis.open_loop_phase_deg(params, grid)
    metrics_obj = analysis.bode_metrics(params)
    metrics = {
        "dc_gain": metrics_obj.dc_gain,
        "crossover_hz": metrics_obj.crossover_hz,
        "phase_margin_deg": metrics_obj.phase_margin_deg,
        "closed_loop_bw_hz": metrics_obj.closed_loop_bw_hz,
    }
    notes = []
    reference = sc.data["run"].get("reference_metrics")
    if reference:
        notes = [
            f"reference_deviation: {n}"
            for n in analysis.reference_discrepancies(metrics_obj, reference)
        ]
    comments = _metric_comments(metrics) + notes
    path = write_csv(
        outdir / f"{label}.csv",
        ("f_hz", "mag_db", "phase_deg"),
        zip(grid, mag_db, phase_deg),
        comments,
    )
    spec = {
        "x": "f_hz",
        "y": "mag_db",
        "logx": True,
        "title": label,
        "xlabel": "frequency (Hz)",
        "ylabel": "open-loop magnitude (dB)",
    }
    return [path], metrics, notes, spec


def _run_psd(sc: ScenarioConfig, outdir: Path, label: str):
    params = sc.loop_params()
    scen = sc.scenario()
    spectrum = phasenoise.shaped_spectrum(
        scen.laser.linewidth_hz, scen.mismatch.tau_s, params
    )
    metrics = {"variance_rad2": spectrum.variance_rad2}
    path = write_csv(
        outdir / f"{label}.csv",
        ("f_hz", "psd_rad2_per_hz"),
        zip(spectrum.freqs_hz, spectrum.psd_rad2_per_hz),
        _metric_comments(metrics),
    )
    spec = {
        "x": "f_hz",
        "y": "psd_rad2_per_hz",
        "logx": True,
        "logy": True,
        "title": label,
        "xlabel": "frequency (Hz)",
        "ylabel": "PSD (rad^2/Hz)",
    }
    return [path], metrics, [], spec


def _run_ber(sc: ScenarioConfig, outdir: Path, label: str):
    c = sc.constellation()
    scen = sc.scenario()
    params = sc.loop_params()
    tau = scen.mismatch.tau_s
    if scen.laser.linewidth_hz > 0 and tau > 0:
        sigma = math.sqrt(
            phasenoise.total_variance(scen.laser.linewidth_hz, tau, params)
        )
    else:
        sigma = 0.0
    loop_bw = analysis.bode_metrics(params).closed_loop_bw_hz
    sweep = snr_sweep(
        c,
        sigma,
        sc.snr_grid_db(),
        metadata={
            "linewidth_hz": scen.laser.linewidth_hz,
            "delta_l_m": scen.mismatch.delta_l_m,
            "loop_bw_hz": loop_bw,
        },
    )
    metrics = {
        "sigma_pn_rad": sigma,
        "fec_threshold_snr_db": sweep.fec_threshold_snr_db,
        "order": c.order,
        "m_ratio": c.m_ratio,
    }
    notes = []
    if sweep.fec_threshold_snr_db is None:
        notes.append("fec_threshold: grid never crosses the KP4 error floor")
    constants = (c.order, c.m_ratio, scen.laser.linewidth_hz,
                 scen.mismatch.delta_l_m, loop_bw if loop_bw is not None else math.nan)
    path = write_csv(
        outdir / f"{label}.csv",
        ("snr_db", "ber", "ser", "order", "m_ratio", "linewidth_hz",
         "delta_l_m", "loop_bw_hz"),
        (row + constants for row in sweep.rows()),
        _metric_comments(metrics) + notes,
    )
    spec = {
        "x": "snr_db",
        "y": "ber",
        "logy": True,
        "kp4_line": True,
        "title": label,
        "xlabel": "Es/N0 (dB)",
        "ylabel": "BER",
    }
    return [path], metrics, notes, spec


def _run_lock(sc: ScenarioConfig, outdir: Path, label: str):
    run = sc.data["run"]
    report = simulate_lock(
        sc.scenario(),
        sc.constellation(),
        sc.loop_params(),
        sc.detector_method(),
        duration_s=run.get("duration_s", 5e-4),
        seed=run["seed"],
        decimation=run.get("decimation", 1000),
        samples_per_symbol=run.get("samples_per_symbol", 2),
    )
    metrics = {
        "residual_rad": report.residual_rad,
        "lock_point_rad": report.lock_point_rad,
        "locked": report.locked,
    }
    path = write_csv(
        outdir / f"{label}.csv",
        ("time_s", "psi_rad", "delta_phi_rad", "error_v"),
        report.rows(),
        _metric_comments(metrics),
    )
    spec = {
        "x": "time_s",
        "y": "delta_phi_rad",
        "title": label,
        "xlabel": "time (s)",
        "ylabel": "phase error (rad)",
    }
    return [path], metrics, [], spec


def _run_trace(sc: ScenarioConfig, outdir: Path, label: str):
    run = sc.data["run"]
    t, i, q = received_trace(
        sc.constellation(),
        sc.scenario(),
        num_symbols=run.get("num_symbols", 1000),
        samples_per_symbol=run.get("samples_per_symbol", 2),
    )
    path = write_csv(outdir / f"{label}.csv", ("time_s", "i", "q"), zip(t, i, q))
    return [path], {"samples": int(len(t))}, [], None

_MODE_RUNNERS = {
    "bode": _run_bode,
    "psd": _run_psd,
    "ber-sweep": _run_ber,
    "lock": _run_lock,
    "trace": _run_trace,
}


def _resolve_source(source) -> tuple[dict, str | None]:
    if isinstance(source, dict):
        return validate_config(copy.deepcopy(source)), None
    name = str(source)
    if name in PRESETS:
        return validate_config(preset_config(name)), name
    return load_config(name), None


def run_scenario(source, output_dir: str | None = None) -> RunResult:
    """Execute a scenario given a config path, preset name, or dict.

    Writes the mode-appropriate CSV reports (one per sweep value), an
    overlay SVG when requested, and a manifest recording the resolved
    configuration so any run can be replayed exactly.
    """
    cfg, preset_name = _resolve_source(source)
    run = cfg["run"]
    outdir = resolve_output_dir(output_dir, run.get("output_dir"))
    label = run.get("label") or run["mode"].replace("-", "_")
    mode = run["mode"]
    runner = _MODE_RUNNERS[mode]

    variants: list[tuple[str, dict]] = []
    if "sweep" in run:
        key = run["sweep"]["key"]
        for value in run["sweep"]["values"]:
            variant = copy.deepcopy(cfg)
            variant["run"].pop("sweep", None)
            set_by_path(variant, key, value)
            variants.append((f"{label}_{value_slug(value)}", variant))
    else:
        variants.append((label, cfg))

    result = RunResult()
    per_variant_metrics = {}
    plot_spec = None
    for variant_label, variant_cfg in variants:
        files, metrics, notes, plot_spec = runner(
            ScenarioConfig(variant_cfg), outdir, variant_label
        )
        result.files.extend(files)
        result.notes.extend(notes)
        per_variant_metrics[variant_label] = metrics

    result.metrics = (
        per_variant_metrics[label]
        if len(variants) == 1
        else per_variant_metrics
    )

    if run.get("svg") and plot_spec is not None:
        csvs = [f for f in result.files if f.suffix == ".csv"]
        spec = dict(plot_spec)
        spec["title"] = label
        spec["labels"] = [f.stem for f in csvs]
        svg_path = emit_svg(csvs, spec, outdir / f"{label}.svg")
        result.files.append(svg_path)

    manifest_payload = {
        "tool": TOOL_NAME,
        "version": __version__,
        "preset": preset_name,
        "mode": mode,
        "config": cfg,
        "outputs": sorted(f.name for f in result.files),
        "metrics": result.metrics,
        "notes": result.notes,
    }
    result.manifest = write_manifest(outdir / f"{label}_manifest.json", manifest_payload)
    return result


def _cmd_run(args) -> int:
    result = run_scenario(args.config, output_dir=args.output_dir)
    for path in result.files + [result.manifest]:
        print(path)
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    return 0


def _cmd_presets(_args) -> int:
    print(list_presets())
    return 0


def _cmd_plot(args) -> int:
    try:
        spec = json.loads(Path(args.spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load plot spec {args.spec}: {exc}") from exc
    out = args.output or str(Path(args.csv).with_suffix(".svg"))
    try:
        emit_svg(args.csv, spec, out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(out)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="Offset-QAM coherent link and carrier-recovery simulator",
    )
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config file or bundled preset")
    p_run.add_argument("config", help="path to a JSON scenario or a preset name")
    p_run.add_argument("-o", "--output-dir", default=None, help="report directory")
    p_run.set_defaults(func=_cmd_run)

    p_presets = sub.add_parser("presets", help="list bundled presets")
    p_presets.set_defaults(func=_cmd_presets)

    p_plot = sub.add_parser("plot", help="render a tool CSV to SVG")
    p_plot.add_argument("csv", help="CSV report produced by this tool")
    p_plot.add_argument("spec", help="JSON plot specification")
    p_plot.add_argument("-o", "--output", default=None, help="output SVG path")
    p_plot.set_defaults(func=_cmd_plot)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: non-convergence: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
