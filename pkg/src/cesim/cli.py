"""Command-line entry point.

Angles are accepted in degrees on the boundary and converted to radians
internally.  Option precedence, lowest first: built-in defaults, the
``CESIM_SEED`` environment variable (seed only), the ``--config`` file,
explicit flags.  The config file is plain text, one ``key = value`` pair
per line, ``#`` comments allowed; keys are the long option names without
the leading dashes (for example ``xi-deg = 22.5``).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path as FsPath

import numpy as np

from . import eventstream, experiments
from .detection import CoincidenceSetting, selection_efficiency
from .experiments import ExperimentConfig, RunMode, SelfCheckError, Table, emit_csv
from .interferometer import EraserSetting
from .source import DetuningGrid, GridMode, SourceConfig, sample_n_pairs

ENV_SEED = "CESIM_SEED"

_DEFAULTS = {
    "xi-deg": None,
    "theta-deg": None,
    "tau-s": 3.0e-6,
    "tau-si-s": 0.0,
    "delta-hz": 1.0e6,
    "grid": None,
    "pairs": 200_000,
    "seed": 20230730,
    "mode": "analytic",
    "window-ps": 1000,
    "out": None,
    "format": "csv",
    "threads": 1,
    "mu": 0.1,
    "rate": 1.0e6,
    "jitter": False,
    "bin-ps": 50_000,
    "range-ps": 8_000_000,
    "samples": 100_000,
    "in": None,
    "hist-out": None,
    "a-deg": 0.0,
    "a2-deg": 45.0,
    "b-deg": -22.5,
    "b2-deg": -67.5,
    "raw": False,
}

_CASTS = {
    "xi-deg": float,
    "theta-deg": float,
    "tau-s": float,
    "tau-si-s": float,
    "delta-hz": float,
    "grid": str,
    "pairs": int,
    "seed": int,
    "mode": str,
    "window-ps": int,
    "out": str,
    "format": str,
    "threads": int,
    "mu": float,
    "rate": float,
    "jitter": lambda s: str(s).strip().lower() in ("1", "true", "yes", "on"),
    "bin-ps": int,
    "range-ps": int,
    "samples": int,
    "in": str,
    "hist-out": str,
    "a-deg": float,
    "a2-deg": float,
    "b-deg": float,
    "b2-deg": float,
    "raw": lambda s: str(s).strip().lower() in ("1", "true", "yes", "on"),
}

SUBCOMMANDS = (
    "local",
    "correlation",
    "fig2a",
    "fig2b",
    "dephasing",
    "chsh",
    "events-generate",
    "events-match",
    "selftest",
)


class CliError(Exception):
    pass


@dataclass(slots=True)
class CliInvocation:
    subcommand: str
    options: dict


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--xi-deg", type=float, default=None, help="port A analyzer angle in degrees")
    parser.add_argument("--theta-deg", type=float, default=None, help="port B analyzer angle in degrees")
    parser.add_argument("--tau-s", type=float, default=None, help="arm delay in seconds")
    parser.add_argument("--tau-si-s", type=float, default=None, help="electronic inter-detector delay in seconds")
    parser.add_argument("--delta-hz", type=float, default=None, help="modulation bandwidth in Hz (default 1e6)")
    parser.add_argument("--grid", default=None, metavar="LO:HI:STEP", help="detuning grid in Hz")
    parser.add_argument("--pairs", type=int, default=None, help="generated pairs per stochastic point")
    parser.add_argument("--seed", type=int, default=None, help="random seed")
    parser.add_argument("--mode", choices=["analytic", "mc", "both"], default=None)
    parser.add_argument("--window-ps", type=int, default=None, help="coincidence window in ps")
    parser.add_argument("--out", default=None, help="output file path")
    parser.add_argument("--format", choices=["csv"], default=None)
    parser.add_argument("--threads", type=int, default=None, help="worker cap for stochastic sweeps")
    parser.add_argument("--raw", action="store_const", const=True, default=None,
                        help="report raw squared amplitudes instead of peak-normalized values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cesim",
        description="Interferometric polarization-path correlation simulator",
        epilog="Config file: one 'key = value' per line, '#' comments; keys are long "
        "option names without dashes prefix, e.g. 'xi-deg = 22.5'. Flags override "
        "the file; the CESIM_SEED environment variable seeds runs at lowest precedence.",
    )
    parser.add_argument("--config", default=None, help="key=value option file")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    for name, text in (
        ("local", "local intensities against the arm delay"),
        ("correlation", "print the normalized joint correlation for one setting"),
        ("fig2a", "per-detuning zero-delay correlation table"),
        ("fig2b", "correlation fringe against the summed analyzer angle"),
        ("dephasing", "ensemble-averaged intensities against the arm delay"),
        ("chsh", "CHSH combination of the joint fringe"),
        ("events-generate", "synthesize a binary time-tag stream"),
        ("events-match", "match coincidences in a binary time-tag stream"),
        ("selftest", "run the built-in invariant battery"),
    ):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        if name == "dephasing":
            p.add_argument("--samples", type=int, default=None, help="detuning samples for the average")
        if name == "chsh":
            p.add_argument("--a-deg", type=float, default=None)
            p.add_argument("--a2-deg", type=float, default=None)
            p.add_argument("--b-deg", type=float, default=None)
            p.add_argument("--b2-deg", type=float, default=None)
        if name == "events-generate":
            p.add_argument("--mu", type=float, default=None, help="mean photon number per window")
            p.add_argument("--rate", type=float, default=None, help="emission attempts per second")
            p.add_argument("--jitter", action="store_const", const=True, default=None,
                           help="exponential inter-detector delay of scale tau_c/2")
        if name == "events-match":
            p.add_argument("--in", dest="in_path", default=None, help="input stream path")
            p.add_argument("--hist-out", default=None, help="write the delay histogram CSV here")
            p.add_argument("--bin-ps", type=int, default=None)
            p.add_argument("--range-ps", type=int, default=None)
    return parser


def _read_config(path: str) -> dict:
    entries = {}
    text = FsPath(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _DEFAULTS:
            raise CliError(f"{path}:{lineno}: unknown option '{key}'")
        try:
            entries[key] = _CASTS[key](value)
        except ValueError as exc:
            raise CliError(f"{path}:{lineno}: bad value for '{key}': {value}") from exc
    return entries


def parse_args(argv=None) -> CliInvocation:
    parser = build_parser()
    ns = parser.parse_args(argv)
    cli_values = vars(ns)
    subcommand = cli_values.pop("subcommand")
    config_path = cli_values.pop("config", None)

    options = dict(_DEFAULTS)
    env_seed = os.environ.get(ENV_SEED)
    if env_seed is not None:
        try:
            options["seed"] = int(env_seed)
        except ValueError as exc:
            raise CliError(f"{ENV_SEED} must be an integer, got {env_seed!r}") from exc
    if config_path is not None:
        options.update(_read_config(config_path))
    for key, value in cli_values.items():
        if value is not None:
            options[key.replace("_", "-").replace("in-path", "in")] = value
    return CliInvocation(subcommand, options)


def _parse_grid(text: str | None, delta_big: float) -> DetuningGrid | None:
    if text is None:
        return None
    parts = text.split(":")
    if len(parts) != 3:
        raise CliError(f"--grid expects LO:HI:STEP, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise CliError(f"--grid expects numeric LO:HI:STEP, got {text!r}") from exc
    try:
        return DetuningGrid(GridMode.GRID, lo, hi, step)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _experiment_config(options: dict) -> ExperimentConfig:
    return ExperimentConfig(
        delta_big=options["delta-hz"],
        grid=_parse_grid(options["grid"], options["delta-hz"]),
        tau=options["tau-s"],
        n_pairs=options["pairs"],
        seed=options["seed"],
        mode=RunMode(options["mode"]),
        threads=options["threads"],
        raw_values=bool(options["raw"]),
    )


def _eraser(options: dict, default_xi=45.0, default_theta=45.0) -> EraserSetting:
    xi = options["xi-deg"] if options["xi-deg"] is not None else default_xi
    theta = options["theta-deg"] if options["theta-deg"] is not None else default_theta
    return EraserSetting(math.radians(xi), math.radians(theta))


def _deliver(table: Table, options: dict) -> None:
    if options["out"] is not None:
        emit_csv(table, options["out"])
        print(f"wrote {options['out']} ({len(table.rows)} rows)")
    else:
        print(",".join(table.columns))
        for row in table.rows:
            print(",".join(experiments._fmt(v) for v in row))


def _cmd_local(options: dict) -> int:
    cfg = _experiment_config(options)
    table = experiments.run_local(cfg, _eraser(options))
    _deliver(table, options)
    return 0


def _cmd_correlation(options: dict) -> int:
    cfg = _experiment_config(options)
    eraser = _eraser(options, default_xi=0.0, default_theta=0.0)
    cs = CoincidenceSetting.for_bandwidth(cfg.delta_big, tau_si=options["tau-si-s"])
    setting = experiments.setting_for(cfg.delta_big, cfg.tau)
    value = experiments.analytic_r(setting, eraser, cs, raw=cfg.raw_values)
    print(f"R_normalized = {format(value, '.17g')}")
    return 0


def _cmd_fig2a(options: dict) -> int:
    cfg = _experiment_config(options)
    if options["xi-deg"] is not None or options["theta-deg"] is not None:
        xi = options["xi-deg"] if options["xi-deg"] is not None else 0.0
        theta = options["theta-deg"] if options["theta-deg"] is not None else 0.0
        table = experiments.run_fig2a(cfg, angles_deg=[(xi, theta)])
    else:
        table = experiments.run_fig2a(cfg)
    _deliver(table, options)
    return 0


def _cmd_fig2b(options: dict) -> int:
    cfg = _experiment_config(options)
    theta = options["theta-deg"] if options["theta-deg"] is not None else 0.0
    table = experiments.run_fig2b(cfg, theta_deg=theta)
    _deliver(table, options)
    return 0


def _cmd_dephasing(options: dict) -> int:
    cfg = _experiment_config(options)
    table = experiments.run_dephasing(cfg, _eraser(options), n_samples=options["samples"])
    _deliver(table, options)
    return 0


def _cmd_chsh(options: dict) -> int:
    cfg = _experiment_config(options)
    angles = (options["a-deg"], options["a2-deg"], options["b-deg"], options["b2-deg"])
    result = experiments.run_chsh(cfg, angles_deg=angles, tau_si=options["tau-si-s"])
    _deliver(result.table, options)
    print(f"S = {format(result.s_analytic, '.17g')}")
    if result.s_mc is not None:
        print(f"S_mc = {format(result.s_mc, '.17g')} +- {format(result.s_mc_err, '.17g')}")
    return 0


def _cmd_events_generate(options: dict) -> int:
    if options["out"] is None:
        raise CliError("events-generate needs --out")
    grid = _parse_grid(options["grid"], options["delta-hz"])
    src = SourceConfig(
        mu=options["mu"],
        rate=options["rate"],
        delta_big=options["delta-hz"],
        grid=grid,
        seed=options["seed"],
    )
    batch = sample_n_pairs(src, options["pairs"])
    eraser = None
    if options["xi-deg"] is not None or options["theta-deg"] is not None:
        eraser = _eraser(options, default_xi=0.0, default_theta=0.0)
    cs = CoincidenceSetting.for_bandwidth(options["delta-hz"], tau_si=options["tau-si-s"])
    stream = eventstream.synthesize_stream(
        batch, eraser=eraser, coincidence=cs, jitter=bool(options["jitter"]),
        seed=np.random.SeedSequence(options["seed"]).spawn(1)[0],
    )
    FsPath(options["out"]).write_bytes(eventstream.encode_stream(stream))
    efficiency = selection_efficiency(batch)
    print(
        f"wrote {options['out']}: {len(stream)} records from {len(batch)} pairs "
        f"(pre-analyzer accepted fraction {efficiency:.4f})"
    )
    return 0


def _cmd_events_match(options: dict) -> int:
    if options["in"] is None:
        raise CliError("events-match needs --in")
    data = FsPath(options["in"]).read_bytes()
    stream = eventstream.decode_stream(data)
    records = eventstream.match_coincidences(stream, options["window-ps"])
    accepted = [r for r in records if r.accepted]
    print(
        f"{len(stream)} records, {len(records)} candidates, {len(accepted)} accepted coincidences"
    )
    if options["out"] is not None:
        eventstream.write_coincidences_csv(records, options["out"])
        print(f"wrote {options['out']}")
    if options["hist-out"] is not None:
        hist = eventstream.histogram_tau_si(accepted, options["bin-ps"], options["range-ps"])
        eventstream.write_histogram_csv(hist, options["hist-out"])
        print(f"wrote {options['hist-out']}")
    return 0


def _cmd_selftest(options: dict) -> int:
    from .selftest import run_selftest

    return run_selftest(seed=options["seed"])


_DISPATCH = {
    "local": _cmd_local,
    "correlation": _cmd_correlation,
    "fig2a": _cmd_fig2a,
    "fig2b": _cmd_fig2b,
    "dephasing": _cmd_dephasing,
    "chsh": _cmd_chsh,
    "events-generate": _cmd_events_generate,
    "events-match": _cmd_events_match,
    "selftest": _cmd_selftest,
}


def run(invocation: CliInvocation) -> int:
    handler = _DISPATCH[invocation.subcommand]
    try:
        return handler(invocation.options)
    except SelfCheckError as exc:
        print(f"self-check failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error on {getattr(exc, 'filename', '?')}: {exc.strerror or exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    try:
        invocation = parse_args(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(invocation)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
