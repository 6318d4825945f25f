"""Command-line interface: basis tables, echo traces, delay scans, spectra.

Every output CSV starts with a provenance header (`# key = value` lines
holding the fully resolved configuration and the package version) so a
result file documents the run that produced it.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources

import numpy as np

from . import __version__
from .basis import BasisProjectionError, UnitSystem, build_basis
from .classical import mean_height_series, propagate, sample_initial
from .pulses import KickPulse
from .quantum import (NormDriftError, StateVector, ground_state,
                      mean_height_trace)
from .quadrature import QuadratureError
from .spectroscopy import (DelayScan, find_peaks_and_match,
                           retrieve_amplitudes, scan_delay, spectrum)

PRESETS = ("fig1", "fig2", "fig4", "fig5", "fig6")


class ConfigError(ValueError):
    """Bad config file, unknown key, or inconsistent options."""


# ---------------------------------------------------------------- config

def _parse_bool(s):
    if s.lower() in ("true", "yes", "1"):
        return True
    if s.lower() in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# schema: key -> (type, default); REQUIRED means no default
REQUIRED = object()

_SCHEMAS = {
    "classical-echo": {
        "n": (int, REQUIRED),
        "mu_z": (float, REQUIRED),
        "mu_v": (float, REQUIRED),
        "sigma_z": (float, REQUIRED),
        "sigma_v": (float, REQUIRED),
        "seed": (int, REQUIRED),
        "kick_amplitude": (float, REQUIRED),
        "kick_width": (float, REQUIRED),
        "kick_time": (float, REQUIRED),
        "t_max": (float, REQUIRED),
        "dt_sample": (float, REQUIRED),
        "steps_per_sigma": (int, 200),
    },
    "quantum-echo": {
        "basis_size": (int, REQUIRED),
        "kind": (str, REQUIRED),
        "initial": (str, REQUIRED),
        "mu_z": (float, 0.0),
        "sigma_z": (float, 0.0),
        "amplitude1": (float, REQUIRED),
        "width1": (float, REQUIRED),
        "time1": (float, REQUIRED),
        "amplitude2": (float, 0.0),
        "width2": (float, 1.0),
        "time2": (float, 0.0),
        "t_max": (float, REQUIRED),
        "dt_sample": (float, REQUIRED),
        "spin_average": (_parse_bool, True),
        "steps_per_sigma": (int, 500),
    },
    "scan": {
        "basis_size": (int, REQUIRED),
        "kind": (str, REQUIRED),
        "amplitude1": (float, REQUIRED),
        "width1": (float, REQUIRED),
        "amplitude2": (float, REQUIRED),
        "width2": (float, REQUIRED),
        "tau_min": (float, REQUIRED),
        "tau_max": (float, REQUIRED),
        "dtau": (float, REQUIRED),
        "spin_average": (_parse_bool, True),
        "steps_per_sigma": (int, 500),
    },
}


def parse_config_text(text, mode):
    """Flat `key = value` config; '#' comments; unknown keys are fatal."""
    schema = _SCHEMAS[mode]
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in schema:
            raise ConfigError(f"line {lineno}: unknown key {key!r} for mode {mode!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        conv = schema[key][0]
        try:
            raw[key] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    cfg = {}
    for key, (_, default) in schema.items():
        if key in raw:
            cfg[key] = raw[key]
        elif default is REQUIRED:
            raise ConfigError(f"missing required key {key!r} for mode {mode!r}")
        else:
            cfg[key] = default
    return cfg


def load_config(args, mode):
    if (args.config is None) == (args.preset is None):
        raise ConfigError("exactly one of --config and --preset is required")
    if args.preset is not None:
        ref = resources.files("qbounce.presets") / f"{args.preset}.cfg"
        text = ref.read_text()
    else:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    cfg = parse_config_text(text, mode)
    if getattr(args, "seed", None) is not None and "seed" in cfg:
        cfg["seed"] = args.seed
    return cfg


# ---------------------------------------------------------------- output

def _resolve_out(args, path):
    if path is None:
        return None
    out_dir = getattr(args, "out_dir", None)
    return os.path.join(out_dir, path) if out_dir else path


def write_csv(path, header_items, columns, rows):
    """CSV with '# key = value' provenance lines, full double precision."""
    lines = [f"# version = {__version__}"]
    lines += [f"# {k} = {v}" for k, v in header_items]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(
            f"{v:.17g}" if isinstance(v, float) else str(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def read_scan_csv(path):
    """Read a scan CSV back, including its provenance header."""
    header = {}
    rows = []
    columns = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, _, v = body.partition("=")
                    header[k.strip()] = v.strip()
            elif columns is None:
                columns = line.split(",")
            else:
                rows.append([float(x) for x in line.split(",")])
    if columns is None or not rows:
        raise ConfigError(f"{path}: no data rows")
    data = np.asarray(rows)
    return header, columns, data


def _maybe_plot(args, path, plot_fn):
    if not getattr(args, "plot", False):
        return
    try:
        import matplotlib
        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("plotting requested but matplotlib is unavailable; skipped",
              file=sys.stderr)
        return
    fig, ax = plt.subplots()
    plot_fn(ax)
    fig.savefig(path)
    plt.close(fig)


# ---------------------------------------------------------------- commands

def cmd_basis(args):
    basis = build_basis(args.M)
    rows = []
    for i in range(1, basis.m + 1):
        omega = basis.zeros[i - 1] - basis.zeros[0]
        rows.append((i, float(basis.zeros[i - 1]), float(basis.norms[i - 1]),
                     float(omega)))
    write_csv(_resolve_out(args, args.out), [("M", args.M)],
              ["i", "energy", "norm", "omega_i1"], rows)
    return 0


def cmd_classical_echo(args):
    cfg = load_config(args, "classical-echo")
    pulse = KickPulse(cfg["kick_amplitude"], cfg["kick_width"],
                      cfg["kick_time"], "magnetic")
    times = np.arange(0.0, cfg["t_max"] + 1e-9, cfg["dt_sample"])
    series = mean_height_series(cfg["n"], cfg["mu_z"], cfg["mu_v"],
                                cfg["sigma_z"], cfg["sigma_v"], cfg["seed"],
                                [pulse], times,
                                steps_per_sigma=cfg["steps_per_sigma"])
    avg = 0.5 * (series[1] + series[-1])
    rows = list(zip(times, series[1], series[-1], avg))
    write_csv(_resolve_out(args, args.out), sorted(cfg.items()),
              ["t", "z_plus", "z_minus", "z_avg"], rows)

    if args.snapshot:
        snap_times = sorted(float(t) for t in args.snapshot.split(","))
        rows = []
        for s in (1, -1):
            ens = sample_initial(cfg["n"], cfg["mu_z"], cfg["mu_v"],
                                 cfg["sigma_z"], cfg["sigma_v"], cfg["seed"],
                                 spin=s)
            for t in snap_times:
                ens = propagate(ens, t, [pulse],
                                steps_per_sigma=cfg["steps_per_sigma"])
                rows += [(t, float(z), float(v), s)
                         for z, v in zip(ens.z, ens.v)]
        write_csv(_resolve_out(args, "snapshots.csv"), sorted(cfg.items()),
                  ["t", "z", "v", "s"], rows)

    _maybe_plot(args, _resolve_out(args, "classical_echo.svg"),
                lambda ax: (ax.plot(times, avg), ax.set_xlabel("t"),
                            ax.set_ylabel("mean height")))
    return 0


def _quantum_pulses(cfg):
    pulses = [KickPulse(cfg["amplitude1"], cfg["width1"], cfg["time1"],
                        cfg["kind"])]
    if cfg["amplitude2"] != 0.0:
        pulses.append(KickPulse(cfg["amplitude2"], cfg["width2"],
                                cfg["time2"], cfg["kind"]))
    return pulses


def cmd_quantum_echo(args):
    cfg = load_config(args, "quantum-echo")
    if cfg["kind"] not in ("magnetic", "shake"):
        raise ConfigError(f"unknown kind {cfg['kind']!r}")
    basis = build_basis(cfg["basis_size"])
    pulses = _quantum_pulses(cfg)

    if cfg["initial"] == "gaussian":
        if cfg["mu_z"] <= 0 or cfg["sigma_z"] <= 0:
            raise ConfigError("gaussian initial state needs mu_z, sigma_z > 0")
        coeffs, _ = basis.project_gaussian(cfg["mu_z"], cfg["sigma_z"])
        coeffs = coeffs.astype(np.complex128)
    elif cfg["initial"] == "ground":
        coeffs = ground_state(basis).coeffs
    else:
        raise ConfigError(f"unknown initial state {cfg['initial']!r}")

    # start early enough that the first pulse window is fully covered
    t_start = min(0.0, min(p.window[0] for p in pulses))
    times = np.arange(t_start, cfg["t_max"] + 1e-9, cfg["dt_sample"])
    state = StateVector(coeffs, t_start)

    spins = (1, -1) if (cfg["spin_average"] and cfg["kind"] == "magnetic") \
        else (1,)
    traces, norms = {}, 1.0
    for s in spins:
        traces[s], final = mean_height_trace(
            basis, state, pulses, s, times,
            steps_per_sigma=cfg["steps_per_sigma"])
        norms = final.norm
    z_plus = traces[spins[0]]
    z_minus = traces[spins[-1]]
    avg = 0.5 * (z_plus + z_minus)
    rows = [(t, zp, zm, za, norms)
            for t, zp, zm, za in zip(times, z_plus, z_minus, avg)]
    write_csv(_resolve_out(args, args.out), sorted(cfg.items()),
              ["t", "z_plus", "z_minus", "z_avg", "norm"], rows)
    _maybe_plot(args, _resolve_out(args, "quantum_echo.svg"),
                lambda ax: (ax.plot(times, avg), ax.set_xlabel("t"),
                            ax.set_ylabel("mean height")))
    return 0


def cmd_scan(args):
    cfg = load_config(args, "scan")
    if cfg["kind"] not in ("magnetic", "shake"):
        raise ConfigError(f"unknown kind {cfg['kind']!r}")
    basis = build_basis(cfg["basis_size"])
    p1 = KickPulse(cfg["amplitude1"], cfg["width1"], 0.0, cfg["kind"])
    p2 = KickPulse(cfg["amplitude2"], cfg["width2"], 0.0, cfg["kind"])
    n = int(round((cfg["tau_max"] - cfg["tau_min"]) / cfg["dtau"])) + 1
    delays = cfg["tau_min"] + cfg["dtau"] * np.arange(n)
    scan = scan_delay(basis, p1, p2, delays,
                      spin_average=cfg["spin_average"],
                      steps_per_sigma=cfg["steps_per_sigma"])
    rows = [(t, p, int(o)) for t, p, o
            in zip(scan.delays, scan.populations, scan.overlap)]
    write_csv(_resolve_out(args, args.out), sorted(cfg.items()),
              ["tau", "population", "overlap"], rows)
    _maybe_plot(args, _resolve_out(args, "scan.svg"),
                lambda ax: (ax.plot(scan.delays, scan.populations),
                            ax.set_xlabel("delay"),
                            ax.set_ylabel("ground-state population")))
    return 0


def _scan_from_csv(path):
    header, columns, data = read_scan_csv(path)
    if columns[:2] != ["tau", "population"]:
        raise ConfigError(f"{path}: expected scan columns tau,population")
    overlap = data[:, 2].astype(bool) if len(columns) > 2 else None
    kind = header.get("kind", "magnetic")
    scan = DelayScan(data[:, 0], data[:, 1], kind, overlap)
    if "basis_size" not in header:
        raise ConfigError(f"{path}: provenance header lacks basis_size")
    return scan, int(header["basis_size"]), header


def cmd_spectrum(args):
    scan, basis_size, header = _scan_from_csv(args.infile)
    basis = build_basis(basis_size)
    spec = spectrum(scan, window=args.window)
    spec = find_peaks_and_match(spec, basis, args.count,
                                noise_floor=args.noise_floor)
    if len(spec.matches) < args.count:
        print(f"warning: found {len(spec.matches)} of {args.count} peaks",
              file=sys.stderr)
    rows = list(zip(spec.frequencies, spec.amplitudes))
    write_csv(_resolve_out(args, args.out),
              sorted(header.items()) + [("window", args.window)],
              ["omega", "magnitude"], rows)
    peaks = [{"i": m.state, "omega_measured": m.omega_measured,
              "omega_theory": m.omega_theory,
              "rel_error_percent": m.rel_error_percent}
             for m in spec.matches]
    peaks_path = _resolve_out(args, args.peaks)
    if peaks_path is None:
        json.dump(peaks, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        with open(peaks_path, "w") as fh:
            json.dump(peaks, fh, indent=2)
    _maybe_plot(args, _resolve_out(args, "spectrum.svg"),
                lambda ax: (ax.semilogy(spec.frequencies, spec.amplitudes),
                            ax.set_xlabel("angular frequency"),
                            ax.set_ylabel("magnitude")))
    return 0


def cmd_retrieve(args):
    scan, basis_size, _ = _scan_from_csv(args.infile)
    basis = build_basis(basis_size)
    amps, residual = retrieve_amplitudes(scan, basis, args.count)
    payload = {
        "states": [{"i": a.state, "magnitude": a.magnitude, "phase": a.phase,
                    "phase_ambiguity": a.phase_ambiguity} for a in amps],
        "fit_residual_rms": residual,
        "version": __version__,
    }
    out = _resolve_out(args, args.out)
    if out is None:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        with open(out, "w") as fh:
            json.dump(payload, fh, indent=2)
    return 0


def cmd_convert(args):
    if (args.mass is None) != (args.gravity is None):
        raise ConfigError("--mass and --gravity must be given together")
    if args.mass is not None:
        units = UnitSystem(mass=args.mass, gravity=args.gravity)
    else:
        units = UnitSystem.neutron()
    if args.quantity == "gradient":
        if args.direction != "to-dimensionless":
            raise ConfigError("gradient converts only to-dimensionless (a_k)")
        value = units.kick_amplitude(args.value)
    elif args.direction == "to-si":
        value = units.to_si(args.value, args.quantity)
    else:
        value = units.from_si(args.value, args.quantity)
    print(f"{value:.17g}")
    return 0


# ---------------------------------------------------------------- wiring

class _Parser(argparse.ArgumentParser):
    # usage problems are configuration errors: exit 1, not argparse's 2
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_io_flags(sp, default_out):
    sp.add_argument("--out", default=default_out, help="output CSV path")
    sp.add_argument("--out-dir", default=None, help="directory for outputs")
    sp.add_argument("--plot", action="store_true",
                    help="also write an SVG plot (requires matplotlib)")


def _add_config_flags(sp):
    sp.add_argument("--config", default=None, help="flat key=value config file")
    sp.add_argument("--preset", default=None, choices=PRESETS,
                    help="built-in configuration")


def build_parser():
    parser = _Parser(prog="qbounce",
                     description="Quantum bouncer echoes and kick spectroscopy")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS thread count (best effort, via env)")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("basis", help="eigenbasis table (energies, frequencies)")
    sp.add_argument("--M", type=int, required=True, help="number of states")
    _add_io_flags(sp, None)
    sp.set_defaults(fn=cmd_basis)

    sp = sub.add_parser("classical-echo", help="classical ensemble echo trace")
    _add_config_flags(sp)
    sp.add_argument("--seed", type=int, default=None, help="override config seed")
    sp.add_argument("--snapshot", default=None,
                    help="comma-separated times for phase-space CSV dumps")
    _add_io_flags(sp, "series.csv")
    sp.set_defaults(fn=cmd_classical_echo)

    sp = sub.add_parser("quantum-echo", help="wave-packet echo trace")
    _add_config_flags(sp)
    _add_io_flags(sp, "series.csv")
    sp.set_defaults(fn=cmd_quantum_echo)

    sp = sub.add_parser("scan", help="two-kick delay scan of |c_1|^2")
    _add_config_flags(sp)
    _add_io_flags(sp, "scan.csv")
    sp.set_defaults(fn=cmd_scan)

    sp = sub.add_parser("spectrum", help="FFT spectrum and peak extraction")
    sp.add_argument("--in", dest="infile", required=True, help="scan CSV")
    sp.add_argument("--peaks", default="peaks.json", help="peak list JSON path")
    sp.add_argument("--count", type=int, default=5, help="peaks to extract")
    sp.add_argument("--window", default="hann", choices=("hann", "none"))
    sp.add_argument("--noise-floor", type=float, default=1e-4,
                    help="peak threshold as a fraction of the strongest line")
    _add_io_flags(sp, "spec.csv")
    sp.set_defaults(fn=cmd_spectrum)

    sp = sub.add_parser("retrieve", help="amplitude/phase retrieval from a scan")
    sp.add_argument("--in", dest="infile", required=True, help="scan CSV")
    sp.add_argument("--count", type=int, default=4,
                    help="number of excited states to fit")
    sp.add_argument("--out", default="amps.json", help="output JSON path")
    sp.add_argument("--out-dir", default=None, help="directory for outputs")
    sp.set_defaults(fn=cmd_retrieve)

    sp = sub.add_parser("convert", help="dimensionless <-> SI unit conversion")
    sp.add_argument("value", type=float)
    sp.add_argument("--quantity", required=True,
                    choices=("length", "time", "energy", "gradient"))
    sp.add_argument("--direction", required=True,
                    choices=("to-si", "to-dimensionless"))
    sp.add_argument("--mass", type=float, default=None,
                    help="particle mass in kg (default: neutron)")
    sp.add_argument("--gravity", type=float, default=None,
                    help="gravitational acceleration in m/s^2")
    sp.set_defaults(fn=cmd_convert)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (QuadratureError, NormDriftError, BasisProjectionError,
            ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
