"""Command-line entry point: ``mdiqkd <subcommand>``.

Exit status is 0 on success, 1 when ``reproduce`` misses a published value
and 2 for usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .channel import simulate_drift
from .config import config_hash, find_setup, load_bundled_scenarios, load_scenario, setup_to_dict
from .datafiles import (ReportBundle, emit_measurements, ingest_measurements, load_bundled_measurements,
                        load_published_rates, write_columns)
from .decoy import DEFAULT_F_EC, REQUIRED_CELLS, decoy_bounds, propagate_uncertainty, secret_key_rate
from .optics import DetectorModel, DistinguishabilityParams, hom_visibility, mode_overlap
from .protocol import run_campaign
from .tables import ConfigurationError, IntensitySet, MissingCellError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_SAMPLES = 20000


class UsageError(Exception):
    """Invalid command-line arguments (exit status 2)."""


def _global_flags(parser, suppress: bool):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=default(0), help="master random seed (default 0)")
    parser.add_argument("--config", default=default(None), help="scenario file (default: bundled setups)")
    parser.add_argument("--out-dir", default=default("mdiqkd-output"), help="directory for output files")
    parser.add_argument("--format", choices=("csv", "tsv"), default=default("csv"),
                        help="delimiter for report and plot-data files")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdiqkd", description="MDI-QKD simulation and decoy-state analysis")
    p.add_argument("--version", action="version", version=f"mdiqkd {__version__}")
    _global_flags(p, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("reproduce", parents=[common], help="secret key rates of the bundled measurements")
    r.add_argument("--f", type=float, default=DEFAULT_F_EC, help="error-correction efficiency")
    r.add_argument("--mu-decoy", type=float, default=None, help="override the decoy mean photon number")
    r.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="Monte-Carlo samples for sigma_S")
    r.add_argument("--data", default=None, help="measurement file (default: bundled)")

    s = sub.add_parser("simulate", parents=[common], help="simulate a full decoy-state campaign")
    s.add_argument("--setup", default=None, help="setup name (default: first in the scenario)")
    s.add_argument("--gates", type=int, default=None, help="gates per cell (default: from duration and rate)")
    s.add_argument("--drift-step", type=float, default=1.0, help="seconds per drift step")
    s.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)

    a = sub.add_parser("analyze", parents=[common], help="analyse a measurement file")
    a.add_argument("table", help="measurement file")
    a.add_argument("--setup", default=None, help="only this setup")
    a.add_argument("--f", type=float, default=DEFAULT_F_EC)
    a.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)

    h = sub.add_parser("hom-scan", parents=[common], help="HOM visibility versus delay and mode overlap")
    h.add_argument("--mu", type=float, default=1e-3, help="mean photon number per pulse")
    h.add_argument("--efficiency", type=float, default=1.0)
    h.add_argument("--dark", type=float, default=0.0, help="dark-count probability per slot")
    h.add_argument("--fwhm", type=float, default=500.0, help="pulse FWHM in ps")
    h.add_argument("--dt-max", type=float, default=1500.0, help="largest delay in ps")
    h.add_argument("--dt-points", type=int, default=61)
    h.add_argument("--overlap-points", type=int, default=21)

    d = sub.add_parser("drift-demo", parents=[common], help="drift with and without stabilization")
    d.add_argument("--setup", default=None)
    d.add_argument("--duration", type=float, default=3600.0, help="seconds")
    d.add_argument("--dt", type=float, default=1.0, help="seconds per sample")
    return p


def _delimiter(args):
    return "\t" if args.format == "tsv" else ","


def _out_path(args, name: str) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _ext(args):
    return "tsv" if args.format == "tsv" else "csv"


def _header(args, digest: str, extra=()):
    return [f"mdiqkd {__version__}", f"command {args.command}", f"config_hash {digest}",
            f"seed {args.seed}", *extra]


def _write_meta(path: Path, args, digest: str):
    # wall-clock facts live beside the data so the data files stay byte-identical
    meta = {"created": datetime.now(timezone.utc).isoformat(), "argv": sys.argv[1:], "config_hash": digest,
            "version": __version__}
    path.with_name(path.name + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def _setups(args):
    return load_scenario(args.config) if args.config else load_bundled_scenarios()


def _pick(setups, name):
    if not setups:
        raise ConfigurationError("scenario file defines no setups")
    return setups[0] if name is None else find_setup(setups, name)


def _check_f(f):
    if not f >= 1.0:
        raise UsageError(f"--f must be >= 1, got {f}")


def _check_samples(n):
    if n < 1000:
        raise UsageError(f"--samples must be >= 1000, got {n}")


def _bundle(name, table, f, samples, seed, digest, metadata=None):
    point = secret_key_rate(table, f)
    try:
        spread = propagate_uncertainty(table, f, samples, seed)
        result = replace(point, sigma_S=spread.sigma_S, n_samples=samples)
    except MissingCellError:
        result = replace(point, sigma_S=math.nan)
    return ReportBundle(name, table, decoy_bounds(table), result, __version__, digest, seed, metadata or {})


def cmd_reproduce(args) -> int:
    _check_f(args.f)
    _check_samples(args.samples)
    tables = ingest_measurements(args.data) if args.data else load_bundled_measurements()
    if args.mu_decoy is not None:
        adjusted = {}
        for name, t in tables.items():
            mu = t.intensities
            try:
                new = IntensitySet(mu.mu_signal, args.mu_decoy, mu.mu_vacuum, mu.sigma_mu_signal, mu.sigma_mu_decoy)
            except ValueError as exc:
                raise ConfigurationError(f"--mu-decoy for setup {name}: {exc}") from exc
            adjusted[name] = t.with_intensities(new)
        tables = adjusted
    for name, t in tables.items():
        missing = t.missing_cells(REQUIRED_CELLS)
        if missing:
            raise MissingCellError(missing)
    published = load_published_rates()
    ok = True
    rows = []
    for name, table in tables.items():
        digest = config_hash({"table": table, "f": args.f, "samples": args.samples})
        bundle = _bundle(name, table, args.f, args.samples, args.seed, digest)
        path = _out_path(args, f"reproduce_{name}.{_ext(args)}")
        bundle.write(path, "reproduce", _delimiter(args))
        _write_meta(path, args, digest)
        s = bundle.result.S
        pub = published.get(name)
        passed = s > 0 and (pub is None or abs(s - pub[0]) <= pub[1])
        ok &= passed
        rows.append((name, s, bundle.result.sigma_S, pub, passed))
    print(f"{'setup':<6} {'S computed':>12} {'sigma':>10} {'S published':>12} {'sigma':>10}  result")
    for name, s, sig, pub, passed in rows:
        ps, psig = pub if pub else (math.nan, math.nan)
        print(f"{name:<6} {s:12.3e} {sig:10.2e} {ps:12.3e} {psig:10.2e}  {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_analyze(args) -> int:
    _check_f(args.f)
    _check_samples(args.samples)
    tables = ingest_measurements(args.table)
    if args.setup is not None:
        if args.setup not in tables:
            raise ConfigurationError(f"setup {args.setup!r} not in {args.table}; available: {sorted(tables)}")
        tables = {args.setup: tables[args.setup]}
    for name, table in tables.items():
        missing = table.missing_cells(REQUIRED_CELLS)
        if missing:
            raise MissingCellError(missing)
        digest = config_hash({"table": table, "f": args.f, "samples": args.samples})
        bundle = _bundle(name, table, args.f, args.samples, args.seed, digest)
        path = _out_path(args, f"analysis_{name}.{_ext(args)}")
        bundle.write(path, "analyze", _delimiter(args))
        _write_meta(path, args, digest)
        r = bundle.result
        flags = f"  flags: {', '.join(r.flags)}" if r.flags else ""
        print(f"{name}: S = {r.S:.3e} +/- {r.sigma_S:.2e} bits per gate{flags}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    _check_samples(args.samples)
    if args.gates is not None and args.gates < 1:
        raise UsageError(f"--gates must be >= 1, got {args.gates}")
    if not args.drift_step > 0:
        raise UsageError("--drift-step must be positive")
    setup = _pick(_setups(args), args.setup)
    digest = config_hash({"setup": setup_to_dict(setup), "gates": args.gates, "drift_step": args.drift_step})
    campaign = run_campaign(setup, args.gates, args.seed, args.drift_step)
    table_path = _out_path(args, f"simulate_{setup.name}_table.csv")
    emit_measurements({setup.name: campaign.table}, table_path, _header(args, digest, [f"setup {setup.name}"]))
    _write_meta(table_path, args, digest)
    meta = {"duty_fraction": campaign.duty_fraction, "wall_clock_s": campaign.total_wall_clock,
            "gates_per_cell": next(iter(campaign.counts.values())).gates_sent}
    bundle = _bundle(setup.name, campaign.table, setup.f_ec, args.samples, args.seed, digest, meta)
    report_path = _out_path(args, f"simulate_{setup.name}.{_ext(args)}")
    bundle.write(report_path, "simulate", _delimiter(args))
    _write_meta(report_path, args, digest)
    r = bundle.result
    print(f"{setup.name}: {meta['gates_per_cell']} gates per cell, "
          f"{campaign.total_wall_clock / 3600:.2f} h of acquisition")
    print(f"  Q_ss^z = {r.Q_ss_z:.3e}, e_ss^z = {r.e_ss_z:.4f}, e11^x <= {r.e11_x_upper:.4f}")
    print(f"  S = {r.S:.3e} +/- {r.sigma_S:.2e} bits per gate" + (f"  flags: {', '.join(r.flags)}" if r.flags else ""))
    return EXIT_OK


def cmd_hom_scan(args) -> int:
    if not args.mu > 0:
        raise UsageError("--mu must be positive")
    if args.dt_points < 2 or args.overlap_points < 2:
        raise UsageError("--dt-points and --overlap-points must be >= 2")
    try:
        det = DetectorModel(efficiency=args.efficiency, dark_count_prob=args.dark)
        DistinguishabilityParams(0.0, args.fwhm)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    digest = config_hash({"mu": args.mu, "detector": det, "fwhm": args.fwhm, "dt_max": args.dt_max,
                          "dt_points": args.dt_points, "overlap_points": args.overlap_points})
    delays = np.linspace(-args.dt_max, args.dt_max, args.dt_points)
    v_delay = [hom_visibility(args.mu, mode_overlap(DistinguishabilityParams(float(t), args.fwhm)), det)
               for t in delays]
    overlaps = np.linspace(0.0, 1.0, args.overlap_points)
    v_overlap = [hom_visibility(args.mu, float(z), det) for z in overlaps]
    head = _header(args, digest, [f"mu {args.mu!r}", f"efficiency {args.efficiency!r}", f"dark {args.dark!r}",
                                  f"fwhm_ps {args.fwhm!r}"])
    p1 = _out_path(args, f"hom_delay.{_ext(args)}")
    write_columns(p1, {"delta_t_ps": delays, "visibility": v_delay}, head, _delimiter(args))
    p2 = _out_path(args, f"hom_overlap.{_ext(args)}")
    write_columns(p2, {"overlap": overlaps, "visibility": v_overlap}, head, _delimiter(args))
    for p in (p1, p2):
        _write_meta(p, args, digest)
    print(f"peak visibility {max(v_delay):.4f} at delay 0; written {p1} and {p2}")
    return EXIT_OK


def cmd_drift_demo(args) -> int:
    if not args.duration > 0 or not args.dt > 0:
        raise UsageError("--duration and --dt must be positive")
    if args.dt > args.duration:
        raise UsageError("--dt must not exceed --duration")
    setup = _pick(_setups(args), args.setup)
    digest = config_hash({"drift": setup.drift, "initial": setup.initial_drift, "stabilizer": setup.stabilizer,
                          "fwhm": setup.pulse_fwhm, "duration": args.duration, "dt": args.dt})
    traces = {}
    for stabilized in (0, 1):
        stab = setup.stabilizer if stabilized else replace(setup.stabilizer, enabled=False)
        # the same seed drives both runs, so they share the environment noise
        traces[stabilized] = simulate_drift(setup.initial_drift, args.duration, args.dt, setup.drift, stab,
                                            args.seed, setup.pulse_fwhm)
    cols = {k: [] for k in ("t_s", "stabilized", "delta_t_ps", "pol_overlap", "delta_nu_mhz", "mode_overlap",
                            "timing_correction")}
    for stabilized, tr in traces.items():
        cols["t_s"] += list(tr.time)
        cols["stabilized"] += [stabilized] * len(tr)
        cols["delta_t_ps"] += list(tr.delta_t)
        cols["pol_overlap"] += list(tr.pol_overlap)
        cols["delta_nu_mhz"] += list(tr.delta_nu)
        cols["mode_overlap"] += list(tr.overlap)
        cols["timing_correction"] += [int(x) for x in tr.timing_corrected]
    means = {k: float(np.mean(tr.overlap)) for k, tr in traces.items()}
    head = _header(args, digest, [f"setup {setup.name}", f"mean_overlap_free {means[0]!r}",
                                  f"mean_overlap_stabilized {means[1]!r}"])
    path = _out_path(args, f"drift_{setup.name}.{_ext(args)}")
    write_columns(path, cols, head, _delimiter(args))
    _write_meta(path, args, digest)
    print(f"{setup.name}: mean mode overlap {means[0]:.4f} free, {means[1]:.4f} stabilized; written {path}")
    return EXIT_OK


COMMANDS = {"reproduce": cmd_reproduce, "simulate": cmd_simulate, "analyze": cmd_analyze,
            "hom-scan": cmd_hom_scan, "drift-demo": cmd_drift_demo}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mdiqkd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigurationError, MissingCellError, FileNotFoundError) as exc:
        print(f"mdiqkd {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
