"""Command-line experiment runner.

Each subcommand loads a configuration (a bundled preset by default), runs
one analysis or simulation, and writes a deterministic CSV whose schema is
versioned in the leading comment line.

    helperhr sweep-distance --out sweep.csv
    helperhr montecarlo --config my.ini --trials 100000 --seed 7 --out mc.csv
"""

from __future__ import annotations

import argparse
import csv
import math
import sys

import numpy as np

from . import distributions as dist
from . import montecarlo as mc
from .config import ConfigError, ExperimentConfig, load_config
from .link import (db_re_1w, eta_link_gain, noise_power, noise_psd,
                   received_power_conventional, tag_input_amplitude,
                   tag_input_power, uplink_gain, downlink_gain, watts_to_dbm)
from .tag import SecondHarmonicTable, beta_coefficient

CSV_VERSION = "helperhr-csv v1"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _write_csv(path: str, subcommand: str, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION} subcommand={subcommand}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _load(args) -> ExperimentConfig:
    return load_config(args.config)


def _merged_run(config: ExperimentConfig, args):
    trials = args.trials if args.trials is not None else config.run.trials
    seed = args.seed if args.seed is not None else config.run.seed
    mode = args.mode if args.mode is not None else config.run.mode
    return trials, seed, mode


def _gamma2_db(scenario) -> float:
    return 10.0 * math.log10(scenario.gamma2)


def cmd_link_budget(args) -> int:
    config = _load(args)
    sysp, tag, geo = config.system, config.tag, config.geometry
    d = geo.rn_distance
    scen = config.scenario()
    row = [
        d,
        float(uplink_gain(d, sysp, tag)),
        float(downlink_gain(d, sysp, tag)),
        float(tag_input_amplitude(d, sysp, tag)),
        float(db_re_1w(tag_input_power(d, sysp, tag))),
        float(watts_to_dbm(received_power_conventional(d, sysp, tag, "quadratic"))),
        float(watts_to_dbm(received_power_conventional(d, sysp, tag, "exact"))),
        noise_psd(sysp),
        float(watts_to_dbm(noise_power(sysp))),
        float(eta_link_gain(d, sysp, tag)),
        scen.gamma2,
    ]
    _write_csv(args.out, "link-budget",
               ["d_m", "h_u", "h_d", "A_r_v", "P_in_dBm",
                "P_rec_quadratic_dBm", "P_rec_exact_dBm", "N0_v2_per_hz",
                "P_n_dBm", "eta", "gamma2"], [row])
    return 0


def cmd_sweep_distance(args) -> int:
    config = _load(args)
    sysp, tag = config.system, config.tag
    d = np.geomspace(args.d_min, args.d_max, args.points)
    a_max = float(tag_input_amplitude(args.d_min, sysp, tag)) * 1.05
    table = SecondHarmonicTable(tag, a_max, n_points=4096)
    p_in = tag_input_power(d, sysp, tag)
    p_quad = received_power_conventional(d, sysp, tag, "quadratic")
    p_exact = received_power_conventional(d, sysp, tag, "exact", harmonic_table=table)
    rows = zip(d, db_re_1w(p_in), watts_to_dbm(p_quad), watts_to_dbm(p_exact))
    _write_csv(args.out, "sweep-distance",
               ["d_m", "P_in_dBm", "P_rec_quadratic_dBm", "P_rec_exact_dBm"],
               rows)
    return 0


def cmd_pdf_alpha(args) -> int:
    config = _load(args)
    if args.gamma2_db is not None:
        gamma2 = 10.0 ** (args.gamma2_db / 10.0)
    else:
        gamma2 = config.scenario().gamma2
    slot = args.slot if args.slot is not None else config.frame.helper_count
    pdf = dist.alpha_pdf_recursive(slot, gamma2)
    g2db = 10.0 * math.log10(gamma2)
    rows = ((a, f, slot, g2db) for a, f in zip(pdf.grid, pdf.density))
    _write_csv(args.out, "pdf-alpha",
               ["alpha", "density", "slot_index", "gamma2_dB"], rows)
    return 0


def cmd_percentiles(args) -> int:
    config = _load(args)
    m_list = args.m_list or [config.frame.helper_count]
    if args.gamma2_db_list:
        g2_dbs = args.gamma2_db_list
    else:
        g2_dbs = [_gamma2_db(config.scenario())]
    p_list = args.p_list or [10.0, 50.0]
    rows = []
    for g2db in g2_dbs:
        gamma2 = 10.0 ** (g2db / 10.0)
        chain = dist.alpha_pdf_chain(max(m_list), gamma2)
        for M in m_list:
            pdf = chain[M]
            for p in p_list:
                alpha_p = pdf.percentile(p)
                rows.append([M, g2db, p, alpha_p / M, float(np.cbrt(2 * alpha_p))])
    _write_csv(args.out, "percentiles",
               ["M", "gamma2_dB", "p", "G_alpha_norm", "G_ref"], rows)
    return 0


def cmd_slot_bounds(args) -> int:
    config = _load(args)
    scen = config.scenario()
    n0 = scen.noise_psd
    # received power of the sweeping tone's self term at unit amplitude
    # ratio; the SNR bound scales from it
    p_h = scen.eta**2 * scen.a_r**4 if args.p_h_min is None else args.p_h_min
    ppm = args.ppm if args.ppm is not None else config.impairments.ppm_error
    omega_er = 1e-6 * ppm * config.system.omega0
    rows = []
    infeasible = 0
    for M in range(args.m_min, args.m_max + 1):
        if M >= 2 and omega_er <= 0:
            print("slot-bounds: ppm must be > 0 for the upper bound",
                  file=sys.stderr)
            return 2
        b = dist.slot_bounds(M, args.dtheta_max, omega_er if M >= 2 else 1.0,
                             args.gamma2_min, n0, p_h)
        infeasible += 0 if b.feasible else 1
        rows.append([M, b.t_min, b.t_max, b.feasible])
    _write_csv(args.out, "slot-bounds",
               ["M", "Ts_min_s", "Ts_max_s", "feasible"], rows)
    if infeasible:
        print(f"slot-bounds: {infeasible} infeasible row(s) flagged",
              file=sys.stderr)
    return 0


def cmd_montecarlo(args) -> int:
    config = _load(args)
    trials, seed, mode = _merged_run(config, args)
    scen = config.scenario()
    imp = config.impairments
    if args.trace:
        alpha_m, (al, ph, _) = mc.simulate_trials(
            scen, imp, trials=trials, seed=seed, mode=mode, trace=True)
    else:
        alpha_m = mc.simulate_trials(scen, imp, trials=trials, seed=seed, mode=mode)
    zeta = np.cbrt(2.0 * alpha_m)
    M = scen.helper_count
    columns = ["trial", "alpha_M", "zeta_pa"]
    if args.trace:
        columns += [f"alpha_{i + 1}" for i in range(M)]
        columns += [f"phi_er_{i + 1}" for i in range(M - 1)]
        rows = ([t, alpha_m[t], zeta[t], *al[t], *ph[t]] for t in range(trials))
    else:
        rows = ([t, alpha_m[t], zeta[t]] for t in range(trials))
    _write_csv(args.out, "montecarlo", columns, rows)

    z_conv = dist.ref_conventional(M)
    summary = [[M, _gamma2_db(scen), scen.slot_duration, imp.ppm_error,
                float(np.percentile(alpha_m, 10)) / M,
                float(np.percentile(alpha_m, 50)) / M,
                float(np.mean(zeta > z_conv))]]
    _write_csv(_summary_path(args.out), "montecarlo-summary",
               ["M", "gamma2_dB", "Ts_s", "ppm", "p10", "p50",
                "frac_exceeding_conventional"], summary)
    return 0


def _summary_path(path: str) -> str:
    stem, dot, ext = path.rpartition(".")
    if not dot:
        return path + ".summary"
    return f"{stem}.summary.{ext}"


def cmd_ref_cdf(args) -> int:
    config = _load(args)
    trials, seed, mode = _merged_run(config, args)
    m_list = args.m_list or [config.frame.helper_count]
    imp = config.impairments
    d = config.geometry.rn_distance
    rows = []
    for M in m_list:
        from .link import Geometry
        geo = Geometry(d, (d,) * M)
        scen = mc.Scenario.from_link_budget(
            config.system, config.tag, geo, config.frame.slot_duration,
            tag_model=config.run.tag_model)
        res = mc.ref_cdf(scen, imp, trials=trials, seed=seed, mode=mode)
        step = max(1, trials // args.cdf_points)
        for k in range(0, trials, step):
            rows.append([M, res.zeta[k], res.cdf[k], res.zeta_coherent,
                         res.zeta_conventional])
    _write_csv(args.out, "ref-cdf",
               ["M", "zeta_pa", "cdf", "zeta_coh", "zeta_conv"], rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="xband-sto2020",
                        help="config file (INI or JSON) or preset name")
    common.add_argument("--seed", type=int, default=None,
                        help="override run.seed")
    common.add_argument("--trials", type=int, default=None,
                        help="override run.trials")
    common.add_argument("--out", default=None, help="output CSV path")
    common.add_argument("--mode", choices=("envelope", "waveform"),
                        default=None, help="override run.mode")
    common.add_argument("--trace", action="store_true",
                        help="emit per-slot columns where supported")

    parser = argparse.ArgumentParser(
        prog="helperhr",
        description="Harmonic radar link analysis with phase-coherent helper tones")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("link-budget", parents=[common],
                   help="single-geometry link numbers")

    p = sub.add_parser("sweep-distance", parents=[common],
                       help="power vs distance sweep")
    p.add_argument("--d-min", type=float, default=0.1)
    p.add_argument("--d-max", type=float, default=30.0)
    p.add_argument("--points", type=int, default=200)

    p = sub.add_parser("pdf-alpha", parents=[common],
                       help="analytic amplitude-ratio density")
    p.add_argument("--slot", type=int, default=None)
    p.add_argument("--gamma2-dB", dest="gamma2_db", type=float, default=None)

    p = sub.add_parser("percentiles", parents=[common],
                       help="analytic percentile tables")
    p.add_argument("--m-list", type=int, nargs="+", default=None)
    p.add_argument("--gamma2-dB-list", dest="gamma2_db_list", type=float,
                   nargs="+", default=None)
    p.add_argument("--p-list", type=float, nargs="+", default=None)

    p = sub.add_parser("slot-bounds", parents=[common],
                       help="slot-duration bounds vs M")
    p.add_argument("--m-min", type=int, default=2)
    p.add_argument("--m-max", type=int, default=8)
    p.add_argument("--dtheta-max", type=float, default=math.pi / 8)
    p.add_argument("--gamma2-min", type=float, default=1.0)
    p.add_argument("--ppm", type=float, default=None)
    p.add_argument("--p-h-min", type=float, default=None)

    sub.add_parser("montecarlo", parents=[common],
                   help="protocol Monte Carlo")

    p = sub.add_parser("ref-cdf", parents=[common],
                       help="empirical range-extension CDFs")
    p.add_argument("--m-list", type=int, nargs="+", default=None)
    p.add_argument("--cdf-points", type=int, default=2000)

    return parser


_COMMANDS = {
    "link-budget": cmd_link_budget,
    "sweep-distance": cmd_sweep_distance,
    "pdf-alpha": cmd_pdf_alpha,
    "percentiles": cmd_percentiles,
    "slot-bounds": cmd_slot_bounds,
    "montecarlo": cmd_montecarlo,
    "ref-cdf": cmd_ref_cdf,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.out is None:
        args.out = f"{args.command}.csv"
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"helperhr: config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"helperhr: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
