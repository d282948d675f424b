"""Command line entry point: ``wgfeedback <subcommand> [options]``.

Exit status: 0 when every assertion passes, 1 when one fails, 2 on bad input.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, dump_config, init_vector, load_config
from .io import RunManifest, csv_units, write_columns, write_json
from .presets import PRESETS, Check, Context, PresetResult, run_preset

log = logging.getLogger("wgfeedback")


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--out", type=Path, default=d(None), help="output directory (nothing written if omitted)")
    p.add_argument("--seed", type=int, default=d(None), help="master seed (unsigned 64-bit)")
    p.add_argument("--dt", type=float, default=d(None), help="override the step size")
    p.add_argument("--t-end", type=float, default=d(None), help="override the final time")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wgfeedback", description="Waveguide feedback simulations.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(ap, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preset", parents=[common], help="run a named experiment and its assertion")
    p.add_argument("name", nargs="?", choices=list(PRESETS), metavar="NAME")
    p.add_argument("--all", action="store_true", help="run every preset (the acceptance suite)")
    p.add_argument("--list", action="store_true", help="list presets and exit")
    p.add_argument("--n-traj", type=int, default=None, help="ensemble size for SME presets")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("simulate", parents=[common], help="run a YAML network configuration")
    p.add_argument("config", type=Path)

    p = sub.add_parser("bloch", parents=[common], help="driven-dissipative Bloch equations")
    p.add_argument("--rabi", type=float, default=0.0)
    p.add_argument("--detuning", type=float, default=0.0, help="Y, the effective detuning")
    p.add_argument("--gamma-eff", type=float, required=True)
    p.add_argument("--gamma-env", type=float, default=0.0)
    p.add_argument("--points", type=int, default=1001)

    p = sub.add_parser("sme", parents=[common], help="homodyne feedback trajectory ensemble")
    p.add_argument("--gamma-right", type=float, default=0.5)
    p.add_argument("--gamma-left", type=float, default=0.5)
    p.add_argument("--V", type=float, default=300.0, help="g_f^2 / Gamma_eff")
    p.add_argument("--loss", type=float, default=0.01, help="waveguide loss rate")
    p.add_argument("--position-pi", type=float, default=1.0, help="atom position in units of pi / omega_a")
    p.add_argument("--omega-a", type=float, default=50.0)
    p.add_argument("--rabi", type=float, default=0.0)
    p.add_argument("--n-traj", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-project", action="store_true", help="do not clip states back into the Bloch ball")

    p = sub.add_parser("oracle-check", parents=[common], help="delay equations vs discretized waveguide")
    p.add_argument("--config", type=Path, default=None, help="network config (default: one atom, gamma 0.5)")
    p.add_argument("--ladder", type=int, nargs="+", default=[512, 1024, 2048, 4096])
    return ap


def _report(res: PresetResult, stream=None) -> None:
    stream = stream or sys.stdout
    print(f"[{'PASS' if res.passed else 'FAIL'}] {res.name} ({res.runtime:.2f} s)", file=stream)
    for c in res.checks:
        print("    " + c.line(), file=stream)


def _finish(name: str, checks: list, runtime: float, args, files=(), info=None) -> PresetResult:
    res = PresetResult(name, checks, list(files), runtime, info or {})
    if args.out is not None:
        res.files.append(write_json(args.out / f"{name}_summary.json", res.summary()))
    _report(res)
    return res


def cmd_preset(args) -> int:
    if args.list:
        for k, (_, desc) in PRESETS.items():
            print(f"{k:12s} {desc}")
        return 0
    names = list(PRESETS) if args.all else [args.name] if args.name else []
    if not names:
        print("give a preset name or --all", file=sys.stderr)
        return 2
    ctx = Context(out=args.out, dt=args.dt, t_end=args.t_end, n_traj=args.n_traj, workers=args.workers)
    if args.seed is not None:
        ctx.seed = args.seed
    failed = []
    for n in names:
        res = run_preset(n, ctx)
        _report(res)
        if not res.passed:
            failed.append(n)
    if len(names) > 1:
        print(f"{len(names) - len(failed)}/{len(names)} presets passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return 1 if failed else 0


def cmd_simulate(args) -> int:
    from . import graph
    from .one_excitation import simulate_one_excitation, write_amplitude_csv
    from .two_excitation import PairState, default_kgrid, simulate_pair_amplitudes, simulate_single_photon_component, write_two_excitation_csv

    cfg = load_config(args.config)
    run = dict(cfg.run)
    if args.dt is not None:
        run["dt"] = args.dt
    if args.t_end is not None:
        run["t_end"] = args.t_end
    net = cfg.network
    t0 = time.perf_counter()
    files = []
    checks = []
    if run["mode"] == "one-excitation":
        res = simulate_one_excitation(net, init_vector(run), run["t_end"], run["dt"], run["record_every"])
        total = float(np.max(res.populations.sum(axis=1)))
        checks.append(Check("atom population never exceeds the initial norm", total <= np.sum(np.abs(init_vector(run)) ** 2) + 1e-9,
                            total, "<= initial norm"))
        if args.out is not None:
            p = args.out / "amplitudes.csv"
            write_amplitude_csv(p, res.times, res.amplitudes, res.photon_probability)
            files.append(p)
            snaps = [graph.snapshot_one_excitation(res, float(t)).to_json() for t in np.linspace(0, res.times[-1], 9)]
            files.append(write_json(args.out / "graph.json", snaps))
    else:
        j, l = run["pair"]
        traj = simulate_pair_amplitudes(net, PairState.excited(net.n_atoms, j - 1, l - 1), run["t_end"], run["dt"], run["record_every"])
        fld = None
        if run["kgrid_points"]:
            grid = default_kgrid(net, run["kgrid_points"], run["kgrid_width"])
            fld = simulate_single_photon_component(net, traj, grid, run["t_end"], run["dt"])
        total = float(np.max(np.sum(np.abs(traj.states) ** 2, axis=1)))
        checks.append(Check("pair weight never exceeds 1", total <= 1 + 1e-9, total, "<= 1"))
        if args.out is not None:
            p = args.out / "pairs.csv"
            write_two_excitation_csv(p, traj, net.n_atoms, fld)
            files.append(p)
            if fld is not None:
                snaps = [graph.snapshot_two_excitation(traj, fld, float(t), net.n_atoms).to_json() for t in fld.times[:: max(1, len(fld.times) // 8)]]
                files.append(write_json(args.out / "graph.json", snaps))
    runtime = time.perf_counter() - t0
    if args.out is not None:
        resolved = args.out / "resolved_config.yaml"
        cfg.run = run
        resolved.write_text(dump_config(cfg))
        files.append(resolved)
        man = RunManifest(str(args.config), cfg.manifest(), {}, [f.name for f in files], csv_units(files), wall_clock=runtime)
        files.append(man.write(args.out / "manifest.json"))
    return 0 if _finish("simulate", checks, runtime, args, files).passed else 1


def cmd_bloch(args) -> int:
    from .open_system import DriveParams, bloch_drift, bloch_trajectory, steady_sigma_z, steady_sigma_z_decay

    p = DriveParams(args.rabi, args.detuning, args.gamma_eff, args.gamma_env)
    t_end = args.t_end or (50.0 / args.gamma_eff if args.gamma_eff > 0 else 100.0)
    times = np.linspace(0.0, t_end, args.points)
    A, B = bloch_drift(p)
    t0 = time.perf_counter()
    traj = bloch_trajectory(A, B, [0, 0, -1], times)
    runtime = time.perf_counter() - t0
    checks = []
    if args.gamma_eff > 0:
        target = steady_sigma_z_decay(p) if args.gamma_env else steady_sigma_z(p)
        sz = float(traj[-1, 2].real)
        settled = args.t_end is None
        checks.append(Check("final <sz> vs closed-form steady state", (not settled) or abs(sz - target) < 1e-4, sz,
                            f"{target:.6g} within 1e-4" + ("" if settled else " (not enforced: custom --t-end)")))
    if args.out is not None:
        write_columns(args.out / "bloch.csv", {"t": times, "re_sp": traj[:, 0].real, "im_sp": traj[:, 0].imag,
                                               "re_sm": traj[:, 1].real, "im_sm": traj[:, 1].imag, "sz": traj[:, 2].real})
    return 0 if _finish("bloch", checks, runtime, args).passed else 1


def cmd_sme(args) -> int:
    from .network import AtomSpec, effective_rates
    from .open_system import BlochVector, DriveParams, FeedbackParams, steady_sigma_z_feedback
    from .presets import DEFAULT_SEED, FIG4_BURN_IN, FIG4_DT, FIG4_T_END
    from .sme import run_ensemble

    atom = AtomSpec(args.position_pi * math.pi / args.omega_a, args.gamma_right, args.gamma_left, args.omega_a)
    rates = effective_rates(atom, args.loss)
    drive = DriveParams(args.rabi, rates.Y, rates.gamma_eff)
    fb = FeedbackParams(math.sqrt(args.V * rates.gamma_eff), args.gamma_right)
    seed = DEFAULT_SEED if args.seed is None else args.seed
    t_end = args.t_end or FIG4_T_END
    t0 = time.perf_counter()
    ens = run_ensemble(drive, fb, BlochVector.ground(), t_end, args.dt or FIG4_DT, args.n_traj, seed,
                       workers=args.workers, project=not args.no_project, max_violation_rate=None,
                       burn_in=min(FIG4_BURN_IN, t_end / 2))
    runtime = time.perf_counter() - t0
    target = steady_sigma_z_feedback(drive, fb)
    mean, se = float(ens.mean_sz[-1]), float(ens.stderr_sz[-1])
    checks = [Check("final ensemble <sz> vs steady state", abs(mean - target) <= 3 * se, mean,
                    f"{target:.6g} within 3 stderr ({3 * se:.3g})", f"bloch-ball violation rate {ens.violation_rate:.3g}")]
    if args.out is not None:
        write_columns(args.out / "sme.csv", {"t": ens.times, "mean_sz": ens.mean_sz, "var_sz": ens.var_sz, "stderr_sz": ens.stderr_sz})
        RunManifest("sme", {**vars(args), "gamma_eff": rates.gamma_eff, "Y": rates.Y, "g_f": fb.g_f},
                    ens.seed_manifest(), ["sme.csv"], csv_units([args.out / "sme.csv"]), wall_clock=runtime).write(args.out / "manifest.json")
    return 0 if _finish("sme", checks, runtime, args).passed else 1


def cmd_oracle(args) -> int:
    from .network import uniform_network
    from .oracle import refinement_study

    if args.config is not None:
        cfg = load_config(args.config)
        net, init = cfg.network, init_vector(cfg.run)
    else:
        net, init = uniform_network(1, 40 * math.pi / 50.0, [0.5], 50.0), np.array([1.0 + 0j])
    t_end = args.t_end or 3 * max(2 * z for z in net.positions)
    t0 = time.perf_counter()
    st = refinement_study(net, init, t_end, tuple(args.ladder))
    runtime = time.perf_counter() - t0
    checks = [
        Check(f"relative L-inf population error at M={st.points[-1]}", st.errors[-1] < 5e-2, st.errors[-1], "< 5e-2"),
        Check("error decreases along the ladder", st.decreasing, list(st.errors), "strictly decreasing"),
    ]
    if args.out is not None:
        write_columns(args.out / "oracle.csv", {"modes": st.points, "relative_error": st.errors})
    return 0 if _finish("oracle-check", checks, runtime, args).passed else 1


COMMANDS = {"preset": cmd_preset, "simulate": cmd_simulate, "bloch": cmd_bloch, "sme": cmd_sme, "oracle-check": cmd_oracle}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("--seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
