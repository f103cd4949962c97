"""Command-line entry point: ground, evolve, sweep, bands, bloch.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bloch, io
from .config import ConfigError, load_config
from .dynamics import NumericalError
from .experiment import StageError, ground_state, run_single, run_sweep

log = logging.getLogger("bectrap")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


def _number_list(text):
    from .config import parse_list

    return parse_list(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bectrap", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="key = value configuration file")
        p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                       help="override a configuration key (repeatable)")
        p.add_argument("--out", metavar="DIR", help="output directory (default: output.dir)")

    common(sub.add_parser("ground", help="prepare the shutter-confined ground state"))
    common(sub.add_parser("evolve", help="release the shutter and evolve one configuration"))
    p = sub.add_parser("sweep", help="run a parameter sweep")
    common(p)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("bands", help="nonlinear band structure of the three-mode Bloch ansatz")
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--nbeta", type=float, required=True)
    p.add_argument("--v", type=float, default=0.0)
    p.add_argument("--q-min", type=float, default=0.0)
    p.add_argument("--q-max", type=float, default=1.2)
    p.add_argument("--num-q", type=int, default=121)
    p.add_argument("--out", metavar="DIR", default=".")

    p = sub.add_parser("bloch", help="solve for (d0, d1) of the q = 0 Bloch wave")
    p.add_argument("--mu", type=_number_list, required=True, help="comma-separated chemical potentials")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--out", metavar="DIR", default=".")
    return parser


def _config(args):
    config = load_config(args.config, args.overrides)
    out = Path(args.out) if args.out else Path(config.out_dir)
    return config, out


def cmd_ground(args):
    config, out = _config(args)
    result = ground_state(config)
    io.write_snapshot(out / "ground.bin", result.wavefunction, config.beta)
    summary = {"mu": result.mu, "energy": result.energy, "iterations": result.iterations,
               "residual": result.residual, "mu_thomas_fermi": config.beta / config.L_A}
    (out / "ground.json").write_text(json.dumps(summary, indent=2))
    print(f"mu = {result.mu:.6f} (Thomas-Fermi {config.beta / config.L_A:.6f}), "
          f"{result.iterations} iterations")


def cmd_evolve(args):
    config, out = _config(args)
    result = run_single(config, out)
    print(f"j0 = {result.j0:.6e}, plateaux: {len(result.plateaux)}, N_final = {result.N_final:.6f}")


def cmd_sweep(args):
    config, out = _config(args)
    result = run_sweep(config, out, workers=args.workers)
    for row in result.rows:
        status = "ok" if row.ok else f"FAILED: {row.error}"
        print(f"{row.axis} = {row.value:<10.6g} j0 = {row.j0:.6e}  {status}")
    if any(not row.ok for row in result.rows):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_bands(args):
    q = np.linspace(args.q_min, args.q_max, args.num_q)
    points = bloch.band_structure(q, args.s, args.nbeta, args.v)
    path = io.write_bands(Path(args.out) / "bands.csv", points)
    loop = bloch.has_first_edge_loop(args.s, args.nbeta, args.v)
    print(f"{len(points)} band points written to {path}; loop at first band edge: {loop}")


def cmd_bloch(args):
    rows = [bloch.solve_d_system(mu, args.beta, args.s) for mu in args.mu]
    path = io.write_d_table(Path(args.out) / "bloch.csv", rows)
    for d in rows:
        print(f"mu = {d.mu:.6g}: d0 = {d.d0:.6e}, d1 = {d.d1:.6e}, n = {d.n:.6e}, dN = {bloch.delta_N(d):.6e}")
    print(f"written to {path}")


COMMANDS = {"ground": cmd_ground, "evolve": cmd_evolve, "sweep": cmd_sweep,
            "bands": cmd_bands, "bloch": cmd_bloch}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args) or EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return exc.exit_code
    except (NumericalError, bloch.BranchTerminated) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
