"""Command-line interface.

Subcommands:

* ``maps``      render detection densities and the binned probability table
* ``simulate``  run a protocol session and write stats, keys and logs
* ``security``  analytic information balance versus the intercept fraction
* ``scaling``   alphabet capacity as the cell size shrinks

All commands accept ``--config`` with a JSON experiment description and
``--out`` for the output directory; invalid configurations or unknown
characters exit with status 2 and a diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .adversary import eve_log_to_csv
from .alphabet import build_packed_alphabet, save_alphabet
from .config import ConfigError, ExperimentConfig
from .infotheory import (CLONING_ATTACK_ERROR_BOUND, security_crossover,
                         security_report, shannon_entropy)
from .model import envelope_distribution
from .optics import BasisConfig, GeometryError, SamplingError
from .protocol import run_session

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spatialqkd",
        description="Simulate two-basis key distribution with "
                    "position-encoded characters.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON experiment configuration")
    common.add_argument("--out", metavar="DIR", default="out",
                        help="output directory (default: %(default)s)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_maps = sub.add_parser(
        "maps", parents=[common],
        help="write detection maps and the binned probability table")
    p_maps.add_argument("--char", metavar="LABEL",
                        help="character to render (default: first)")
    p_maps.add_argument("--configs", default="FF,II,IF,FI",
                        help="comma-separated configurations "
                             "(default: %(default)s)")
    p_maps.add_argument("--formats", default="csv,pgm",
                        help="comma-separated map formats among csv,pgm "
                             "(default: %(default)s)")

    p_sim = sub.add_parser(
        "simulate", parents=[common],
        help="run a session and write stats, keys and logs")
    p_sim.add_argument("--rounds", type=int, metavar="N")
    p_sim.add_argument("--seed", type=int, metavar="S")
    p_sim.add_argument("--eta", type=float, metavar="X",
                       help="intercepted fraction")
    p_sim.add_argument("--strategy",
                       choices=("none", "intercept_resend",
                                "suppress_on_evidence"))
    p_sim.add_argument("--evidence-threshold", type=float, metavar="EPS")
    p_sim.add_argument("--source", choices=("model", "uniform"))
    p_sim.add_argument("--round-log", action="store_true",
                       help="also write the full per-round CSV")

    p_sec = sub.add_parser(
        "security", parents=[common],
        help="information balance and crossover versus intercept fraction")
    p_sec.add_argument("--eta-points", type=int, default=21, metavar="K",
                       help="grid points on [0, 1] (default: %(default)s)")

    p_scale = sub.add_parser(
        "scaling", parents=[common],
        help="alphabet capacity for given cell sizes under a fixed envelope")
    p_scale.add_argument("--cell-radius", type=float, nargs="+",
                         default=[60e-6], metavar="METERS",
                         help="cell radii to evaluate (default: 60e-6)")
    return parser


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config \
        else ExperimentConfig()
    cfg.validate()
    return cfg


def _outdir(args: argparse.Namespace) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_maps(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    alphabet = cfg.build_alphabet()
    model = cfg.build_model(alphabet)
    table = model.probability_table()

    save_alphabet(alphabet, os.path.join(out, "alphabet.json"))
    table.to_csv(os.path.join(out, "probability_maps.csv"))

    char = args.char if args.char is not None else alphabet.labels[0]
    idx = alphabet.index_of(char)
    formats = [f.strip() for f in args.formats.split(",") if f.strip()]
    bad = set(formats) - {"csv", "pgm"}
    if bad:
        raise ConfigError(f"unknown map formats: {', '.join(sorted(bad))}")
    configs = [BasisConfig.from_label(c.strip())
               for c in args.configs.split(",") if c.strip()]
    for config in configs:
        imap = model.intensity_grid(config, idx)
        stem = os.path.join(out, f"map_{config.label}_{char}")
        if "csv" in formats:
            imap.to_csv(stem + ".csv")
        if "pgm" in formats:
            imap.to_pgm(stem + ".pgm")
    p_same, _ = table.column("FF", char)
    print(f"alphabet: {alphabet.d} characters, cell radius "
          f"{alphabet.cell_radius:.3e} m")
    print(f"character {char}: matched-basis detection probability "
          f"{p_same[alphabet.index_of(char)]:.6f}")
    print(f"wrote table and {len(configs)} map(s) to {out}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args).override(
        rounds=args.rounds, seed=args.seed, eta=args.eta,
        strategy=args.strategy, evidence_threshold=args.evidence_threshold,
        source=args.source)
    cfg.validate()
    out = _outdir(args)
    result = run_session(cfg)
    stats = result.stats

    with open(os.path.join(out, "stats.json"), "w", encoding="ascii") as fh:
        fh.write(stats.to_json())
        fh.write("\n")
    for name, key in (("alice_key.txt", result.alice_key),
                      ("bob_key.txt", result.bob_key)):
        with open(os.path.join(out, name), "w", encoding="ascii") as fh:
            fh.write("\n".join(key))
            if key:
                fh.write("\n")
    if result.eve_rounds is not None and result.eve_rounds["round_index"].size:
        eve_log_to_csv(os.path.join(out, "eve_records.csv"),
                       result.eve_rounds["round_index"],
                       result.eve_rounds["basis_code"],
                       result.eve_rounds["measured_idx"],
                       result.eve_rounds["dropped"],
                       cfg.build_alphabet().labels)
    if args.round_log:
        if result.log is None:
            raise ConfigError("round log requested but keep_log is disabled")
        result.log.to_csv(os.path.join(out, "rounds.csv"))

    avg = stats.error.average
    avg_text = f"{avg:.4f}" if stats.error.sample_size else "n/a"
    print(f"rounds: {stats.rounds}  detected: {stats.detected}  "
          f"sifted: {stats.sifted}")
    print(f"average sifted error: {avg_text}  "
          f"(sample {stats.error.sample_size}"
          f"{', low confidence' if stats.error.low_confidence else ''})")
    print(f"key length: {stats.key_alice_length} (alice) / "
          f"{stats.key_bob_length} (bob)")
    print(f"wrote results to {out}")
    return 0


def cmd_security(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    if args.eta_points < 2:
        raise ConfigError("--eta-points must be at least 2")
    probs = cfg.build_model().source().probabilities
    etas = np.linspace(0.0, 1.0, args.eta_points)
    reports = [security_report(probs, float(eta)) for eta in etas]
    cross = security_crossover(probs)

    with open(os.path.join(out, "security.csv"), "w", encoding="ascii") as fh:
        fh.write("eta,average_error,info_ab_bits,info_ab_exact_bits,"
                 "info_eve_bits,secure\n")
        for r in reports:
            fh.write(f"{r.eta:.6f},{r.average_error:.6f},{r.info_ab:.6f},"
                     f"{r.info_ab_exact:.6f},{r.info_eve:.6f},{int(r.secure)}\n")
    payload = {
        "alphabet_size": reports[0].alphabet_size,
        "source_entropy_bits": reports[0].source_entropy,
        "crossover": cross.as_dict(),
        "cloning_attack_error_bound": CLONING_ATTACK_ERROR_BOUND,
        "points": [r.as_dict() for r in reports],
    }
    with open(os.path.join(out, "security.json"), "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(f"source entropy: {reports[0].source_entropy:.4f} bits over "
          f"{reports[0].alphabet_size} characters")
    if cross.secure_for_all_eta:
        print("stations keep the information advantage for every "
              "intercept fraction")
    else:
        print(f"information crossover: eta = {cross.eta_star:.4f}, "
              f"average error = {cross.average_error:.4f}, "
              f"common information = {cross.common_information:.4f} bits")
    print(f"wrote sweep to {out}")
    return 0


def cmd_scaling(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    envelope_radius = cfg.build_alphabet().envelope_radius
    rows = []
    for radius in args.cell_radius:
        if not radius > 0:
            raise ConfigError(f"cell radius must be positive, got {radius!r}")
        packed = build_packed_alphabet(envelope_radius, radius)
        dist = envelope_distribution(packed)
        entropy = shannon_entropy(dist.probabilities)
        rows.append({
            "cell_radius": radius,
            "alphabet_size": packed.d,
            "source_entropy_bits": entropy,
        })
        print(f"cell radius {radius:.3e} m: {packed.d} characters, "
              f"{entropy:.3f} bits per photon")
    payload = {"envelope_radius": envelope_radius, "points": rows}
    with open(os.path.join(out, "scaling.json"), "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote scaling table to {out}")
    return 0


_COMMANDS = {
    "maps": cmd_maps,
    "simulate": cmd_simulate,
    "security": cmd_security,
    "scaling": cmd_scaling,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, GeometryError, SamplingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
