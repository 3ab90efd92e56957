"""Command-line front end: deterministic JSON/CSV in, JSON/CSV out.

Subcommands: generate | reconstruct | zeros | husimi-grid | experiment.
All randomness is seeded through flags, no environment variables are read,
and numbers serialize with full round-trip precision, so identical
invocations produce byte-identical outputs.

Exit codes: 0 success, 2 usage or input error, 3 inconclusive
disambiguation (partial report emitted), 4 zero-search failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import (
    Direction,
    PhasePoint,
    PureState,
    Spin,
    chordal_distance,
    coherent_state,
    direction_to_point,
    fidelity,
    husimi,
    point_to_direction,
    random_state,
    zeros_of,
)
from .measurement import MeasurementOracle
from .reconstruct import (
    CircleGeometry,
    EquatorGeometry,
    InconclusiveProbeError,
    InversionPair,
    LineGeometry,
    NodeSet,
    ReconstructConfig,
    ZeroPair,
    ZeroSearchError,
    ambiguity_experiment,
    design_matrix,
    make_nodes,
    reconstruct,
    zero_search,
)

SCHEMA_VERSION = 1


class InputError(ValueError):
    """Bad file content or flag combination; maps to exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a reconstruction invocation needs, assembled from flags."""

    spin: Spin
    geometry: LineGeometry | EquatorGeometry | CircleGeometry
    step_two: str
    shots: int | None
    seed: int
    out: str | None


# ---------------------------------------------------------------------------
# serialization helpers


def parse_complex(text: str) -> complex:
    parts = text.split(",")
    if len(parts) != 2:
        raise InputError(f"expected 're,im', got {text!r}")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise InputError(f"bad complex number {text!r}") from exc


def parse_projection(text: str, spin: Spin) -> int:
    """Parse a projection value like '1', '-1/2' or '0.5'; return the slot index."""
    try:
        mu = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"bad projection value {text!r}") from exc
    twomu = mu * 2
    if twomu.denominator != 1:
        raise InputError(f"projection {text!r} is not a half-integer")
    k2 = spin.twos - int(twomu)  # equals 2k
    if k2 % 2 or not (0 <= k2 // 2 <= spin.twos):
        raise InputError(
            f"projection {text!r} invalid for spin {spin}: need -s <= mu <= s in integer steps"
        )
    return k2 // 2


def state_to_dict(state: PureState) -> dict:
    return {
        "twos": state.spin.twos,
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
    }


def state_from_dict(data: dict) -> PureState:
    try:
        twos = int(data["twos"])
        amps = data["amplitudes"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed state file: {exc}") from exc
    if twos < 0:
        raise InputError(f"twos must be non-negative, got {twos}")
    if not isinstance(amps, list) or len(amps) != twos + 1:
        raise InputError(f"expected {twos + 1} amplitudes, got {len(amps) if isinstance(amps, list) else amps!r}")
    try:
        vec = np.array([complex(float(a[0]), float(a[1])) for a in amps])
    except (TypeError, ValueError, IndexError) as exc:
        raise InputError(f"malformed amplitude entries: {exc}") from exc
    if not np.all(np.isfinite(vec.view(float))):
        raise InputError("amplitudes must be finite")
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > 1e-6:
        raise InputError(f"state vector norm {norm!r} deviates from 1 beyond 1e-6")
    return PureState(Spin(twos), vec)


def load_state(path: str) -> PureState:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    return state_from_dict(data)


def point_to_json(p: PhasePoint):
    if p.infinite:
        return "inf"
    return [float(p.z.real), float(p.z.imag)]


def pair_to_dict(pair) -> dict:
    if isinstance(pair, ZeroPair):
        return {
            "type": "conjugate",
            "u": pair.u,
            "v_abs": pair.v_abs,
            "multiplicity": pair.multiplicity,
            "ambiguous": pair.ambiguous,
        }
    if isinstance(pair, InversionPair):
        return {
            "type": "inversion",
            "zero": point_to_json(pair.zero),
            "multiplicity": pair.multiplicity,
            "ambiguous": pair.ambiguous,
        }
    raise TypeError(f"unknown pair type {pair!r}")


def geometry_to_dict(geometry) -> dict:
    if isinstance(geometry, LineGeometry):
        return {"kind": "line", "phitilde": geometry.phitilde}
    if isinstance(geometry, EquatorGeometry):
        return {
            "kind": "equator",
            "angles": None if geometry.angles is None else list(geometry.angles),
        }
    if isinstance(geometry, CircleGeometry):
        return {
            "kind": "circle",
            "base": geometry_to_dict(geometry.base),
            "shift": [geometry.shift.real, geometry.shift.imag],
        }
    raise TypeError(f"unknown geometry {geometry!r}")


def emit_json(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def geometry_from_args(args) -> LineGeometry | EquatorGeometry | CircleGeometry:
    if args.geometry == "line":
        return LineGeometry(args.phitilde)
    if args.geometry == "equator":
        return EquatorGeometry()
    base = LineGeometry(args.phitilde) if args.circle_base == "line" else EquatorGeometry()
    shift = parse_complex(args.shift) if args.shift else 0j
    return CircleGeometry(base, shift)


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args) -> int:
    spin = Spin(args.spin)
    if args.kind == "random":
        rng = np.random.default_rng([int(args.seed), 0x6E])
        state = random_state(spin, rng)
    elif args.kind == "coherent":
        if args.z is None:
            raise InputError("--z re,im is required for kind=coherent")
        state = coherent_state(spin, PhasePoint(parse_complex(args.z))).canonical()
    else:
        if args.mu is None:
            raise InputError("--mu is required for kind=basis")
        k = parse_projection(args.mu, spin)
        vec = np.zeros(spin.dim, dtype=complex)
        vec[k] = 1.0
        state = PureState(spin, vec)
    emit_json(state_to_dict(state), args.out)
    return 0


def cmd_reconstruct(args) -> int:
    state = load_state(args.state)
    if state.spin.twos < 1:
        raise InputError("reconstruction needs twos >= 1")
    if args.shots is not None and args.seed is None:
        raise InputError("--seed is required when --shots is given")
    seed = 0 if args.seed is None else int(args.seed)
    geometry = geometry_from_args(args)
    nodes = make_nodes(state.spin, geometry)
    oracle = MeasurementOracle(state, shots=args.shots, seed=seed if args.shots else None)
    config = ReconstructConfig(nodes=nodes, step_two=args.stepii, seed=seed)
    try:
        report = reconstruct(oracle, state.spin, config)
    except InconclusiveProbeError as exc:
        emit_json(
            {
                "schema": SCHEMA_VERSION,
                "status": "inconclusive",
                "error": str(exc),
                "geometry": geometry_to_dict(geometry),
                "measurements_used": oracle.query_count,
                "shots": args.shots,
                "seed": seed,
            },
            args.out,
        )
        return 3
    out = {
        "schema": SCHEMA_VERSION,
        "status": "ok",
        "method": report.method,
        "chosen": state_to_dict(report.chosen),
        "fidelity_vs_truth": fidelity(state, report.chosen),
        "measurements_used": report.measurements_used,
        "candidates_considered": report.candidates_considered,
        "condition_estimate": report.condition_estimate,
        "zero_pairs": [pair_to_dict(p) for p in report.zero_pairs],
        "infinity_count": report.infinity_count,
        "geometry": geometry_to_dict(geometry),
        "nodes": [point_to_json(p) for p in report.node_set.points],
        "shots": args.shots,
        "seed": seed,
    }
    emit_json(out, args.out)
    return 0


def _grouped_zeros(zeros) -> list[dict]:
    groups: list[list[PhasePoint]] = []
    for z in zeros:
        for g in groups:
            if chordal_distance(z, g[0]) <= 1e-6:
                g.append(z)
                break
        else:
            groups.append([z])
    out = []
    for g in groups:
        rep = g[0]
        d = point_to_direction(rep)
        out.append(
            {
                "z": point_to_json(rep),
                "theta": d.theta,
                "phi": d.phi,
                "multiplicity": len(g),
            }
        )
    return out


def cmd_zeros(args) -> int:
    state = load_state(args.state)
    if args.mode == "algebraic":
        zs = zeros_of(state)
        meta = {"mode": "algebraic"}
    else:
        if state.spin.twos < 1:
            raise InputError("zero search needs twos >= 1")
        if args.shots is not None and args.seed is None:
            raise InputError("--seed is required when --shots is given")
        oracle = MeasurementOracle(
            state, shots=args.shots, seed=None if args.shots is None else int(args.seed)
        )
        zs = zero_search(oracle, state.spin)
        meta = {"mode": "search", "measurements_used": oracle.query_count}
    out = {
        "schema": SCHEMA_VERSION,
        **meta,
        "twos": state.spin.twos,
        "zeros": _grouped_zeros(zs.zeros),
    }
    emit_json(out, args.out)
    return 0


def cmd_husimi_grid(args) -> int:
    state = load_state(args.state)
    try:
        ntheta, nphi = (int(v) for v in args.grid.lower().split("x"))
    except ValueError as exc:
        raise InputError(f"bad grid spec {args.grid!r}, expected like '64x128'") from exc
    if ntheta < 2 or nphi < 2:
        raise InputError("grid needs at least 2 points per axis")
    thetas = np.linspace(0.0, math.pi, ntheta)
    phis = np.linspace(0.0, 2.0 * math.pi, nphi, endpoint=False)
    rows = []
    for theta in thetas:
        for phi in phis:
            d = Direction(float(theta), float(phi))
            p = direction_to_point(d)
            value = husimi(state, p)
            zre, zim = (math.inf, 0.0) if p.infinite else (p.z.real, p.z.imag)
            rows.append((float(theta), float(phi), zre, zim, value))
    target = sys.stdout if args.out is None else open(args.out, "w", newline="", encoding="utf-8")
    try:
        writer = csv.writer(target, lineterminator="\n")
        writer.writerow(["theta", "phi", "z_re", "z_im", "P"])
        for row in rows:
            writer.writerow([repr(v) for v in row])
    finally:
        if target is not sys.stdout:
            target.close()
    return 0


def cmd_experiment(args) -> int:
    if args.kind == "ambiguity":
        if args.spin is None:
            raise InputError("--spin is required for the ambiguity experiment")
        spin = Spin(args.spin)
        rng = np.random.default_rng([int(args.seed), 0xA5])
        strategy = "line" if args.node_strategy == "line" else "random_points"
        stats = ambiguity_experiment(spin, strategy, args.trials, rng)
        out = {
            "schema": SCHEMA_VERSION,
            "kind": "ambiguity",
            "twos": spin.twos,
            "trials": stats.trials,
            "node_strategy": stats.node_strategy,
            "consistent_counts": list(stats.consistent_counts),
            "unique_fraction": stats.unique_fraction,
            "mean_count": stats.mean_count,
            "seed": int(args.seed),
        }
    else:
        rows = []
        for twos in range(1, args.max_twos + 1):
            spin = Spin(twos)
            entry = {"twos": twos}
            for name, geometry in (("line", LineGeometry()), ("equator", EquatorGeometry())):
                mat = design_matrix(make_nodes(spin, geometry))
                entry[name] = {
                    "condition_estimate": float(np.linalg.cond(mat)),
                    "condition_1norm": float(
                        np.linalg.norm(mat, 1) * np.linalg.norm(np.linalg.inv(mat), 1)
                    ),
                }
            rows.append(entry)
        out = {"schema": SCHEMA_VERSION, "kind": "conditioning", "results": rows}
    emit_json(out, args.out)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinrecon",
        description="Pure spin-state reconstruction from simulated probability measurements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a state file")
    gen.add_argument("--spin", type=int, required=True, metavar="TWOS",
                     help="spin as the integer 2s")
    gen.add_argument("--kind", choices=("random", "coherent", "basis"), default="random")
    gen.add_argument("--z", help="stereographic point re,im for kind=coherent")
    gen.add_argument("--mu", help="projection value for kind=basis, e.g. -1/2")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_generate)

    rec = sub.add_parser("reconstruct", help="reconstruct a state from simulated measurements")
    rec.add_argument("--state", required=True, help="input state file (ground truth)")
    rec.add_argument("--geometry", choices=("line", "equator", "circle"), default="line")
    rec.add_argument("--phitilde", type=float, default=0.0,
                     help="rotation angle of the line geometry (radians)")
    rec.add_argument("--shift", help="rigid displacement re,im for circle geometry")
    rec.add_argument("--circle-base", choices=("line", "equator"), default="equator",
                     help="base node set displaced by --shift")
    rec.add_argument("--stepii", choices=("zero-probe", "single-probe"), default="zero-probe")
    rec.add_argument("--shots", type=int, default=None,
                     help="finite measurements per direction (omit for exact probabilities)")
    rec.add_argument("--seed", type=int, default=None)
    rec.add_argument("--out")
    rec.set_defaults(func=cmd_reconstruct)

    zer = sub.add_parser("zeros", help="locate the probability zeros of a state")
    zer.add_argument("--state", required=True)
    zer.add_argument("--mode", choices=("algebraic", "search"), default="algebraic")
    zer.add_argument("--shots", type=int, default=None)
    zer.add_argument("--seed", type=int, default=None)
    zer.add_argument("--out")
    zer.set_defaults(func=cmd_zeros)

    grid = sub.add_parser("husimi-grid", help="tabulate the Husimi distribution on a grid")
    grid.add_argument("--state", required=True)
    grid.add_argument("--grid", required=True, metavar="NTHETAxNPHI")
    grid.add_argument("--out")
    grid.set_defaults(func=cmd_husimi_grid)

    exp = sub.add_parser("experiment", help="run a diagnostic experiment")
    exp.add_argument("--kind", choices=("ambiguity", "conditioning"), required=True)
    exp.add_argument("--spin", type=int, default=None, metavar="TWOS")
    exp.add_argument("--trials", type=int, default=100)
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--node-strategy", choices=("random", "line"), default="random")
    exp.add_argument("--max-twos", type=int, default=8)
    exp.add_argument("--out")
    exp.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ZeroSearchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
