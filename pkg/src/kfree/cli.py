"""Command line interface: ``kfree <subcommand> [options]``.

Every command prints a schema line first, then either an aligned table or a
JSON document (``--format machine``).  Exit codes: 0 success, 1 domain or
validation error, 2 resource cap exceeded, 3 internal verification failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .diffraction import autocorr_weight_closed, autocorr_weight_empirical, peak_list
from .kfree_sets import KFreeConfig, admissible, density_empirical, find_hole, is_k_free
from .lattice import (
    MAX_POINTS,
    Lattice,
    ResourceCapError,
    as_radius,
    coset_count,
    enumerate_ball,
    lattice_from_file,
    preset,
)
from .numtheory import DomainError, pi_r, primes_up_to, xi, zeta
from .patches import (
    census_checks,
    entropy_measure_estimate,
    entropy_patch_counting_estimate,
    n_rho_exact,
    patch_census,
    symmetry_classes,
)

SCHEMA = "kfree-output/1"

EXIT_OK, EXIT_DOMAIN, EXIT_CAP, EXIT_VERIFY = 0, 1, 2, 3


class VerificationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# output


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    return v


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, (list, tuple)):
        return "{" + " ".join(_cell(x) if not isinstance(x, (list, tuple)) else "(" + ",".join(map(str, x)) + ")" for x in v) + "}"
    return str(v)


def emit(doc: dict, fmt: str, out=None) -> None:
    out = out or sys.stdout
    doc = {"schema": SCHEMA, **doc}
    if fmt == "machine":
        out.write(json.dumps(_jsonable(doc), indent=1) + "\n")
        return
    out.write(f"# schema {SCHEMA}\n")
    out.write(f"# command {doc['command']}\n")
    for k, v in doc.get("meta", {}).items():
        out.write(f"# {k}: {_cell(v)}\n")
    cols = doc.get("columns", [])
    rows = [[_cell(x) for x in r] for r in doc.get("rows", [])]
    if cols:
        widths = [max([len(c)] + [len(r[i]) for r in rows]) for i, c in enumerate(cols)]
        out.write("  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip() + "\n")
        for r in rows:
            out.write("  ".join(x.ljust(w) for x, w in zip(r, widths)).rstrip() + "\n")
    for k, v in doc.get("checks", {}).items():
        out.write(f"# check {k}: {_cell(v)}\n")


# ---------------------------------------------------------------------------
# argument helpers


def load_lattice(source: str) -> Lattice:
    path = Path(source)
    if path.is_file():
        return lattice_from_file(path)
    return preset(source)


def _config(args) -> KFreeConfig:
    return KFreeConfig(load_lattice(args.lattice), args.k)


def _point(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.replace("(", "").replace(")", "").split(","))
    except ValueError as e:
        raise ValueError(f"bad point {text!r}: expected comma separated integers") from e


def _points(text: str) -> list[tuple[int, ...]]:
    return [_point(p) for p in text.split(";") if p.strip()] if text.strip() else []


def _check_dim(config: KFreeConfig, pts) -> None:
    for p in pts:
        if len(p) != config.n:
            raise ValueError(f"point {p} has dimension {len(p)}, lattice has {config.n}")


# ---------------------------------------------------------------------------
# commands


def cmd_constants(args) -> dict:
    s = args.s
    if s <= 1:
        raise DomainError("s must exceed 1")
    rows = [["zeta", s, zeta(s), 0.0]]
    v = xi(s)
    rows.append(["xi", s, v.value, v.tail_bound])
    for r in range(1, args.rmax + 1):
        v = pi_r(r, s)
        rows.append([f"Pi_{r}", s, v.value, v.tail_bound])
    return {"command": "constants", "columns": ["name", "s", "value", "tail_bound"], "rows": rows}


def cmd_patches(args) -> dict:
    config = _config(args)
    census = patch_census(config, args.rho, args.R, threads=args.threads, max_points=args.max_points)
    rep = census_checks(census)
    rows = [
        [list(e.occupied), e.size, e.closed.value, e.closed.error_bound, e.count, e.empirical, e.observed]
        for e in census.entries
    ]
    classes = [[list(e.occupied), w, e.closed.value] for e, w in symmetry_classes(census)]
    doc = {
        "command": "patches",
        "meta": {
            "lattice": config.lattice.name,
            "k": config.k,
            "rho": str(census.rho),
            "R": str(census.R),
            "ball_points": len(census.ball),
            "N_rho": census.n_rho,
            "sites_scanned": census.sites,
        },
        "columns": ["occupied", "size", "nu_closed", "error_bound", "count", "nu_empirical", "observed"],
        "rows": rows,
        "symmetry_classes": classes,
        "checks": {
            "sum_nu": rep.total,
            "sum_nu_residual": rep.total_residual,
            "mean_size": rep.mean_size,
            "mean_size_target": rep.mean_size_target,
            "mean_size_residual": rep.mean_size_residual,
            "tolerance": rep.tolerance,
            "max_empirical_deviation": rep.empirical_max_deviation,
            "passed": rep.passed,
        },
    }
    if args.format != "machine":
        # the table format lists the classes in the meta block
        for i, (occ, w, val) in enumerate(classes):
            doc["meta"][f"class {i}"] = f"weight {w} nu {val:.12g} rep {_cell(occ)}"
    if not rep.passed:
        doc["_exit"] = EXIT_VERIFY
    return doc


def cmd_entropy(args) -> dict:
    config = _config(args)
    rhos = [as_radius(r) for r in args.rho]
    target = 1 / (zeta(config.nk) * config.lattice.det)
    rows = []
    for r in rhos:
        rows.append(
            [str(r), n_rho_exact(config, r), entropy_patch_counting_estimate(config, r), entropy_measure_estimate(config, r), target]
        )
    return {
        "command": "entropy",
        "meta": {"lattice": config.lattice.name, "k": config.k, "limit_target_h_T": target, "limit_target_h_M": 0.0},
        "columns": ["rho", "N_rho", "h_T_estimate", "h_M_estimate", "limit_target"],
        "rows": rows,
    }


def cmd_density(args) -> dict:
    config = _config(args)
    emp = density_empirical(config, args.R, threads=args.threads, max_points=args.max_points)
    target = 1 / (zeta(config.nk) * config.lattice.det)
    return {
        "command": "density",
        "meta": {"lattice": config.lattice.name, "k": config.k},
        "columns": ["R", "empirical", "target", "difference"],
        "rows": [[str(as_radius(args.R)), emp, target, emp - target]],
    }


def cmd_autocorr(args) -> dict:
    config = _config(args)
    pts = [_point(p) for p in args.point] or [tuple([0] * config.n)]
    _check_dim(config, pts)
    rows = []
    for a in pts:
        closed = autocorr_weight_closed(config, a)
        emp = autocorr_weight_empirical(config, a, args.R, threads=args.threads, max_points=args.max_points)
        rows.append([list(a), closed, emp, emp - closed])
    return {
        "command": "autocorr",
        "meta": {"lattice": config.lattice.name, "k": config.k, "R": str(as_radius(args.R))},
        "columns": ["a", "closed", "empirical", "difference"],
        "rows": rows,
    }


def cmd_diffraction(args) -> dict:
    config = _config(args)
    peaks = peak_list(config, args.dual_radius, args.qmax, max_points=args.max_points)
    rows = [[list(p.location.coords), p.q, p.norm, p.intensity, p.residual, p.tail_bound] for p in peaks]
    bad = [p for p in peaks if not p.consistent]
    doc = {
        "command": "diffraction",
        "meta": {"lattice": config.lattice.name, "k": config.k, "qmax": args.qmax, "dual_radius": str(as_radius(args.dual_radius))},
        "columns": ["location", "q", "norm", "intensity", "series_residual", "tail_bound"],
        "rows": rows,
        "checks": {"series_consistent": not bad},
    }
    if bad:
        doc["_exit"] = EXIT_VERIFY
    return doc


def cmd_holes(args) -> dict:
    config = _config(args)
    C = [tuple(p) for p in enumerate_ball(config.lattice, None, args.inradius).tolist()]
    a, M = find_hole(config, C)
    # exhaustive check of every translate of C
    ok = all(not is_k_free(config, [ci + ai for ci, ai in zip(c, a)]) for c in C)
    if not ok:
        raise VerificationError("hole verification failed")
    return {
        "command": "holes",
        "meta": {"lattice": config.lattice.name, "k": config.k, "inradius": str(as_radius(args.inradius)), "points_covered": len(C)},
        "columns": ["offset", "modulus", "verified", "center_density"],
        "rows": [[list(a), M, ok, 1 / (float(M) ** config.n * config.lattice.det)]],
    }


def cmd_admissible(args) -> dict:
    config = _config(args)
    pts = _points(args.points)
    _check_dim(config, pts)
    rows = []
    for p in primes_up_to(max(2, len(pts))):
        if p**config.nk > max(len(pts), 1) and rows:
            break
        rows.append([p, coset_count(pts, p**config.k), p**config.nk])
    return {
        "command": "admissible",
        "meta": {"lattice": config.lattice.name, "k": config.k, "points": len(pts), "admissible": admissible(config, pts)},
        "columns": ["p", "cosets_hit", "cosets_total"],
        "rows": rows,
    }


COMMANDS = {
    "constants": cmd_constants,
    "patches": cmd_patches,
    "entropy": cmd_entropy,
    "density": cmd_density,
    "autocorr": cmd_autocorr,
    "diffraction": cmd_diffraction,
    "holes": cmd_holes,
    "admissible": cmd_admissible,
}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; here that is a validation error (1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_DOMAIN, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["table", "machine"], default="table")
    common.add_argument("--threads", type=int, default=1, help="scan threads; never changes output")
    common.add_argument("--max-points", type=float, default=MAX_POINTS, help="cap on lattice points per scan")
    common.add_argument("--seed", type=int, default=None, help="accepted for test tooling; commands are deterministic")

    lat = argparse.ArgumentParser(add_help=False)
    lat.add_argument("--lattice", default="Z1", help="preset (Z1..Z4, A2) or JSON file")
    lat.add_argument("--k", type=int, default=2)

    p = _Parser(prog="kfree", description="k-free lattice points: patches, entropy, diffraction")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("constants", parents=[common], help="zeta, xi and the products Pi_r(s)")
    c.add_argument("--s", type=float, default=2.0)
    c.add_argument("--rmax", type=int, default=5)

    c = sub.add_parser("patches", parents=[common, lat], help="patch census with closed-form frequencies")
    c.add_argument("--rho", required=True, help="radius, e.g. 2 or sqrt2")
    c.add_argument("--R", required=True, help="scan radius")

    c = sub.add_parser("entropy", parents=[common, lat], help="finite-rho entropy estimates")
    c.add_argument("--rho", required=True, action="append", help="repeatable, or a comma list")

    c = sub.add_parser("density", parents=[common, lat], help="empirical density of V")
    c.add_argument("--R", required=True)

    c = sub.add_parser("autocorr", parents=[common, lat], help="autocorrelation weights")
    c.add_argument("--point", action="append", default=[], help="e.g. 1,0 (repeatable)")
    c.add_argument("--R", required=True)

    c = sub.add_parser("diffraction", parents=[common, lat], help="diffraction peak list")
    c.add_argument("--dual-radius", required=True)
    c.add_argument("--qmax", type=int, required=True)

    c = sub.add_parser("holes", parents=[common, lat], help="residue class avoiding V on a ball")
    c.add_argument("--inradius", required=True)

    c = sub.add_parser("admissible", parents=[common, lat], help="admissibility of a finite point set")
    c.add_argument("--points", required=True, help='e.g. "0,0;1,0;0,1"')
    return p


def _validate(args) -> None:
    if getattr(args, "k", 1) < 1:
        raise ValueError("--k must be a positive integer")
    if args.threads < 1:
        raise ValueError("--threads must be >= 1")
    if args.command == "entropy":
        args.rho = [r for item in args.rho for r in item.split(",") if r]
    if getattr(args, "qmax", 1) < 1:
        raise ValueError("--qmax must be >= 1")
    for name in ("rho", "R", "dual_radius", "inradius"):
        v = getattr(args, name, None)
        for item in v if isinstance(v, list) else [v]:
            if item is not None and not as_radius(item).sq > 0:
                raise ValueError(f"--{name} must be positive")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        _validate(args)
        doc = COMMANDS[args.command](args)
    except ResourceCapError as e:
        print(f"error: resource cap: {e}", file=sys.stderr)
        return EXIT_CAP
    except VerificationError as e:
        print(f"error: verification failed: {e}", file=sys.stderr)
        return EXIT_VERIFY
    except (DomainError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    code = doc.pop("_exit", EXIT_OK)
    emit(doc, args.format)
    return code


if __name__ == "__main__":
    sys.exit(main())
