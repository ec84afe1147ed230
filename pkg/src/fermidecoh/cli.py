"""Command-line front end.

Subcommands::

    fermidecoh run <spec-file|fig1a|fig1b|fig2> [--seed N] [--output PATH] [--workers N]
    fermidecoh analyze <rho-file> [--unitary FILE] [--output PATH]
    fermidecoh validate [all|fock|rdm|purity|ssh] [--seed N] [--instances N]

The number of worker processes for ``run`` defaults to the
``FERMIDECOH_THREADS`` environment variable (1 if unset).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .density import InvariantError, ManyBodyDensityMatrix
from .purity import PurityReport, purity_report
from .rdm import check_unitary, spin_expand

CSV_COLUMNS = (
    "t_fs", "P", "P1", "P2",
    "dP1_site", "dP2_site", "dP1_energy", "dP2_energy",
    "dP1_bound_tight_energy", "dP2_bound_tight_energy",
    "dipole_eA", "field_VperA",
)
FLOAT_FMT = "%.16e"  # 17 significant digits


class ConfigError(ValueError):
    pass


def _git_blob_sha1(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _locate(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        if f'"{key}"' in line:
            return i
    return None


def load_experiment(source: str, seed=None):
    """Experiment plus output settings from a JSON spec file or a preset name."""
    from .ssh.experiment import Experiment, preset

    path = Path(source)
    if not path.exists():
        if source in ("fig1a", "fig1b", "fig2"):
            exp = preset(source)
            output = {"path": f"{source}.csv", "format": "csv"}
        else:
            raise ConfigError(f"{source}: no such file or preset")
    else:
        text = path.read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{source}:{err.lineno}:{err.colno}: {err.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{source}:1: top level must be an object")
        output = data.pop("output", None) or {}
        if isinstance(output, str):
            output = {"path": output}
        try:
            exp = Experiment.from_json(data)
        except (TypeError, ValueError) as err:
            msg = str(err)
            # deepest key named in the message wins, then the one named last
            hits = [(depth, msg.rfind(key), key) for key, depth in _keys(data) if key in msg]
            line = _locate(text, max(hits)[2]) if hits else None
            where = f"{source}:{line}" if line else source
            raise ConfigError(f"{where}: {msg}") from None
        output.setdefault("path", str(path.with_suffix(".csv")))
        output.setdefault("format", "csv")
        if output["format"] not in ("csv", "json"):
            raise ConfigError(f"{source}:{_locate(text, 'format')}: output format must be csv or json")
    if seed is not None:
        exp = replace(exp, run=replace(exp.run, seed=seed))
    return exp, output


def _keys(obj, depth=0):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield k, depth
            yield from _keys(v, depth + 1)


def time_series(result) -> np.ndarray:
    """Rows of :data:`CSV_COLUMNS` for an ensemble run."""
    from .ssh.experiment import analyze_run

    rows = []
    for t, rep, dip, fld in zip(result.times, analyze_run(result), result.dipole, result.field):
        s, e = rep.site, rep.energy
        rows.append([t, s.P, s.P1, s.P2, s.dP1, s.dP2, e.dP1, e.dP2,
                     e.bounds.p1_max_tight, e.bounds.p2_max_tight, dip, fld])
    return np.array(rows, dtype=float)


def format_csv(rows) -> str:
    lines = [",".join(CSV_COLUMNS)]
    lines += [",".join(FLOAT_FMT % v for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    from .ssh.experiment import run_ensemble

    try:
        exp, output = load_experiment(args.spec, args.seed)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    out = Path(args.output or output["path"])
    fmt = "json" if out.suffix == ".json" else output.get("format", "csv")
    result = run_ensemble(exp, workers=args.workers)
    rows = time_series(result)
    if fmt == "csv":
        payload = format_csv(rows).encode()
    else:
        payload = (json.dumps({"columns": list(CSV_COLUMNS), "rows": rows.tolist()}) + "\n").encode()
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(payload)

    config = exp.to_json()
    config["output"] = {"path": str(out), "format": fmt}
    canonical = json.dumps(exp.to_json(), sort_keys=True).encode()
    sidecar = {
        "config": config,
        "config_sha256": hashlib.sha256(canonical).hexdigest(),
        "output_git_blob_sha1": _git_blob_sha1(payload),
        "derived": {
            "photon_energy_ev": None if exp.pulse is None else exp.pulse.photon_energy,
            "u_star": result.setup.u_star.tolist(),
            "orbital_energies": result.setup.orbital_energies.tolist(),
            "basis_size": len(result.setup.basis),
            "max_norm_drift": float(np.max(np.abs(result.norm - 1))),
            "max_mean_energy_drift": float(np.max(np.abs(result.energy.mean(0) - result.energy.mean(0)[0]))),
        },
    }
    side = out.with_name(out.stem + ".config.json")
    side.write_text(json.dumps(sidecar, indent=2) + "\n")
    print(f"wrote {out} ({len(rows)} samples) and {side}")
    return 0


def load_unitary(path: str) -> np.ndarray:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict):
        U = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data.get("im", 0.0), dtype=float)
    else:
        U = np.asarray(data, dtype=float)
        if U.ndim == 3:
            U = U[..., 0] + 1j * U[..., 1]
    return U


def format_report(rep: PurityReport) -> str:
    lines = [f"basis: {rep.basis_tag}"]
    for name in ("P", "P1", "P2", "dP1", "dP2"):
        lines.append(f"  {name:<16s}{getattr(rep, name): .12f}")
    if rep.bounds is None:
        lines.append("  bounds          unavailable (determinant basis not closed under rotation)")
    else:
        for name, v in vars(rep.bounds).items():
            lines.append(f"  {name:<16s}{v: .12f}")
    return "\n".join(lines)


def cmd_analyze(args) -> int:
    try:
        rho = ManyBodyDensityMatrix.from_json(json.loads(Path(args.rho).read_text()))
        rho.check()
    except InvariantError as err:
        print(f"error: invalid density matrix, violated invariant: {err}", file=sys.stderr)
        return 3
    except (OSError, ValueError, KeyError) as err:
        print(f"error: cannot read {args.rho}: {err}", file=sys.stderr)
        return 2
    reports = [purity_report(rho)]
    if args.unitary:
        try:
            U = load_unitary(args.unitary)
            if U.shape == (rho.basis.m // 2,) * 2:
                U = spin_expand(U)
            if U.shape != (rho.basis.m,) * 2:
                raise ValueError(f"unitary shape {U.shape} does not match {rho.basis.m} spin-orbitals")
            check_unitary(U)
        except (OSError, ValueError, KeyError) as err:
            print(f"error: bad unitary {args.unitary}: {err}", file=sys.stderr)
            return 2
        reports.append(purity_report(rho, U, basis_tag=args.tag))
    print("\n".join(format_report(r) for r in reports))
    out = Path(args.output) if args.output else Path(args.rho).with_suffix(".report.json")
    out.write_text(json.dumps([r.to_json() for r in reports], indent=2) + "\n")
    print(f"wrote {out}")
    return 0


def cmd_validate(args) -> int:
    from .validation import run_validation

    try:
        ok = run_validation(args.scope, seed=args.seed, instances=args.instances)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print("all checks passed" if ok else "some checks FAILED")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fermidecoh", description="Distilled purities of fermionic many-body states.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an ensemble experiment and write a time series")
    p.add_argument("spec", help="JSON experiment spec, or one of fig1a, fig1b, fig2")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("--output", help="output path (.csv or .json)")
    p.add_argument("--workers", type=int, help="worker processes (default: $FERMIDECOH_THREADS or 1)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="purity report for a serialized density matrix")
    p.add_argument("rho", help="density matrix JSON file")
    p.add_argument("--unitary", help="JSON single-particle unitary (spin-orbital or spatial size)")
    p.add_argument("--tag", default="custom", help="basis tag of the rotated report")
    p.add_argument("--output", help="report JSON path (default: <rho>.report.json)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("validate", help="run oracle and property suites")
    p.add_argument("scope", nargs="?", default="all", help="all, fock, rdm, purity or ssh")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=500)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
