"""JSON state files (schema ``hsc-1``) and CSV tables, 12 significant digits."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .casimir import CasimirFamily
from .classical import ClassicalState
from .errors import InvalidArgument
from .quantum import QuantumState
from .radial import RadialField, RadialGrid
from .spectral import ChannelSpectrum, solve_channel

SCHEMA = "hsc-1"
DIGITS = 12


def round_sig(x: float) -> float:
    return float(format(float(x), f".{DIGITS}g"))


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return "nan"
    if isinstance(x, str):
        return x
    return format(float(x), f".{DIGITS}g")


def _rounded(obj):
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_rounded(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return round_sig(obj)
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_rounded(doc), indent=1) + "\n"


def _family_doc(fam: CasimirFamily) -> dict:
    if fam.kind != "power_law":
        raise InvalidArgument("only power-law families can be serialised")
    return {"kind": fam.kind, "m": fam.m, "T": fam.T}


def _grid_doc(grid: RadialGrid) -> dict:
    return {"r_max": grid.r_max, "n": grid.n}


def classical_doc(state: ClassicalState) -> dict:
    return {
        "schema": SCHEMA, "kind": "classical", "mu": state.mu,
        "family": _family_doc(state.family), "grid": _grid_doc(state.grid),
        "R0": state.R0, "w0": state.w0, "mass": state.mass,
        "U": state.U.values, "rho": state.rho.values, "notes": list(state.notes),
    }


def quantum_doc(state: QuantumState) -> dict:
    chans = [{"l": ch.ell, "eigenvalues": ch.eigenvalues, "occupations": lam}
             for ch, lam in zip(state.channels, state.occupations)]
    return {
        "schema": SCHEMA, "kind": "quantum", "hbar": state.hbar, "mu": state.mu_h,
        "family": _family_doc(state.family), "grid": _grid_doc(state.grid),
        "U": state.U.values, "rho": state.rho.values, "channels": chans,
        "scf_iters": state.scf_iters, "residual": state.residual,
        "label": state.label, "warnings": list(state.warnings),
    }


def state_doc(state) -> dict:
    if isinstance(state, ClassicalState):
        return classical_doc(state)
    if isinstance(state, QuantumState):
        return quantum_doc(state)
    raise InvalidArgument(f"cannot serialise {type(state).__name__}")


def write_state(state, path) -> str:
    text = dumps(state_doc(state))
    Path(path).write_text(text)
    return text


def _require(doc, *keys):
    missing = [k for k in keys if k not in doc]
    if missing:
        raise InvalidArgument(f"state file lacks fields: {', '.join(missing)}")


def read_doc(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise InvalidArgument(f"state file not found: {path}") from exc
    except (OSError, ValueError) as exc:
        raise InvalidArgument(f"cannot parse state file {path}: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise InvalidArgument(f"{path}: expected schema {SCHEMA!r}")
    _require(doc, "kind", "mu", "family", "grid", "U", "rho")
    return doc


def _common(doc):
    fam = doc["family"]
    if fam.get("kind") != "power_law":
        raise InvalidArgument("unsupported family kind in state file")
    family = CasimirFamily.power_law(fam["m"], fam["T"])
    grid = RadialGrid(float(doc["grid"]["r_max"]), int(doc["grid"]["n"]))
    U = np.asarray(doc["U"], dtype=float)
    rho = np.asarray(doc["rho"], dtype=float)
    if U.shape != (grid.n,) or rho.shape != (grid.n,):
        raise InvalidArgument("field length does not match the grid")
    return family, grid, RadialField(grid, U), RadialField(grid, rho)


def state_from_doc(doc: dict):
    family, grid, U, rho = _common(doc)
    if doc["kind"] == "classical":
        _require(doc, "R0", "w0", "mass")
        return ClassicalState(family, float(doc["mu"]), U, rho, float(doc["R0"]),
                              float(doc["w0"]), float(doc["mass"]), tuple(doc.get("notes", ())))
    if doc["kind"] == "quantum":
        _require(doc, "hbar", "channels")
        hbar = float(doc["hbar"])
        chans, occ = [], []
        for c in doc["channels"]:
            k = len(c["eigenvalues"])
            # vectors are not stored; recompute the lowest k in this channel
            ch = solve_channel(U, int(c["l"]), hbar, 0.0)
            if len(ch) < k:
                raise InvalidArgument(f"stored channel l={c['l']} not reproducible from U")
            chans.append(ChannelSpectrum(ch.ell, hbar, np.asarray(c["eigenvalues"], dtype=float),
                                         ch.eigenvectors[:k]))
            occ.append(np.asarray(c["occupations"], dtype=float))
        return QuantumState(hbar, family, float(doc["mu"]), tuple(chans), tuple(occ), U, rho,
                            int(doc.get("scf_iters", 0)), float(doc.get("residual", math.nan)),
                            doc.get("label", "loaded state"), tuple(doc.get("warnings", ())))
    raise InvalidArgument(f"unknown state kind {doc['kind']!r}")


def read_state(path):
    return state_from_doc(read_doc(path))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> str:
    text = csv_text(header, rows)
    Path(path).write_text(text)
    return text


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]
