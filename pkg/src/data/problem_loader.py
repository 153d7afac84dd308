#!/usr/bin/env python3
"""
Problem Loader - JSON and text inputs

Constraint-system dump format:
    {"n": int, "p": int, "rows": [[[i, j, "coef"], ...], ...], "b": ["rational", ...]}

Each row lists the upper-triangle entries of one symmetric constraint
matrix; an off-diagonal entry stands for both (i, j) and (j, i).

Basis files use the certificate keys:
    {"nvars": int, "basis": ["1", "x2", "x1*x2", ...]}
"""

import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Dict, Mapping, Union

from src.core.errors import ConstraintFormatError, ExperimentSpecError
from src.core.gram_map import ConstraintSystem, MonomialBasis
from src.core.polynomial import parse_polynomial

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _rational(value, what: str) -> Fraction:
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise ConstraintFormatError(f"{what} '{value}' is not a rational number")


def _read_json(path: PathLike, error_cls) -> Dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise error_cls(f"File not found: {path}")
    except json.JSONDecodeError as e:
        raise error_cls(f"Invalid JSON in {path}: {e}")


def to_json_dict(cs: ConstraintSystem) -> Dict:
    """Dump format of a constraint system"""
    return {
        "n": cs.n,
        "p": cs.p,
        "rows": [[[i, j, str(c)] for i, j, c in row] for row in cs.rows],
        "b": [str(v) for v in cs.b_exact],
    }


def constraint_system_from_json(data: Mapping) -> ConstraintSystem:
    """
    Validate and build a ConstraintSystem from the dump format.

    Raises:
        ConstraintFormatError: Missing fields, wrong counts or bad entries
        DimensionError: Entries outside the n x n matrix
    """
    if not isinstance(data, Mapping):
        raise ConstraintFormatError("Constraint system must be a JSON object")
    missing = [key for key in ("n", "rows", "b") if key not in data]
    if missing:
        raise ConstraintFormatError(f"Constraint system is missing fields: {missing}")

    rows_data, b_data = data["rows"], data["b"]
    if not isinstance(rows_data, list) or not isinstance(b_data, list):
        raise ConstraintFormatError("'rows' and 'b' must be lists")
    if "p" in data and (data["p"] != len(rows_data) or data["p"] != len(b_data)):
        raise ConstraintFormatError(
            f"p={data['p']} but {len(rows_data)} rows and {len(b_data)} right-hand sides"
        )

    rows = []
    for k, row in enumerate(rows_data):
        entries = []
        for entry in row:
            if not isinstance(entry, list) or len(entry) != 3:
                raise ConstraintFormatError(f"Row {k} entry {entry!r} is not [i, j, coef]")
            i, j, coef = entry
            if not isinstance(i, int) or not isinstance(j, int):
                raise ConstraintFormatError(f"Row {k} entry {entry!r} has non-integer indices")
            entries.append((min(i, j), max(i, j), _rational(coef, f"Row {k} coefficient")))
        rows.append(tuple(entries))

    n = data["n"]
    if not isinstance(n, int):
        raise ConstraintFormatError(f"n must be an integer, got {n!r}")

    b = tuple(_rational(v, "Right-hand side") for v in b_data)
    return ConstraintSystem(n=n, rows=tuple(rows), b_exact=b)


def load_constraint_system(path: PathLike) -> ConstraintSystem:
    cs = constraint_system_from_json(_read_json(path, ConstraintFormatError))
    logger.info(f"📂 Loaded constraint system n={cs.n}, p={cs.p} from {path}")
    return cs


def dump_constraint_system(cs: ConstraintSystem, path: PathLike):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(to_json_dict(cs), handle, indent=2)


def load_certificate(path: PathLike) -> Dict:
    data = _read_json(path, ConstraintFormatError)
    if not isinstance(data, dict):
        raise ConstraintFormatError("Certificate must be a JSON object")
    return data


def basis_to_json_dict(basis: MonomialBasis) -> Dict:
    return {"nvars": basis.nvars, "basis": basis.labels()}


def load_basis(path: PathLike) -> MonomialBasis:
    """Monomial basis from a basis file or a certificate written by sos"""
    data = _read_json(path, ConstraintFormatError)
    if not isinstance(data, dict) or not isinstance(data.get("basis"), list) or not data["basis"]:
        raise ConstraintFormatError("Basis file needs a non-empty 'basis' list")
    labels = data["basis"]
    nvars = data.get("nvars")
    if nvars is None:
        nvars = max(_label_nvars(label) for label in labels)
    if not isinstance(nvars, int) or nvars < 1:
        raise ConstraintFormatError(f"'nvars' must be a positive integer, got {nvars!r}")
    basis = MonomialBasis.from_labels(labels, nvars)
    logger.info(f"📂 Loaded basis of {basis.n} monomials in {nvars} variables from {path}")
    return basis


def _label_nvars(label) -> int:
    return parse_polynomial(str(label)).used_nvars


def dump_basis(basis: MonomialBasis, path: PathLike):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(basis_to_json_dict(basis), handle, indent=2)


def load_experiment_spec(path: PathLike) -> Dict:
    data = _read_json(path, ExperimentSpecError)
    if not isinstance(data, dict):
        raise ExperimentSpecError("Experiment spec must be a JSON object")
    return data


def load_polynomial_text(path: PathLike) -> str:
    """Polynomial text from a file; lines are joined"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConstraintFormatError(f"File not found: {path}")
    return " ".join(line.strip() for line in text.splitlines() if line.strip())
