"""Scenario files and report serialization.

Scenario file layout::

    {"version": "1",
     "scenario": {"rho_B": M, "H_B": M, "rho_C": M, "H_C": M,
                  "catalyst_kind": "...", "seed": 0, "tolerances": {...}},
     "options": {"budget": 20, "seed": 0, ...}}

with every ``M`` in the shared matrix format.  ``rho_C`` and ``H_C`` may be
omitted for commands that do not need them.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nogo import CatalysisScenario
from .qstate import (
    DEFAULT_TOLERANCES,
    DensityMatrix,
    HermitianOperator,
    Tolerances,
    ValidationError,
    matrix_from_json,
    matrix_to_json,
)

SUPPORTED_VERSIONS = ("1",)
SIG_DIGITS = 12


def fmt_float(x: float) -> float:
    """Round to 12 significant digits."""
    if not math.isfinite(x):
        return x
    return float(f"{x:.{SIG_DIGITS}g}")


def clean(obj):
    """Recursively convert numpy scalars and round floats for output."""
    if isinstance(obj, dict):
        return {k: clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt_float(float(obj))
    return obj


def matrix_out(m) -> dict:
    return matrix_to_json(m, digits=SIG_DIGITS)


@dataclass
class ScenarioSpec:
    """Parsed scenario file; catalyst fields may be missing."""

    rho_B: DensityMatrix
    H_B: HermitianOperator
    rho_C: DensityMatrix | None = None
    H_C: HermitianOperator | None = None
    catalyst_kind: str = "correlated"
    seed: int = 0
    tolerances: Tolerances = DEFAULT_TOLERANCES
    options: dict = field(default_factory=dict)

    def require_catalyst(self) -> None:
        missing = [n for n in ("rho_C", "H_C") if getattr(self, n) is None]
        if missing:
            raise ValidationError("missing-field", f"scenario lacks {', '.join(missing)}")

    def scenario(self, kind: str | None = None) -> CatalysisScenario:
        self.require_catalyst()
        return CatalysisScenario(
            self.rho_B, self.H_B, self.rho_C, self.H_C, kind or self.catalyst_kind, self.tolerances, self.seed
        )

    def to_json(self) -> dict:
        sc = {"rho_B": matrix_to_json(self.rho_B.data), "H_B": matrix_to_json(self.H_B.data)}
        if self.rho_C is not None:
            sc["rho_C"] = matrix_to_json(self.rho_C.data)
        if self.H_C is not None:
            sc["H_C"] = matrix_to_json(self.H_C.data)
        sc.update(catalyst_kind=self.catalyst_kind, seed=self.seed, tolerances=self.tolerances.as_dict())
        return {"version": SUPPORTED_VERSIONS[-1], "scenario": sc, "options": dict(self.options)}


def _matrix(obj: dict, name: str, cls, tol: Tolerances):
    if name not in obj:
        return None
    m = matrix_from_json(obj[name])
    try:
        if cls is DensityMatrix:
            return DensityMatrix(m, tol=tol)
        return HermitianOperator(m, tol=tol)
    except ValidationError as exc:
        raise ValidationError(exc.invariant, f"{name}: {exc}") from None


def parse_scenario(doc: dict, tol_overrides: dict | None = None) -> ScenarioSpec:
    if not isinstance(doc, dict):
        raise ValidationError("file-format", "scenario file must hold a JSON object")
    version = str(doc.get("version", ""))
    if version not in SUPPORTED_VERSIONS:
        raise ValidationError("version", f"unsupported scenario version {version!r}")
    sc = doc.get("scenario")
    if not isinstance(sc, dict):
        raise ValidationError("file-format", "missing 'scenario' object")
    tol = DEFAULT_TOLERANCES.with_overrides(sc.get("tolerances")).with_overrides(tol_overrides)
    rho_B = _matrix(sc, "rho_B", DensityMatrix, tol)
    H_B = _matrix(sc, "H_B", HermitianOperator, tol)
    if rho_B is None or H_B is None:
        raise ValidationError("missing-field", "scenario needs rho_B and H_B")
    return ScenarioSpec(
        rho_B=rho_B,
        H_B=H_B,
        rho_C=_matrix(sc, "rho_C", DensityMatrix, tol),
        H_C=_matrix(sc, "H_C", HermitianOperator, tol),
        catalyst_kind=sc.get("catalyst_kind", "correlated"),
        seed=int(sc.get("seed", 0)),
        tolerances=tol,
        options=dict(doc.get("options", {})),
    )


_PAIR = re.compile(r"\[\s+(-?[\d.eE+-]+),\s+(-?[\d.eE+-]+)\s+\]")


def dumps(doc: dict) -> str:
    """Indented JSON with each ``[re, im]`` pair on one line."""
    return _PAIR.sub(r"[\1, \2]", json.dumps(doc, indent=2)) + "\n"


def load_scenario(path, tol_overrides: dict | None = None) -> ScenarioSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError("file-format", f"{path}: not valid JSON ({exc})") from None
    except OSError as exc:
        raise ValidationError("file-format", f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(doc, tol_overrides)


def validate_report(doc: dict) -> dict:
    """Re-validate embedded states and re-parse embedded operators."""
    tol = DEFAULT_TOLERANCES.with_overrides(doc.get("tolerances"))
    for name, obj in doc.get("states", {}).items():
        try:
            DensityMatrix(matrix_from_json(obj), tol=tol)
        except ValidationError as exc:
            raise ValidationError(exc.invariant, f"report state {name}: {exc}") from None
    for name, obj in doc.get("operators", {}).items():
        matrix_from_json(obj)
    return doc
