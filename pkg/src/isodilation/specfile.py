"""Operator spec files: parsing, validation, canonical emission.

Specs are JSON with an explicit schema_version; complex numbers are
[re, im] pairs.  Structural validation is delegated to a JSON Schema,
followed by semantic checks (rule catalog, parameter ranges, truncation
bounds).  Unknown fields and unknown rule names are rejected.
"""

import json
from dataclasses import dataclass, field

import jsonschema

from .builder import PATHS
from .errors import SpecParseError, SpecValidationError, WeightRuleError
from .operators import RULE_NAMES, WeightRule
from .tolerances import Tolerances

SCHEMA_VERSION = 1

_COMPLEX_PAIR = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}

_TOLERANCE_FIELDS = sorted(Tolerances.__dataclass_fields__.keys())

SPEC_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "operator": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["shift", "dense"]},
                "rule": {
                    "type": "object",
                    "properties": {
                        "name": {"type": "string"},
                        "c": {"type": "number"},
                        "r": {"type": "number"},
                        "values": {
                            "type": "array",
                            "items": {"type": "number"},
                            "minItems": 1,
                        },
                        "tail_value": {"type": "number"},
                    },
                    "required": ["name"],
                    "additionalProperties": False,
                },
                "entries": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "array", "minItems": 1, "items": _COMPLEX_PAIR},
                },
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "m": {"type": "integer", "minimum": 2},
        "path": {"enum": list(PATHS)},
        "truncation": {
            "type": "object",
            "properties": {
                "N": {"type": "integer", "minimum": 1},
                "n_blocks": {"type": "integer", "minimum": 1},
                "horizon": {"type": "integer", "minimum": 8},
            },
            "required": ["n_blocks"],
            "additionalProperties": False,
        },
        "tolerances": {
            "type": "object",
            "properties": {name: {"type": "number", "exclusiveMinimum": 0} for name in _TOLERANCE_FIELDS},
            "additionalProperties": False,
        },
        "seed": {"type": "integer", "minimum": 0},
    },
    "required": ["operator", "m", "truncation"],
    "additionalProperties": False,
}


@dataclass(frozen=True)
class OperatorSpecFile:
    """Validated operator spec.

    Dense entries are kept as nested tuples of (re, im) pairs so the value
    is hashable and round-trips exactly through emission and parsing.
    """

    kind: str
    m: int
    n_blocks: int
    schema_version: int = SCHEMA_VERSION
    rule: WeightRule | None = None
    entries: tuple | None = None
    path: str | None = None
    n: int | None = None
    horizon: int | None = None
    tolerance_overrides: tuple = field(default_factory=tuple)  # sorted (name, value)
    seed: int | None = None

    @property
    def dense_dim(self) -> int | None:
        return len(self.entries) if self.entries is not None else None

    def entries_matrix(self):
        """Dense entries as a nested list of complex numbers."""
        if self.entries is None:
            raise ValueError("spec has no dense entries")
        return [[complex(re, im) for re, im in row] for row in self.entries]

    def tolerances(self, base: Tolerances | None = None) -> Tolerances:
        base = base if base is not None else Tolerances()
        return base.replace(**dict(self.tolerance_overrides))

    def to_jsonable(self) -> dict:
        op: dict = {"kind": self.kind}
        if self.kind == "shift":
            op["rule"] = _rule_to_json(self.rule)
        else:
            op["entries"] = [[[re, im] for re, im in row] for row in self.entries]
        out: dict = {
            "schema_version": self.schema_version,
            "operator": op,
            "m": self.m,
        }
        if self.path is not None:
            out["path"] = self.path
        trunc: dict = {"n_blocks": self.n_blocks}
        if self.n is not None:
            trunc["N"] = self.n
        if self.horizon is not None:
            trunc["horizon"] = self.horizon
        out["truncation"] = trunc
        if self.tolerance_overrides:
            out["tolerances"] = dict(self.tolerance_overrides)
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def _rule_to_json(rule: WeightRule) -> dict:
    if rule.kind == "constant":
        return {"name": "constant", "c": rule.c}
    if rule.kind == "geometric_concave":
        return {"name": "geometric_concave", "r": rule.r}
    if rule.kind == "table":
        return {"name": "table", "values": list(rule.values), "tail_value": rule.tail}
    return {"name": rule.kind}


def _rule_from_json(data: dict, errors: list) -> WeightRule | None:
    name = data.get("name")
    if name not in RULE_NAMES:
        errors.append(f"operator.rule: unknown weight rule {name!r}")
        return None
    params = {k for k in data if k != "name"}
    allowed = {
        "constant": {"c"},
        "dirichlet": set(),
        "geometric_concave": {"r"},
        "table": {"values", "tail_value"},
    }[name]
    stray = params - allowed
    if stray:
        errors.append(
            f"operator.rule: rule {name!r} does not take parameter(s) {sorted(stray)}"
        )
        return None
    try:
        if name == "constant":
            if "c" not in data:
                errors.append("operator.rule: constant rule requires parameter c")
                return None
            return WeightRule.constant(data["c"])
        if name == "dirichlet":
            return WeightRule.dirichlet()
        if name == "geometric_concave":
            if "r" not in data:
                errors.append("operator.rule: geometric_concave rule requires parameter r")
                return None
            return WeightRule.geometric_concave(data["r"])
        if "values" not in data or "tail_value" not in data:
            errors.append("operator.rule: table rule requires values and tail_value")
            return None
        return WeightRule.table(data["values"], data["tail_value"])
    except WeightRuleError as exc:
        errors.append(f"operator.rule: {exc}")
        return None


def spec_from_dict(data: dict) -> OperatorSpecFile:
    """Validate a decoded spec dict and build the typed spec."""
    validator = jsonschema.Draft202012Validator(SPEC_SCHEMA)
    errors = []
    for err in sorted(validator.iter_errors(data), key=lambda e: e.json_path):
        errors.append(f"{err.json_path}: {err.message}")
    if errors:
        raise SpecValidationError("spec failed schema validation", errors)

    op = data["operator"]
    kind = op["kind"]
    m = data["m"]
    trunc = data["truncation"]
    n_blocks = trunc["n_blocks"]
    n = trunc.get("N")
    horizon = trunc.get("horizon")
    path = data.get("path")
    seed = data.get("seed")
    overrides = tuple(sorted((data.get("tolerances") or {}).items()))

    rule = None
    entries = None
    if kind == "shift":
        if "rule" not in op:
            errors.append("operator: shift operators require a rule")
        elif "entries" in op:
            errors.append("operator: shift operators do not take entries")
        else:
            rule = _rule_from_json(op["rule"], errors)
        if n is None:
            errors.append("truncation: shift operators require N")
        elif n < 2 * m + 2:
            errors.append(f"truncation: N = {n} too small, need N >= 2m + 2 = {2 * m + 2}")
        if horizon is not None and n is not None and horizon < n:
            errors.append(f"truncation: horizon {horizon} must be at least N = {n}")
    else:
        if "entries" not in op:
            errors.append("operator: dense operators require entries")
        elif "rule" in op:
            errors.append("operator: dense operators do not take a rule")
        else:
            rows = op["entries"]
            dim = len(rows)
            if any(len(row) != dim for row in rows):
                errors.append("operator.entries: matrix must be square")
            else:
                entries = tuple(
                    tuple((float(re), float(im)) for re, im in row) for row in rows
                )
            if n is not None and n != dim:
                errors.append(
                    f"truncation: N = {n} does not match the dense dimension {dim}"
                )

    if n_blocks < m + 2:
        errors.append(f"truncation: n_blocks = {n_blocks} too small, need >= m + 2 = {m + 2}")
    if path == "three_concave" and m != 3:
        errors.append(f"path: three_concave requires m = 3, got m = {m}")
    if path == "badea_2iso" and m != 2:
        errors.append(f"path: badea_2iso requires m = 2, got m = {m}")

    if errors:
        raise SpecValidationError("spec failed validation", errors)
    return OperatorSpecFile(
        kind=kind,
        m=m,
        n_blocks=n_blocks,
        rule=rule,
        entries=entries,
        path=path,
        n=n,
        horizon=horizon,
        tolerance_overrides=overrides,
        seed=seed,
    )


def parse_spec(text: str) -> OperatorSpecFile:
    """Parse and validate spec text; parse errors carry line context."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(
            f"spec is not valid JSON: {exc.msg} at line {exc.lineno}, column {exc.colno}"
        ) from exc
    if not isinstance(data, dict):
        raise SpecValidationError("spec must be a JSON object")
    return spec_from_dict(data)


def emit_spec(spec: OperatorSpecFile) -> str:
    """Canonical, diff-friendly emission of a spec."""
    return json.dumps(spec.to_jsonable(), indent=2, sort_keys=True) + "\n"
