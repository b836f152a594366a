"""Pipeline orchestration: classify, solve the metric, build, assemble, verify.

Path auto-selection follows the scope of the two construction routes:
expansive + m-concave inputs take the general path; for m = 3 a 3-concave
but non-expansive input takes the dedicated 3-concave path.  For m = 2 the
reference identity-weight dilation is built alongside and the norm-gap
certificate compares the two.

Reports are plain dicts, byte-stable for a fixed (spec, seed, version)
apart from the single timestamp in the header.
"""

import json
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __about__
from .builder import (
    AssembledDilation,
    DilationModel,
    ShiftWeights,
    assemble_dilation,
    build_badea_2iso,
    build_general_model,
    build_three_concave_model,
)
from .diagonal import DiagonalModel, build_diagonal_model, defect_diagonal, dense_agreement_residual
from .errors import PreconditionError, UnknownDemoError
from .hermitian import eigh, hermitian, max_abs
from .operators import Classification, OperatorCorner, classify, defect_form, dense_corner, make_shift_corner
from .qsolver import QSolution, solve_q_fixed_point, solve_q_shift_diagonal
from .specfile import OperatorSpecFile, spec_from_dict
from .tolerances import DEFAULT_SEED, DEFAULT_TRIALS, Tolerances
from .verifier import (
    CheckResult,
    VerificationReport,
    check_criterion_identity,
    check_cumulative_polynomial,
    check_dilation_property,
    check_minimality,
    check_powers_formula,
    check_w_m_isometry,
    check_weight_shift_isometry,
    nonisomorphism_certificate,
    remark_consistency,
)

DEMOS: dict[str, dict] = {
    "dirichlet-2iso": {
        "schema_version": 1,
        "operator": {"kind": "shift", "rule": {"name": "dirichlet"}},
        "m": 2,
        "truncation": {"N": 48, "n_blocks": 6},
    },
    "strict-2concave": {
        "schema_version": 1,
        "operator": {"kind": "shift", "rule": {"name": "geometric_concave", "r": 0.5}},
        "m": 2,
        "truncation": {"N": 48, "n_blocks": 6},
    },
    "scalar-3concave": {
        "schema_version": 1,
        "operator": {"kind": "dense", "entries": [[[0.7071067811865476, 0.0]]]},
        "m": 3,
        "truncation": {"n_blocks": 6},
    },
    "zero-operator": {
        "schema_version": 1,
        "operator": {"kind": "dense", "entries": [[[0.0, 0.0]]]},
        "m": 3,
        "truncation": {"n_blocks": 6},
    },
    "unitary": {
        "schema_version": 1,
        "operator": {
            "kind": "dense",
            "entries": [
                [[0.5, 0.0], [0.5, 0.0], [0.5, 0.0], [0.5, 0.0]],
                [[0.5, 0.0], [0.0, 0.5], [-0.5, 0.0], [0.0, -0.5]],
                [[0.5, 0.0], [-0.5, 0.0], [0.5, 0.0], [-0.5, 0.0]],
                [[0.5, 0.0], [0.0, -0.5], [-0.5, 0.0], [0.0, 0.5]],
            ],
        },
        "m": 2,
        "truncation": {"n_blocks": 6},
    },
    "nonisomorphic-pair": {
        "schema_version": 1,
        "operator": {"kind": "shift", "rule": {"name": "geometric_concave", "r": 0.5}},
        "m": 2,
        "truncation": {"N": 48, "n_blocks": 6},
    },
}


@dataclass
class PipelineResult:
    """Everything a pipeline run produced, for reporting and for tests."""

    spec: OperatorSpecFile
    tolerances: Tolerances
    seed: int
    corner: OperatorCorner
    classification: Classification
    path: str
    q: QSolution | None
    model: DilationModel
    weights: ShiftWeights
    assembled: AssembledDilation
    badea_model: DilationModel | None
    badea_weights: ShiftWeights | None
    badea_assembled: AssembledDilation | None
    diag_model: DiagonalModel | None
    verification: VerificationReport
    report: dict

    @property
    def overall(self) -> bool:
        return self.verification.overall

    @property
    def exit_code(self) -> int:
        return 0 if self.overall else 1


def _make_corner(spec: OperatorSpecFile):
    if spec.kind == "shift":
        return make_shift_corner(spec.rule, spec.n)
    return dense_corner(spec.entries_matrix())


def _admissible_paths(cls: Classification, m: int) -> list[str]:
    paths = []
    if cls.expansive.ok and cls.m_concave.ok and cls.delta_psd.ok:
        paths.append("general_m")
    if m == 3 and cls.m_concave.ok and cls.delta_psd.ok and "general_m" not in paths:
        paths.append("three_concave")
    return paths


def classify_spec(
    spec: OperatorSpecFile, tol_overrides: dict | None = None
) -> tuple[Classification, list[str], dict]:
    """Classification-only entry point (the `verify` subcommand)."""
    tols = spec.tolerances().replace(**(tol_overrides or {}))
    corner = _make_corner(spec)
    cls = classify(corner, spec.m, tols.class_tol, tols)
    admissible = _admissible_paths(cls, spec.m)
    report = {
        "schema_version": 1,
        "generated_by": f"isodilation {__about__.__version__}",
        "generated_at": _timestamp(),
        "input": spec.to_jsonable(),
        "classification": cls.as_dict(),
        "admissible_paths": admissible,
        "overall": bool(admissible),
    }
    return cls, admissible, report


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _solve_metric(spec, corner, m, tols) -> QSolution:
    if spec.kind == "shift":
        horizon = spec.horizon if spec.horizon is not None else 4 * spec.n
        delta_diag = defect_diagonal(spec.rule, m - 1, horizon + 1)
        window = corner.n - m * corner.bandwidth
        return solve_q_shift_diagonal(spec.rule, delta_diag, horizon, dim=window, tols=tols)
    delta, _ = defect_form(corner, m - 1)
    return solve_q_fixed_point(corner, delta, tols=tols)


def _norm_spectral(h) -> float:
    if h.n == 0:
        return 0.0
    return float(np.max(np.abs(eigh(h).values)))


def run_pipeline(
    spec: OperatorSpecFile,
    tol_overrides: dict | None = None,
    seed: int | None = None,
    trials: int = DEFAULT_TRIALS,
) -> PipelineResult:
    """Full pipeline: classify, solve the metric, build, assemble, verify.

    Raises PreconditionError when the classification admits no construction
    path (or the requested path is not admissible), carrying the failing
    residuals.
    """
    tols = spec.tolerances().replace(**(tol_overrides or {}))
    seed = seed if seed is not None else (spec.seed if spec.seed is not None else DEFAULT_SEED)
    m = spec.m
    n_blocks = spec.n_blocks
    corner = _make_corner(spec)

    cls = classify(corner, m, tols.class_tol, tols)
    admissible = _admissible_paths(cls, m)
    if spec.path is not None and spec.path != "badea_2iso":
        if spec.path not in admissible:
            raise PreconditionError(
                f"requested path {spec.path!r} is not admissible for this operator",
                details=cls.as_dict(),
            )
        path = spec.path
    elif spec.path == "badea_2iso":
        if "general_m" not in admissible:
            raise PreconditionError(
                "reference path needs an expansive 2-concave operator",
                details=cls.as_dict(),
            )
        path = "badea_2iso"
    elif admissible:
        path = admissible[0]
    else:
        raise PreconditionError(
            "operator admits no construction path "
            "(not expansive m-concave; not 3-concave with nonnegative 2-defect)",
            details=cls.as_dict(),
        )

    weights_horizon = max(n_blocks - 1, 8) + m + 1
    q: QSolution | None = None
    badea_model = badea_weights = badea_assembled = None

    if path == "three_concave":
        model, weights = build_three_concave_model(corner, weights_horizon, tols=tols)
        assembled = assemble_dilation(model, weights, n_blocks)
    else:
        q = _solve_metric(spec, corner, m, tols)
        if path == "badea_2iso":
            model, weights, assembled = build_badea_2iso(
                corner, q, n_blocks, weights_horizon, tols=tols
            )
        else:
            model, weights = build_general_model(corner, m, q, weights_horizon, tols=tols)
            assembled = assemble_dilation(model, weights, n_blocks)
    if m == 2 and path == "general_m":
        badea_model, badea_weights, badea_assembled = build_badea_2iso(
            corner, q, n_blocks, weights_horizon, tols=tols
        )

    diag_model = None
    if spec.kind == "shift":
        diag_model = build_diagonal_model(
            spec.rule,
            m,
            model.window.valid_dim,
            path,
            max(weights_horizon, 8),
            q_seq=q.q_seq if q is not None else None,
            tols=tols,
        )

    verification = _verify(
        model, weights, assembled, q, badea_model, badea_assembled, diag_model,
        cls, seed, trials, tols,
    )
    report = _build_report(
        spec, tols, seed, cls, path, q, model, weights, assembled,
        badea_model, badea_assembled, verification,
    )
    return PipelineResult(
        spec=spec,
        tolerances=tols,
        seed=seed,
        corner=corner,
        classification=cls,
        path=path,
        q=q,
        model=model,
        weights=weights,
        assembled=assembled,
        badea_model=badea_model,
        badea_weights=badea_weights,
        badea_assembled=badea_assembled,
        diag_model=diag_model,
        verification=verification,
        report=report,
    )


def _verify(
    model, weights, assembled, q, badea_model, badea_assembled, diag_model,
    cls, seed, trials, tols,
) -> VerificationReport:
    rep = VerificationReport()

    if q is not None:
        scale = 1.0 + q.q.norm_max()
        rep.add(CheckResult(
            "q_invariance", q.stein_residual, tols.stein_tol * scale,
            q.stein_residual <= tols.stein_tol * scale,
            f"Stein residual of the {q.method} metric",
        ))
        dom = max(0.0, -q.dominance_residual)
        rep.add(CheckResult(
            "q_dominance", dom, tols.psd_tol * scale,
            dom <= tols.psd_tol * scale,
            f"min eig of (metric - defect) = {q.dominance_residual:.3e}",
        ))

    welldef_limit = tols.welldef_tol * (1.0 + model.defect_m.norm_max())
    rep.add(CheckResult(
        "form_welldefined", model.welldef_residual, welldef_limit,
        model.welldef_residual <= welldef_limit,
        "quotient form vanishes on the metric kernel",
    ))

    i_minus_a = hermitian(np.eye(model.a.n) - model.a.mat, tols.herm_tol)
    b_sq_res = max_abs(model.b.mat @ model.b.mat - i_minus_a.mat)
    b_sq_limit = tols.sqrt_tol * (1.0 + i_minus_a.norm_max())
    rep.add(CheckResult(
        "b_square", b_sq_res, b_sq_limit, b_sq_res <= b_sq_limit,
        "B^2 reconstructs I - A",
    ))

    if model.path == "general_m":
        gram = model.u.conj().T @ model.u
        t_mat = model.corner.matrix
        diff = t_mat.conj().T @ gram @ t_mat - gram
        win = model.dim_h - model.corner.bandwidth if model.corner.exact else model.dim_h
        u_res = max_abs(diff[:win, :win])
        u_limit = tols.stein_tol * (1.0 + max_abs(gram))
        rep.add(CheckResult(
            "u_invariance", u_res, u_limit, u_res <= u_limit,
            f"T* U*U T = U*U on the leading {win}-block",
        ))

    rep.add(check_cumulative_polynomial(weights, model.p_coeffs, tols=tols))
    rep.add(check_weight_shift_isometry(weights, model.m, tols=tols))
    rep.add(check_dilation_property(assembled, tols=tols))
    rep.add(check_powers_formula(assembled, trials=trials, seed=seed, tols=tols))
    rep.add(check_w_m_isometry(assembled, trials=trials, seed=seed, tols=tols))
    rep.add(check_criterion_identity(model, weights, trials=trials, seed=seed, tols=tols))
    rep.add(check_minimality(assembled))
    if model.path != "badea_2iso":
        rep.add(remark_consistency(model, weights, tols=tols))

    if diag_model is not None:
        agree = dense_agreement_residual(model, weights, diag_model)
        rep.add(CheckResult(
            "diagonal_dense_agreement", agree, tols.agreement_tol,
            agree <= tols.agreement_tol,
            "diagonal fast path vs dense eigendecomposition path (A, B, U, S, q)",
        ))

    if badea_assembled is not None:
        rep.add(_renamed(check_dilation_property(badea_assembled, tols=tols), "badea_dilation_property"))
        rep.add(_renamed(
            check_w_m_isometry(badea_assembled, trials=trials, seed=seed, tols=tols),
            "badea_w_m_isometry",
        ))
        rep.add(_renamed(check_minimality(badea_assembled), "badea_minimality"))
        expected_found = not _is_isometric(model, tols)
        rep.add(nonisomorphism_certificate(
            assembled, badea_assembled, expected_found=expected_found,
            trials=trials, seed=seed, tols=tols,
        ))
    return rep


def _is_isometric(model: DilationModel, tols: Tolerances) -> bool:
    beta1, _ = defect_form(model.corner, 1)
    w = model.dim_h - model.corner.bandwidth if model.corner.exact else model.dim_h
    return max_abs(beta1.mat[:w, :w]) <= tols.class_tol


def _renamed(check: CheckResult, name: str) -> CheckResult:
    return CheckResult(name, check.residual, check.tolerance, check.passed, check.window)


def _build_report(
    spec, tols, seed, cls, path, q, model, weights, assembled,
    badea_model, badea_assembled, verification,
) -> dict:
    weights_head = [max_abs(s.mat) for s in weights.weights[:8]]
    model_summary = {
        "path": path,
        "dim_h": model.dim_h,
        "dim_hprime": model.dim_hprime,
        "n_blocks": assembled.n_blocks,
        "b_norm": _norm_spectral(model.b),
        "ratio_bound": model.ratio_bound,
        "rayleigh_bound": model.rayleigh_bound,
        "welldef_residual": model.welldef_residual,
        "weights_head": weights_head,
    }
    q_summary = None
    if q is not None:
        q_summary = {
            "method": q.method,
            "q0": q.q0,
            "stein_residual": q.stein_residual,
            "dominance_residual": q.dominance_residual,
            "iterations": q.iterations,
        }
    badea_summary = None
    if badea_model is not None:
        badea_summary = {
            "dim_hprime": badea_model.dim_hprime,
            "u_norm": max_abs(badea_model.u),
        }
    report = {
        "schema_version": 1,
        "generated_by": f"isodilation {__about__.__version__}",
        "generated_at": _timestamp(),
        "input": spec.to_jsonable(),
        "seed": seed,
        "classification": cls.as_dict(),
        "path": path,
        "q_solution": q_summary,
        "model": model_summary,
        "badea": badea_summary,
        "checks": [c.as_dict() for c in verification.checks],
        "overall": verification.overall,
    }
    return _plain(report)


def _plain(obj):
    """Recursively convert numpy scalars so json emission is deterministic."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def emit_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def demo_spec(name: str) -> OperatorSpecFile:
    if name not in DEMOS:
        raise UnknownDemoError(
            f"unknown demo {name!r}; available: {', '.join(sorted(DEMOS))}"
        )
    return spec_from_dict(DEMOS[name])


def demo(name: str, seed: int | None = None) -> PipelineResult:
    """Run a pinned spec from the built-in catalog."""
    return run_pipeline(demo_spec(name), seed=seed)
