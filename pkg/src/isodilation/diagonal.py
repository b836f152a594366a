"""Diagonal fast path for scalar weighted shifts.

For a scalar shift every object in the construction is diagonal in the
standard basis: the defect forms, the invariant metric, the representer A,
B, U, and all weights.  This module computes those diagonals straight from
the weight rule (no eigendecompositions), both as a fast production route
and as an independent cross-check of the dense path.
"""

import math
from dataclasses import dataclass

import numpy as np

from .builder import DilationModel, ShiftWeights
from .errors import NotNegativeError, NotPsdError
from .hermitian import max_abs
from .operators import WeightRule
from .tolerances import DEFAULT_TOLERANCES, Tolerances


def defect_diagonal(rule: WeightRule, m: int, count: int) -> np.ndarray:
    """Diagonal of the m-th defect form of the shift, entries 0 .. count-1.

    Entry n is the alternating binomial sum over the squared weight products
    w_{n+1}^2 ... w_{n+k}^2, which is exact for every n (the rule generates
    the true infinite operator).
    """
    out = np.zeros(count)
    for n in range(count):
        ratio = 1.0
        acc = -1.0 if m % 2 else 1.0  # k = 0 term
        for k in range(1, m + 1):
            ratio *= rule.weight_sq(n + k)
            sign = -1.0 if (m - k) % 2 else 1.0
            acc += sign * math.comb(m, k) * ratio
        out[n] = acc
    return out


@dataclass(frozen=True)
class DiagonalModel:
    """Diagonals of the construction for a scalar shift, on the window."""

    m: int
    path: str
    window: int
    support: np.ndarray          # H' indices: metric diagonal above the rank cutoff
    defect_m_diag: np.ndarray
    defect_prev_diag: np.ndarray
    q_diag: np.ndarray | None    # metric diagonal on the window (general/badea)
    metric_diag: np.ndarray      # diagonal whose root defines U (path dependent)
    a_diag: np.ndarray           # on support
    b_diag: np.ndarray           # on support
    u_diag: np.ndarray           # on support
    weight_diags: tuple          # per n = 1..horizon, values on support


def _falling(n: int, m: int) -> float:
    prod = 1.0
    for i in range(m - 1):
        prod *= n - i
    return prod


def build_diagonal_model(
    rule: WeightRule,
    m: int,
    window: int,
    path: str,
    horizon: int,
    q_seq: np.ndarray | None = None,
    rank_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> DiagonalModel:
    """Diagonal analogue of the dense construction on the same window."""
    rtol = tols.rank_tol if rank_tol is None else rank_tol
    beta_m = defect_diagonal(rule, m, window)
    beta_prev = defect_diagonal(rule, m - 1, window) if m >= 2 else beta_m

    if path == "general_m":
        if q_seq is None:
            raise ValueError("general path needs the solved metric diagonal")
        metric = np.asarray(q_seq, dtype=float)[:window]
        numerator = beta_m
    elif path == "three_concave":
        metric = beta_prev
        beta3_next = defect_diagonal(rule, 3, window + 1)
        numerator = np.array(
            [rule.weight_sq(n + 1) * beta3_next[n + 1] for n in range(window)]
        )
    elif path == "badea_2iso":
        if q_seq is None:
            raise ValueError("reference path needs the solved metric diagonal")
        metric = np.asarray(q_seq, dtype=float)[:window] - beta_prev
        numerator = np.zeros(window)
    else:
        raise ValueError(f"unknown path {path!r}")

    floor = -tols.psd_tol * (1.0 + float(np.max(np.abs(metric), initial=0.0)))
    if np.min(metric, initial=0.0) < floor:
        raise NotPsdError(f"metric diagonal has entry below tolerance ({np.min(metric):.3e})")
    metric = np.clip(metric, 0.0, None)
    cutoff_scale = float(np.max(metric, initial=0.0))
    if path == "badea_2iso":
        # match the dense cutoff: roundoff in the difference lives at the
        # scale of the metric and the 1-defect
        cutoff_scale = max(
            cutoff_scale,
            float(np.max(np.abs(q_seq[:window]), initial=0.0))
            + float(np.max(np.abs(beta_prev), initial=0.0)),
        )
    cutoff = rtol * cutoff_scale
    support = np.nonzero(metric > cutoff)[0]

    a_vals = numerator[support] / metric[support] if support.size else np.zeros(0)
    ceiling = tols.psd_tol * (1.0 + float(np.max(np.abs(a_vals), initial=0.0)))
    if a_vals.size and np.max(a_vals) > ceiling:
        raise NotNegativeError(
            f"diagonal representer has positive entry {np.max(a_vals):.3e}"
        )
    a_vals = np.minimum(a_vals, 0.0)
    b_vals = np.sqrt(1.0 - a_vals)
    u_vals = np.sqrt(metric[support])

    scale = math.factorial(m - 1)
    if path == "badea_2iso":
        weight_diags = tuple(np.ones(support.size) for _ in range(horizon))
    else:
        p_prev = np.ones(support.size)
        diags = []
        for n in range(1, horizon + 1):
            p_n = 1.0 + (_falling(n, m) / scale) * (-a_vals)
            diags.append(np.sqrt(p_n / p_prev))
            p_prev = p_n
        weight_diags = tuple(diags)

    q_diag = np.asarray(q_seq, dtype=float)[:window] if q_seq is not None else None
    return DiagonalModel(
        m=m,
        path=path,
        window=window,
        support=support,
        defect_m_diag=beta_m,
        defect_prev_diag=beta_prev,
        q_diag=q_diag,
        metric_diag=metric,
        a_diag=a_vals,
        b_diag=b_vals,
        u_diag=u_vals,
        weight_diags=weight_diags,
    )


def embed_support_diagonal(window: int, support: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Window-sized diagonal matrix with the given values on the support."""
    out = np.zeros((window, window), dtype=np.complex128)
    out[support, support] = values
    return out


def dense_agreement_residual(
    model: DilationModel,
    weights: ShiftWeights,
    diag: DiagonalModel,
    n_weights: int = 8,
) -> float:
    """Max-norm disagreement between the dense path and the diagonal path.

    All compressed H'-operators are conjugated back into window coordinates
    before comparison, so the two paths are compared basis-free.
    """
    w = model.dim_h
    if w != diag.window:
        raise ValueError(f"window mismatch: dense {w}, diagonal {diag.window}")
    residual = max_abs(model.embed(model.a.mat) - embed_support_diagonal(w, diag.support, diag.a_diag))
    residual = max(
        residual,
        max_abs(model.embed(model.b.mat) - embed_support_diagonal(w, diag.support, diag.b_diag)),
    )
    # U compared as P * metric_root in window coordinates
    u_window = model.basis @ model.u
    u_diag_mat = embed_support_diagonal(w, diag.support, diag.u_diag)
    residual = max(residual, max_abs(u_window - u_diag_mat))
    count = min(n_weights, weights.horizon, len(diag.weight_diags))
    for n in range(1, count + 1):
        dense_s = model.embed(weights.weights[n - 1].mat)
        diag_s = embed_support_diagonal(w, diag.support, diag.weight_diags[n - 1])
        residual = max(residual, max_abs(dense_s - diag_s))
    if model.q is not None and model.q.q_seq is not None and diag.q_diag is not None:
        count_q = min(9, w)
        residual = max(
            residual,
            float(np.max(np.abs(model.q.q_seq[:count_q] - diag.q_diag[:count_q]))),
        )
    return residual
