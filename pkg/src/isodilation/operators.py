"""Operators as exact finite corners of banded (possibly infinite) operators.

A corner is the N-by-N leading block of an operator together with bandwidth
and exactness metadata.  Products and alternating sums of corners are only
trustworthy on a leading sub-block; `ExactWindow` carries the conservative
bound valid_dim = N - (operators applied) * (total bandwidth), which replaces
closure arguments about the infinite objects by exact finite accounting.

Finite-dimensional inputs (exact=False) are classified globally with no
window shrink.  Note that a finite-dimensional operator that is both
expansive and m-concave is necessarily unitary: its power growth is
polynomially bounded, forcing spectrum on the unit circle, while
expansivity forces |det| >= 1, so T*T = I.  All nontrivial examples are
therefore exact shift corners.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import WeightRuleError, WindowExhaustedError
from .hermitian import HermitianMatrix, hermitian, psd_check
from .tolerances import DEFAULT_TOLERANCES, Tolerances

RULE_NAMES = ("constant", "dirichlet", "geometric_concave", "table")


@dataclass(frozen=True)
class WeightRule:
    """Closed-form generator of positive scalar shift weights w_1, w_2, ...

    Catalog:
      constant(c):            w_j = c
      dirichlet:              w_j^2 = (j + 1) / j
      geometric_concave(r):   w_j^2 = 1 + r^j,  0 < r < 1
      table(values, tail):    explicit head, then a constant tail
    """

    kind: str
    c: float | None = None
    r: float | None = None
    values: tuple | None = None
    tail: float | None = None

    def __post_init__(self):
        if self.kind == "constant":
            if self.c is None or not (self.c > 0.0):
                raise WeightRuleError(f"constant rule needs c > 0, got {self.c!r}")
        elif self.kind == "dirichlet":
            pass
        elif self.kind == "geometric_concave":
            if self.r is None or not (0.0 < self.r < 1.0):
                raise WeightRuleError(
                    f"geometric_concave rule needs r in (0, 1), got {self.r!r}"
                )
        elif self.kind == "table":
            if not self.values or any(not (v > 0.0) for v in self.values):
                raise WeightRuleError("table rule needs a nonempty list of positive weights")
            if self.tail is None or not (self.tail > 0.0):
                raise WeightRuleError(f"table rule needs tail_value > 0, got {self.tail!r}")
        else:
            raise WeightRuleError(f"unknown weight rule {self.kind!r}")

    @staticmethod
    def constant(c: float) -> "WeightRule":
        return WeightRule("constant", c=float(c))

    @staticmethod
    def dirichlet() -> "WeightRule":
        return WeightRule("dirichlet")

    @staticmethod
    def geometric_concave(r: float) -> "WeightRule":
        return WeightRule("geometric_concave", r=float(r))

    @staticmethod
    def table(values, tail: float) -> "WeightRule":
        return WeightRule("table", values=tuple(float(v) for v in values), tail=float(tail))

    def weight_sq(self, j: int) -> float:
        """Squared weight w_j^2 for j >= 1, in closed form."""
        if j < 1:
            raise ValueError(f"weights are indexed from 1, got {j}")
        if self.kind == "constant":
            return self.c * self.c
        if self.kind == "dirichlet":
            return (j + 1) / j
        if self.kind == "geometric_concave":
            return 1.0 + self.r**j
        head = self.values
        w = head[j - 1] if j <= len(head) else self.tail
        return w * w

    def weight(self, j: int) -> float:
        return math.sqrt(self.weight_sq(j))

    def weights(self, count: int) -> np.ndarray:
        """Array of w_1 .. w_count."""
        return np.array([self.weight(j) for j in range(1, count + 1)])

    def weight_sq_products(self, count: int) -> np.ndarray:
        """Prefix products pi_n = w_1^2 * ... * w_n^2 for n = 0 .. count."""
        out = np.empty(count + 1)
        out[0] = 1.0
        for j in range(1, count + 1):
            out[j] = out[j - 1] * self.weight_sq(j)
        return out

    def label(self) -> str:
        if self.kind == "constant":
            return f"constant({self.c:g})"
        if self.kind == "geometric_concave":
            return f"geometric_concave({self.r:g})"
        if self.kind == "table":
            return f"table({len(self.values)} values, tail {self.tail:g})"
        return self.kind


@dataclass(frozen=True)
class ExactWindow:
    """Leading principal block of a computed corner that is truncation-exact."""

    valid_dim: int


@dataclass(frozen=True)
class OperatorCorner:
    """N-by-N corner of a banded operator, with exactness metadata.

    exact=True means the matrix is the literal upper-left corner of a
    declared infinite operator; exact=False means a free-standing
    finite-dimensional operator (no window shrink applies).
    """

    matrix: np.ndarray
    lower_band: int
    upper_band: int
    exact: bool
    rule: WeightRule | None = None

    def __post_init__(self):
        mat = self.matrix
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"corner must be square, got shape {mat.shape}")
        rows, cols = np.nonzero(mat)
        outside = (rows - cols > self.lower_band) | (cols - rows > self.upper_band)
        if np.any(outside):
            i, j = int(rows[outside][0]), int(cols[outside][0])
            raise ValueError(
                f"entry ({i},{j}) = {mat[i, j]} lies outside the declared band"
            )
        mat.setflags(write=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def bandwidth(self) -> int:
        return self.lower_band + self.upper_band

    def leading(self, k: int) -> "OperatorCorner":
        """Leading k-by-k block; still the exact corner of the same operator."""
        if not 1 <= k <= self.n:
            raise ValueError(f"cannot take leading {k} of dimension {self.n}")
        return OperatorCorner(
            self.matrix[:k, :k].copy(),
            self.lower_band,
            self.upper_band,
            self.exact,
            self.rule,
        )

    def window_after(self, applications: int) -> int:
        """Conservative exact window after composing this corner that many times."""
        if not self.exact:
            return self.n
        return self.n - applications * self.bandwidth


def make_shift_corner(rule: WeightRule, n: int) -> OperatorCorner:
    """Exact corner of the unilateral weighted shift generated by a rule.

    The shift maps basis vector e_{j-1} to w_j e_j, so the matrix carries
    w_1 .. w_{n-1} on the first subdiagonal.
    """
    if n < 2:
        raise ValueError(f"shift corner needs N >= 2, got {n}")
    mat = np.zeros((n, n), dtype=np.complex128)
    for j in range(1, n):
        mat[j, j - 1] = rule.weight(j)
    return OperatorCorner(mat, 1, 0, True, rule)


def dense_corner(entries) -> OperatorCorner:
    """Free-standing finite-dimensional operator (exact=False)."""
    mat = np.array(entries, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
        raise ValueError(f"dense operator must be square and nonempty, got {mat.shape}")
    if not np.all(np.isfinite(mat.view(np.float64))):
        raise ValueError("dense operator entries must be finite")
    rows, cols = np.nonzero(mat)
    lower = int(np.max(rows - cols)) if rows.size else 0
    upper = int(np.max(cols - rows)) if rows.size else 0
    return OperatorCorner(mat, max(lower, 0), max(upper, 0), False, None)


def power_window(t: OperatorCorner, n: int) -> tuple[np.ndarray, ExactWindow]:
    """n-th power of a corner with its exact window."""
    if n < 0:
        raise ValueError("power must be nonnegative")
    valid = t.window_after(n)
    if valid <= 0:
        raise WindowExhaustedError(
            f"power {n} of a bandwidth-{t.bandwidth} corner of size {t.n} has no exact window"
        )
    acc = np.eye(t.n, dtype=np.complex128)
    for _ in range(n):
        acc = t.matrix @ acc
    return acc, ExactWindow(valid)


def defect_form(t: OperatorCorner, m: int) -> tuple[HermitianMatrix, ExactWindow]:
    """m-th defect form: the alternating binomial sum over T*^k T^k, k = 0..m.

    The form vanishes exactly for m-isometries and is <= 0 for m-concave
    operators.  Exact on the leading (N - m * bandwidth) block for exact
    corners, everywhere for finite-dimensional ones.
    """
    if m < 1:
        raise ValueError(f"defect order must be >= 1, got {m}")
    valid = t.window_after(m)
    if valid <= 0:
        raise WindowExhaustedError(
            f"defect order {m} exhausts the window of a size-{t.n} corner "
            f"with bandwidth {t.bandwidth}"
        )
    acc = np.zeros((t.n, t.n), dtype=np.complex128)
    power = np.eye(t.n, dtype=np.complex128)
    for k in range(m + 1):
        if k > 0:
            power = t.matrix @ power
        sign = -1.0 if (m - k) % 2 else 1.0
        acc = acc + (sign * math.comb(m, k)) * (power.conj().T @ power)
    return hermitian(acc), ExactWindow(valid)


class FlagResidual(NamedTuple):
    ok: bool
    residual: float


@dataclass(frozen=True)
class Classification:
    """Toleranced classification flags, each with its witnessing residual.

    Residuals are minimum eigenvalues (for semidefiniteness flags) or
    max-norms (for the isometry flag), measured on the exact window only.
    """

    m: int
    expansive: FlagResidual
    m_concave: FlagResidual
    m_isometric: FlagResidual
    delta_psd: FlagResidual

    def as_dict(self) -> dict:
        return {
            "m": self.m,
            "expansive": {"ok": self.expansive.ok, "residual": self.expansive.residual},
            "m_concave": {"ok": self.m_concave.ok, "residual": self.m_concave.residual},
            "m_isometric": {
                "ok": self.m_isometric.ok,
                "residual": self.m_isometric.residual,
            },
            "delta_psd": {"ok": self.delta_psd.ok, "residual": self.delta_psd.residual},
        }


def classify(
    t: OperatorCorner,
    m: int,
    tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> Classification:
    """Classify a corner: expansive, m-concave, m-isometric, and whether the
    (m-1)-defect is nonnegative (the precondition for the invariant metric)."""
    ctol = tols.class_tol if tol is None else tol

    beta_m, win_m = defect_form(t, m)
    beta_m = beta_m.restrict(win_m.valid_dim)
    beta_1, win_1 = defect_form(t, 1)
    beta_1 = beta_1.restrict(win_1.valid_dim)
    if m - 1 >= 1:
        beta_prev, win_prev = defect_form(t, m - 1)
        beta_prev = beta_prev.restrict(win_prev.valid_dim)
    else:
        beta_prev = beta_1

    scale = 1.0 + beta_m.norm_max()
    exp_check = psd_check(beta_1, ctol)
    concave_check = psd_check(hermitian(-beta_m.mat), ctol)
    iso_norm = beta_m.norm_max()
    delta_check = psd_check(beta_prev, ctol)
    return Classification(
        m=m,
        expansive=FlagResidual(exp_check.is_psd, exp_check.min_eig),
        m_concave=FlagResidual(concave_check.is_psd, concave_check.min_eig),
        m_isometric=FlagResidual(iso_norm <= ctol * scale, iso_norm),
        delta_psd=FlagResidual(delta_check.is_psd, delta_check.min_eig),
    )
