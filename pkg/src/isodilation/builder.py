"""Constructive assembly of m-isometric dilations.

Given an operator corner T (expansive and m-concave, or 3-concave), the
builder produces the pieces of the block dilation

        W = [ T  0   0   0  ...
              U  0   0   0  ...
              0  S1  0   0  ...
              0  0   S2  0  ...
              ...              ]

on H + l2(H'), where H' is the numerical range of the relevant metric root:

* general path: U is the square root of an invariant metric Q with
  T*QT = Q, and A on H' represents the m-defect through the quotient form
  <A Q^(1/2) f, Q^(1/2) g> = <defect_m f, g>;
* 3-concave path: U is the square root of the 2-defect Delta, and A
  represents <T* defect_3 T f, g> over the range of Delta^(1/2);
* reference path (identity weights): U = (Q - defect_1)^(1/2), all S_j = I.

The weight sequence comes from the degree-(m-1) matrix polynomial
p(z) = z(z-1)...(z-m+2)/(m-1)! * (-A) + I via the commuting telescoping
construction S_n = p(n)^(1/2) p(n-1)^(-1/2), which gives cumulative moduli
|S_n ... S_1|^2 = p(n) exactly and hence an m-isometric weight shift.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    DimensionError,
    IllDefinedFormError,
    NotInvertibleError,
    NotNegativeError,
    NotPsdError,
)
from .hermitian import (
    EigenDecomposition,
    HermitianMatrix,
    eigh,
    hermitian,
    identity,
    max_abs,
    poly_eval,
    psd_check,
    spectral_apply,
)
from .operators import ExactWindow, OperatorCorner, defect_form
from .qsolver import QSolution
from .tolerances import DEFAULT_TOLERANCES, Tolerances

PATHS = ("general_m", "three_concave", "badea_2iso")


@dataclass(frozen=True)
class DilationModel:
    """Everything produced by one construction run, on the exact window.

    `corner` is the window-restricted H-block operator; `basis` holds
    orthonormal columns spanning H' inside H-coordinates; `u` maps H to H'
    in the compressed coordinates; `a` and `b` live on H'.
    """

    m: int
    path: str
    corner: OperatorCorner
    window: ExactWindow
    defect_m: HermitianMatrix
    defect_prev: HermitianMatrix
    q: QSolution | None
    basis: np.ndarray
    u: np.ndarray
    a: HermitianMatrix
    b: HermitianMatrix
    p_coeffs: tuple
    ratio_bound: float
    rayleigh_bound: float
    welldef_residual: float
    # window norm of the form the representer A stands for: the m-defect on
    # the general path, the T-compressed 3-defect on the 3-concave path.
    # S_(m-1) = I exactly when this form vanishes.
    remark_form_norm: float = 0.0

    def __post_init__(self):
        self.basis.setflags(write=False)
        self.u.setflags(write=False)

    @property
    def dim_h(self) -> int:
        return self.corner.n

    @property
    def dim_hprime(self) -> int:
        return self.basis.shape[1]

    def embed(self, x: np.ndarray) -> np.ndarray:
        """Conjugate an H'-operator back into H-coordinates."""
        return self.basis @ x @ self.basis.conj().T


@dataclass(frozen=True)
class ShiftWeights:
    """Weight sequence S_1, S_2, ... with cumulative moduli |S_n...S_1|^2."""

    weights: tuple
    cumulative: tuple

    @property
    def horizon(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class AssembledDilation:
    """Finite truncation of the dilation on H + n_blocks copies of H'."""

    matrix: np.ndarray
    dim_h: int
    dim_hprime: int
    n_blocks: int
    model: DilationModel

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def dim_total(self) -> int:
        return self.dim_h + self.n_blocks * self.dim_hprime

    def block_slice(self, k: int) -> slice:
        """Coordinate slice of block k (0 is H, 1..n_blocks are H' copies)."""
        if k == 0:
            return slice(0, self.dim_h)
        if not 1 <= k <= self.n_blocks:
            raise IndexError(f"block {k} outside 0..{self.n_blocks}")
        start = self.dim_h + (k - 1) * self.dim_hprime
        return slice(start, start + self.dim_hprime)


class QuotientForm(NamedTuple):
    a: HermitianMatrix
    basis: np.ndarray
    welldef_residual: float
    metric_root: HermitianMatrix
    numerator_norm: float


def _quotient_form(
    metric: HermitianMatrix,
    numerator: HermitianMatrix,
    rank_tol: float | None,
    tols: Tolerances,
    what: str,
) -> QuotientForm:
    """Represent the form <X f, g> on the range of metric^(1/2).

    With R the PSD square root of the metric, the representer is
    R+ X R+ compressed to the numerical range; the construction is well
    defined only when X vanishes on the kernel of R, certified by the
    residual ||X - R (R+ X R+) R||.
    """
    rtol = tols.rank_tol if rank_tol is None else rank_tol
    dec = eigh(metric, tols.eig_tol)
    floor = -tols.psd_tol * (1.0 + metric.norm_max())
    if metric.n and dec.values[0] < floor:
        raise NotPsdError(f"{what}: metric not PSD (min eig {dec.values[0]:.3e})")
    lam = np.clip(dec.values, 0.0, None)
    lam_max = float(lam[-1]) if metric.n else 0.0
    kept = lam > rtol * lam_max
    root = spectral_apply(dec, np.sqrt(lam))
    inv_root = spectral_apply(dec, np.where(kept, 1.0 / np.sqrt(np.where(kept, lam, 1.0)), 0.0))
    basis = np.ascontiguousarray(dec.basis[:, kept])

    a_full = inv_root @ numerator.mat @ inv_root
    welldef = max_abs(numerator.mat - root @ a_full @ root)
    limit = tols.welldef_tol * (1.0 + numerator.norm_max())
    if welldef > limit:
        raise IllDefinedFormError(
            f"{what}: form does not vanish on the metric kernel "
            f"(residual {welldef:.3e}, allowed {limit:.3e})"
        )
    a = hermitian(basis.conj().T @ a_full @ basis, tols.herm_tol)
    return QuotientForm(
        a, basis, welldef, hermitian(root, tols.herm_tol), numerator.norm_max()
    )


def _clamp_nonpositive(a: HermitianMatrix, tols: Tolerances, what: str) -> HermitianMatrix:
    """Enforce A <= 0, clamping eigenvalues positive within psd_tol to zero."""
    if a.n == 0:
        return a
    dec = eigh(a, tols.eig_tol)
    ceiling = tols.psd_tol * (1.0 + a.norm_max())
    if dec.values[-1] > ceiling:
        raise NotNegativeError(
            f"{what}: representer has positive eigenvalue {dec.values[-1]:.3e}, "
            "contradicting concavity"
        )
    if dec.values[-1] <= 0.0:
        return a
    return hermitian(spectral_apply(dec, np.minimum(dec.values, 0.0)), tols.herm_tol)


def build_a_general(
    q: QSolution,
    defect_m: HermitianMatrix,
    window: ExactWindow,
    rank_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> QuotientForm:
    """Representer of the m-defect over the range of the metric root."""
    w = min(window.valid_dim, defect_m.n, q.q.n)
    form = _quotient_form(
        q.q.restrict(w), defect_m.restrict(w), rank_tol, tols, "general construction"
    )
    a = _clamp_nonpositive(form.a, tols, "general construction")
    return form._replace(a=a)


def build_a_three_concave(
    t: OperatorCorner,
    delta: HermitianMatrix,
    window: ExactWindow,
    rank_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> QuotientForm:
    """Representer of <T* defect_3 T f, g> over the range of the 2-defect root.

    Both sign preconditions are checked: the 2-defect must be nonnegative
    and the 3-defect nonpositive on the window.
    """
    beta3, win3 = defect_form(t, 3)
    compressed = t.matrix.conj().T @ beta3.mat @ t.matrix
    w = min(window.valid_dim, win3.valid_dim - (t.bandwidth if t.exact else 0), delta.n)
    if w <= 0:
        raise DimensionError("no exact window left for the 3-concave construction")

    delta_w = delta.restrict(w)
    gate = psd_check(delta_w, tols.psd_tol)
    if not gate.is_psd:
        raise NotPsdError(f"2-defect must be nonnegative (min eig {gate.min_eig:.3e})")
    beta3_w = beta3.restrict(w)
    sign = psd_check(hermitian(-beta3_w.mat), tols.psd_tol)
    if not sign.is_psd:
        raise NotNegativeError(
            f"operator is not 3-concave on the window (max eig {-sign.min_eig:.3e})"
        )

    numerator = hermitian(compressed[:w, :w], tols.herm_tol)
    form = _quotient_form(delta_w, numerator, rank_tol, tols, "3-concave construction")
    a = _clamp_nonpositive(form.a, tols, "3-concave construction")
    return form._replace(a=a)


def _falling_factorial_coeffs(m: int) -> list[int]:
    """Integer coefficients of z (z-1) ... (z-m+2), lowest degree first."""
    coeffs = [1]
    for j in range(m - 1):
        shifted = [0] + coeffs                      # z * poly
        scaled = [-j * c for c in coeffs] + [0]     # -j * poly
        coeffs = [a + b for a, b in zip(shifted, scaled)]
    return coeffs


def ratio_bound_constant(m: int, scan: int = 256) -> float:
    """Supremum over n >= m-1 of the successive falling-product ratio."""
    best = 1.0
    for n in range(m - 1, m - 1 + scan):
        num = 1.0
        den = 1.0
        for i in range(m - 1):
            num *= n + 1 - i
            den *= n - i
        best = max(best, num / den)
    return best


class WeightsBuild(NamedTuple):
    p_coeffs: tuple
    weights: "ShiftWeights"
    ratio_bound: float


def build_p_and_weights(
    a: HermitianMatrix,
    m: int,
    horizon: int,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> WeightsBuild:
    """Expand the weight polynomial and derive the telescoping weights.

    The falling factorial is expanded with exact integer coefficients and
    scaled by 1/(m-1)!, avoiding cancellation at large evaluation points.
    Every p(n) is a polynomial in the single Hermitian matrix A, so the
    values commute and S_n = p(n)^(1/2) p(n-1)^(-1/2) is positive definite
    with |S_n ... S_1|^2 telescoping to p(n).
    """
    if m < 2:
        raise ValueError(f"weight construction needs m >= 2, got {m}")
    d = a.n
    fall = _falling_factorial_coeffs(m)
    scale = math.factorial(m - 1)
    neg_a = -a.mat
    coeffs = []
    for k, s_k in enumerate(fall):
        term = (s_k / scale) * neg_a
        if k == 0:
            term = term + np.eye(d)
        coeffs.append(hermitian(term, tols.herm_tol))
    p_coeffs = tuple(coeffs)

    weights = []
    cumulative = []
    prev_dec: EigenDecomposition | None = None
    left_product = np.eye(d, dtype=np.complex128)
    for n in range(1, horizon + 1):
        p_n = poly_eval(p_coeffs, n, tols.comm_tol)
        dec_n = eigh(p_n, tols.eig_tol)
        if d and dec_n.values[0] <= tols.inv_tol:
            raise NotInvertibleError(
                f"p({n}) has minimal eigenvalue {dec_n.values[0]:.3e}; "
                "input representer was not nonpositive"
            )
        sqrt_n = spectral_apply(dec_n, np.sqrt(dec_n.values))
        if prev_dec is None:
            inv_sqrt_prev = np.eye(d, dtype=np.complex128)
        else:
            inv_sqrt_prev = spectral_apply(prev_dec, 1.0 / np.sqrt(prev_dec.values))
        s_n = hermitian(sqrt_n @ inv_sqrt_prev, tols.herm_tol)
        weights.append(s_n)
        left_product = s_n.mat @ left_product
        cumulative.append(hermitian(left_product.conj().T @ left_product, tols.herm_tol))
        prev_dec = dec_n

    return WeightsBuild(
        p_coeffs, ShiftWeights(tuple(weights), tuple(cumulative)), ratio_bound_constant(m)
    )


def perturb_weight(weights: ShiftWeights, n: int, amount: float) -> ShiftWeights:
    """Copy of a weight sequence with S_n shifted by amount * I (negative control)."""
    if not 1 <= n <= weights.horizon:
        raise IndexError(f"weight index {n} outside 1..{weights.horizon}")
    new_weights = list(weights.weights)
    bumped = new_weights[n - 1].mat + amount * np.eye(new_weights[n - 1].n)
    new_weights[n - 1] = hermitian(bumped)
    cumulative = []
    left = np.eye(bumped.shape[0], dtype=np.complex128)
    for s in new_weights:
        left = s.mat @ left
        cumulative.append(hermitian(left.conj().T @ left))
    return ShiftWeights(tuple(new_weights), tuple(cumulative))


def assemble_dilation(
    model: DilationModel,
    weights: ShiftWeights,
    n_blocks: int,
) -> AssembledDilation:
    """Assemble the truncated block matrix of the dilation.

    Block (0,0) is T, block (1,0) is U, block (j+1, j) is S_j; everything
    else is zero.  A zero-dimensional H' yields W = T, the degenerate
    dilation of an isometric input.  Spec files enforce n_blocks >= m + 2
    so every verifier window is nonempty; the assembly itself only needs
    two blocks.
    """
    if n_blocks < 2:
        raise DimensionError(f"need at least 2 blocks, got {n_blocks}")
    w = model.dim_h
    d = model.dim_hprime
    if d and weights.horizon < n_blocks - 1:
        raise DimensionError(
            f"need {n_blocks - 1} weights to fill {n_blocks} blocks, have {weights.horizon}"
        )
    if model.u.shape != (d, w):
        raise DimensionError(f"U must be {d}x{w}, got {model.u.shape}")
    total = w + n_blocks * d
    mat = np.zeros((total, total), dtype=np.complex128)
    mat[:w, :w] = model.corner.matrix
    if d:
        mat[w : w + d, :w] = model.u
        for j in range(1, n_blocks):
            rows = slice(w + j * d, w + (j + 1) * d)
            cols = slice(w + (j - 1) * d, w + j * d)
            mat[rows, cols] = weights.weights[j - 1].mat
    return AssembledDilation(mat, w, d, n_blocks, model)


def _restricted_defects(t: OperatorCorner, m: int, w: int, tols: Tolerances):
    beta_m, _ = defect_form(t, m)
    if m - 1 >= 1:
        beta_prev, _ = defect_form(t, m - 1)
    else:
        beta_prev = beta_m
    return beta_m.restrict(w), beta_prev.restrict(w)


def build_general_model(
    t: OperatorCorner,
    m: int,
    q: QSolution,
    weights_horizon: int,
    rank_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[DilationModel, ShiftWeights]:
    """Run the general construction for an expansive m-concave corner."""
    _, win_m = defect_form(t, m)
    w = min(win_m.valid_dim, q.q.n)
    defect_m, defect_prev = _restricted_defects(t, m, w, tols)
    form = build_a_general(q, defect_m, ExactWindow(w), rank_tol, tols)
    build = build_p_and_weights(form.a, m, weights_horizon, tols)
    b = _b_from_a(form.a, tols)
    u = form.basis.conj().T @ form.metric_root.mat
    model = DilationModel(
        m=m,
        path="general_m",
        corner=t.leading(w),
        window=ExactWindow(w),
        defect_m=defect_m,
        defect_prev=defect_prev,
        q=q,
        basis=form.basis,
        u=u,
        a=form.a,
        b=b,
        p_coeffs=build.p_coeffs,
        ratio_bound=build.ratio_bound,
        rayleigh_bound=max(_norm_sq_bound(b), build.ratio_bound),
        welldef_residual=form.welldef_residual,
        remark_form_norm=defect_m.norm_max(),
    )
    return model, build.weights


def build_three_concave_model(
    t: OperatorCorner,
    weights_horizon: int,
    rank_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[DilationModel, ShiftWeights]:
    """Run the 3-concave construction (no expansivity, no metric solve)."""
    m = 3
    _, win3 = defect_form(t, m)
    w = win3.valid_dim - (t.bandwidth if t.exact else 0)
    if w <= 0:
        raise DimensionError("corner too small for the 3-concave construction")
    defect_m, defect_prev = _restricted_defects(t, m, w, tols)
    form = build_a_three_concave(t, defect_prev, ExactWindow(w), rank_tol, tols)
    build = build_p_and_weights(form.a, m, weights_horizon, tols)
    b = _b_from_a(form.a, tols)
    u = form.basis.conj().T @ form.metric_root.mat
    model = DilationModel(
        m=m,
        path="three_concave",
        corner=t.leading(w),
        window=ExactWindow(w),
        defect_m=defect_m,
        defect_prev=defect_prev,
        q=None,
        basis=form.basis,
        u=u,
        a=form.a,
        b=b,
        p_coeffs=build.p_coeffs,
        ratio_bound=build.ratio_bound,
        rayleigh_bound=max(_norm_sq_bound(b), build.ratio_bound),
        welldef_residual=form.welldef_residual,
        remark_form_norm=form.numerator_norm,
    )
    return model, build.weights


def build_badea_2iso(
    t: OperatorCorner,
    q: QSolution,
    n_blocks: int,
    weights_horizon: int | None = None,
    rank_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[DilationModel, ShiftWeights, AssembledDilation]:
    """Reference 2-isometric dilation with identity weights.

    U is the square root of (metric - 1-defect), which must be nonnegative;
    H' is its numerical range.  The weight shift is the unweighted
    (isometric) shift, so the weight polynomial is constant.
    """
    m = 2
    _, win_m = defect_form(t, m)
    w = min(win_m.valid_dim, q.q.n)
    defect_m, defect_prev = _restricted_defects(t, m, w, tols)
    gap = hermitian(q.q.restrict(w).mat - defect_prev.mat, tols.herm_tol)
    gate = psd_check(gap, tols.psd_tol)
    if not gate.is_psd:
        raise NotPsdError(
            f"metric minus 1-defect is not nonnegative (min eig {gate.min_eig:.3e})"
        )
    dec = eigh(gap, tols.eig_tol)
    lam = np.clip(dec.values, 0.0, None)
    rtol = tols.rank_tol if rank_tol is None else rank_tol
    # the difference is formed from the metric and the 1-defect, so roundoff
    # lives at their scale; a cutoff relative to lam_max alone would promote
    # pure noise to range directions when the difference vanishes
    data_scale = q.q.norm_max() + defect_prev.norm_max()
    lam_max = float(lam[-1]) if lam.size else 0.0
    kept = lam > rtol * max(lam_max, data_scale)
    basis = np.ascontiguousarray(dec.basis[:, kept])
    root = spectral_apply(dec, np.sqrt(lam))
    u = basis.conj().T @ root
    d = basis.shape[1]

    horizon = weights_horizon if weights_horizon is not None else max(n_blocks - 1, 8)
    eye = identity(d)
    weights = ShiftWeights(tuple([eye] * horizon), tuple([eye] * horizon))
    model = DilationModel(
        m=m,
        path="badea_2iso",
        corner=t.leading(w),
        window=ExactWindow(w),
        defect_m=defect_m,
        defect_prev=defect_prev,
        q=q,
        basis=basis,
        u=u,
        a=hermitian(np.zeros((d, d))),
        b=eye,
        p_coeffs=(eye,),
        ratio_bound=ratio_bound_constant(m),
        rayleigh_bound=max(1.0, ratio_bound_constant(m)),
        welldef_residual=0.0,
        remark_form_norm=defect_m.norm_max(),
    )
    return model, weights, assemble_dilation(model, weights, n_blocks)


def _b_from_a(a: HermitianMatrix, tols: Tolerances) -> HermitianMatrix:
    """B = (I - A)^(1/2); expansive (>= I) and hence invertible for A <= 0."""
    i_minus_a = hermitian(np.eye(a.n) - a.mat, tols.herm_tol)
    dec = eigh(i_minus_a, tols.eig_tol)
    return hermitian(spectral_apply(dec, np.sqrt(np.clip(dec.values, 0.0, None))), tols.herm_tol)


def _norm_sq_bound(b: HermitianMatrix) -> float:
    if b.n == 0:
        return 1.0
    dec = eigh(b)
    return float(dec.values[-1]) ** 2
