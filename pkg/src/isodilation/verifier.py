"""Independent verification of every checkable identity of a built dilation.

All checks are measurements on exact windows: the truncated dilation is not
globally m-isometric (boundary blocks leak), so each check restricts its
test vectors to supports whose forward orbit under the required number of
applications stays inside exact blocks and coordinates.  Randomized test
vectors are complex Gaussian on the permitted support, deterministic given
the seed.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .builder import AssembledDilation, DilationModel, ShiftWeights
from .errors import WindowExhaustedError
from .hermitian import eigh, hermitian, max_abs, poly_eval
from .tolerances import DEFAULT_SEED, DEFAULT_TOLERANCES, DEFAULT_TRIALS, Tolerances


@dataclass(frozen=True)
class CheckResult:
    """One named residual check; passed iff residual <= tolerance.

    The only exception is the norm-gap certificate, which is a strict
    inequality claim with expectation matching; see
    `nonisomorphism_certificate`.
    """

    name: str
    residual: float
    tolerance: float
    passed: bool
    window: str

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "window": self.window,
        }


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check


_CHECK_SALTS = {
    "powers_formula": 11,
    "w_m_isometry": 13,
    "criterion_identity": 17,
    "nonisomorphism_certificate": 19,
}


def _rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, _CHECK_SALTS.get(name, 1)])


def _random_complex(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def _h_support(model: DilationModel, applications: int) -> int:
    """Coordinates of the H block whose orbit stays exact that many steps."""
    t = model.corner
    if not t.exact:
        return t.n
    support = t.n - applications * t.bandwidth
    if support <= 0:
        raise WindowExhaustedError(
            f"window {t.n} cannot absorb {applications} applications of a "
            f"bandwidth-{t.bandwidth} corner"
        )
    return support


def _result(name, residual, tolerance, window) -> CheckResult:
    residual = float(residual)
    tolerance = float(tolerance)
    return CheckResult(name, residual, tolerance, residual <= tolerance, window)


def check_dilation_property(
    dilation: AssembledDilation,
    n_max: int | None = None,
    tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> CheckResult:
    """Compression of powers: block (0,0) of W^n must equal T^n.

    By the block structure row 0 of W contains only T, so the residual is
    rounding-level regardless of truncation; it is still compared on the
    shrinking exact window of T^n.
    """
    tolerance = tols.dilation_tol if tol is None else tol
    model = dilation.model
    n_max = dilation.n_blocks if n_max is None else n_max
    if n_max > dilation.n_blocks:
        raise ValueError(f"n_max {n_max} exceeds n_blocks {dilation.n_blocks}")
    t = model.corner
    w = t.n
    cur = np.eye(dilation.dim_total, w, dtype=np.complex128)
    tn = np.eye(w, dtype=np.complex128)
    residual = 0.0
    for n in range(1, n_max + 1):
        cur = dilation.matrix @ cur
        tn = t.matrix @ tn
        win = max(t.n - n * t.bandwidth, 1) if t.exact else t.n
        residual = max(residual, max_abs(cur[:win, :win] - tn[:win, :win]))
    return _result(
        "dilation_property",
        residual,
        tolerance,
        f"powers 1..{n_max} on the leading {w}-block",
    )


def check_powers_formula(
    dilation: AssembledDilation,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
    tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> CheckResult:
    """Closed-form block formula for W^m h against direct multiplication.

    Block k of W^m h is T^m h_0 (k = 0), U T^(m-1) h_0 (k = 1),
    S_(k-1)...S_1 U T^(m-k) h_0 (2 <= k <= m), and S_(k-1)...S_(k-m) h_(k-m)
    beyond.  Test vectors are supported so every referenced entry is exact.
    """
    tolerance = tols.powers_tol if tol is None else tol
    model = dilation.model
    weights = _weights_of(dilation)
    m = model.m
    w = model.dim_h
    d = model.dim_hprime
    h0_dim = _h_support(model, m)
    top_block = dilation.n_blocks - m
    rng = _rng(seed, "powers_formula")

    residual = 0.0
    for _ in range(trials):
        h = np.zeros(dilation.dim_total, dtype=np.complex128)
        h[:h0_dim] = _random_complex(rng, h0_dim)
        for j in range(1, top_block + 1):
            h[dilation.block_slice(j)] = _random_complex(rng, d)
        y = h
        for _ in range(m):
            y = dilation.matrix @ y

        expected = np.zeros_like(h)
        t_pow = h[:w].copy()
        t_pows = [t_pow.copy()]
        for _ in range(m):
            t_pow = model.corner.matrix @ t_pow
            t_pows.append(t_pow.copy())
        expected[:w] = t_pows[m]
        if d:
            prefix = np.eye(d, dtype=np.complex128)
            for k in range(1, min(m, dilation.n_blocks) + 1):
                if k >= 2:
                    prefix = weights[k - 2].mat @ prefix
                expected[dilation.block_slice(k)] = prefix @ (model.u @ t_pows[m - k])
            for k in range(m + 1, dilation.n_blocks + 1):
                prod = np.eye(d, dtype=np.complex128)
                for i in range(k - m, k):
                    prod = weights[i - 1].mat @ prod
                expected[dilation.block_slice(k)] = prod @ h[dilation.block_slice(k - m)]

        norm = float(np.sqrt(np.vdot(h, h).real))
        residual = max(residual, max_abs(y - expected) / max(norm, 1.0))
    return _result(
        "powers_formula",
        residual,
        tolerance,
        f"h0 on {h0_dim} of {w} coords, blocks 1..{top_block}, {trials} trials",
    )


def _weights_of(dilation: AssembledDilation) -> tuple:
    # weights live on the assembled subdiagonal; read them back so checks
    # measure what was actually assembled
    out = []
    for j in range(1, dilation.n_blocks):
        block = dilation.matrix[dilation.block_slice(j + 1), dilation.block_slice(j)]
        out.append(hermitian(block))
    return tuple(out)


def check_w_m_isometry(
    dilation: AssembledDilation,
    m: int | None = None,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
    tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> CheckResult:
    """m-isometry defect of W on windowed test vectors.

    The alternating binomial sum of ||W^k x||^2 must vanish for every x
    whose m-step forward orbit stays inside exact blocks and coordinates.
    """
    model = dilation.model
    m = model.m if m is None else m
    tolerance = tols.isometry_tol if tol is None else tol
    h0_dim = _h_support(model, m)
    d = model.dim_hprime
    top_block = dilation.n_blocks - m
    rng = _rng(seed, "w_m_isometry")

    residual = 0.0
    for _ in range(trials):
        x = np.zeros(dilation.dim_total, dtype=np.complex128)
        x[:h0_dim] = _random_complex(rng, h0_dim)
        for j in range(1, top_block + 1):
            x[dilation.block_slice(j)] = _random_complex(rng, d)
        norms_sq = [float(np.vdot(x, x).real)]
        y = x
        for _ in range(m):
            y = dilation.matrix @ y
            norms_sq.append(float(np.vdot(y, y).real))
        val = 0.0
        for k in range(m + 1):
            sign = -1.0 if (m - k) % 2 else 1.0
            val += sign * math.comb(m, k) * norms_sq[k]
        residual = max(residual, abs(val) / max(norms_sq[0], 1e-300))
    return _result(
        "w_m_isometry",
        residual,
        tolerance,
        f"support {h0_dim} of {model.dim_h} coords + blocks 1..{top_block}, {trials} trials",
    )


def check_criterion_identity(
    model: DilationModel,
    weights: ShiftWeights,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
    tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> CheckResult:
    """Scalar criterion for m-isometricity of the dilation.

    For h in H the m-defect form of T plus the alternating double sum of
    ||S_(k-1)...S_1 U T^(l-k) h||^2 must cancel exactly; together with the
    m-isometry of the weight shift this is equivalent to W being
    m-isometric.
    """
    tolerance = tols.criterion_tol if tol is None else tol
    m = model.m
    h_dim = _h_support(model, m)
    d = model.dim_hprime
    rng = _rng(seed, "criterion_identity")

    prefixes = [np.eye(d, dtype=np.complex128)]
    for k in range(2, m + 1):
        prefixes.append(weights.weights[k - 2].mat @ prefixes[-1])

    residual = 0.0
    for _ in range(trials):
        h = np.zeros(model.dim_h, dtype=np.complex128)
        h[:h_dim] = _random_complex(rng, h_dim)
        t_pows = [h.copy()]
        for _ in range(m - 1):
            t_pows.append(model.corner.matrix @ t_pows[-1])
        lhs = float(np.vdot(h, model.defect_m.mat @ h).real)
        for ell in range(1, m + 1):
            sign = -1.0 if (m - ell) % 2 else 1.0
            inner = 0.0
            for k in range(1, ell + 1):
                vec = prefixes[k - 1] @ (model.u @ t_pows[ell - k])
                inner += float(np.vdot(vec, vec).real)
            lhs += sign * math.comb(m, ell) * inner
        norm_sq = float(np.vdot(h, h).real)
        residual = max(residual, abs(lhs) / max(norm_sq, 1e-300))
    return _result(
        "criterion_identity",
        residual,
        tolerance,
        f"h on {h_dim} of {model.dim_h} coords, {trials} trials",
    )


def check_weight_shift_isometry(
    weights: ShiftWeights,
    m: int,
    tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> CheckResult:
    """m-isometry of the weight shift in cumulative form.

    The m-th forward difference of n -> |S_n ... S_1|^2 (with the empty
    product at n = 0) must vanish; the cumulative moduli are recomputed from
    the actual weights, so a corrupted weight is localized here.
    """
    tolerance_scale = 1.0 + max((c.norm_max() for c in weights.cumulative), default=0.0)
    tolerance = (tols.difference_tol if tol is None else tol) * tolerance_scale
    if weights.horizon < m:
        raise WindowExhaustedError(
            f"need at least {m} weights for the order-{m} difference, have {weights.horizon}"
        )
    d = weights.weights[0].n if weights.weights else 0
    cumulative = [np.eye(d, dtype=np.complex128)] + [c.mat for c in weights.cumulative]
    residual = 0.0
    count = len(cumulative) - m
    for n in range(count):
        acc = np.zeros((d, d), dtype=np.complex128)
        for k in range(m + 1):
            sign = -1.0 if (m - k) % 2 else 1.0
            acc = acc + sign * math.comb(m, k) * cumulative[n + k]
        residual = max(residual, max_abs(acc))
    return _result(
        "weight_shift_m_isometry",
        residual,
        tolerance,
        f"order-{m} differences at n = 0..{count - 1}",
    )


def check_cumulative_polynomial(
    weights: ShiftWeights,
    p_coeffs: tuple,
    tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> CheckResult:
    """Cumulative moduli must equal the weight polynomial at integer points."""
    scale = 1.0 + max((c.norm_max() for c in weights.cumulative), default=0.0)
    tolerance = (tols.cumulative_tol if tol is None else tol) * scale
    residual = 0.0
    for n in range(1, weights.horizon + 1):
        p_n = poly_eval(p_coeffs, n, tols.comm_tol)
        residual = max(residual, max_abs(weights.cumulative[n - 1].mat - p_n.mat))
    return _result(
        "cumulative_matches_polynomial",
        residual,
        tolerance,
        f"n = 1..{weights.horizon}",
    )


def _column_space_rank(cols: np.ndarray, rel_tol: float = 1e-6) -> int:
    """Numerical rank of the column space via blocked Gram-Schmidt."""
    dim, count = cols.shape
    if count == 0 or dim == 0:
        return 0
    scale = float(np.max(np.sqrt(np.sum(np.abs(cols) ** 2, axis=0))))
    if scale == 0.0:
        return 0
    thresh = rel_tol * scale
    basis_blocks: list[np.ndarray] = []
    basis: np.ndarray | None = None
    for start in range(0, count, 48):
        blk = cols[:, start : start + 48].astype(np.complex128, copy=True)
        for _ in range(2):  # two-pass reorthogonalization
            if basis is not None:
                blk -= basis @ (basis.conj().T @ blk)
        accepted = []
        for i in range(blk.shape[1]):
            v = blk[:, i]
            for u in accepted:
                v = v - u * np.vdot(u, v)
            nrm = float(np.sqrt(np.vdot(v, v).real))
            if nrm > thresh:
                accepted.append(v / nrm)
        if accepted:
            basis_blocks.append(np.column_stack(accepted))
            basis = np.concatenate(basis_blocks, axis=1)
    return 0 if basis is None else basis.shape[1]


def check_minimality(
    dilation: AssembledDilation,
    rel_tol: float = 1e-6,
) -> CheckResult:
    """Windowed minimality: the orbit of H under W spans the truncation.

    Columns are W^n e over the H-block basis for n = 0..n_blocks; the
    residual is the defect of the numerical rank from the full truncated
    dimension.  Vacuous for a zero-dimensional H'.
    """
    if dilation.dim_hprime == 0:
        return _result("minimality", 0.0, 0.0, "vacuous (dim H' = 0)")
    w = dilation.dim_h
    total = dilation.dim_total
    blocks = []
    cur = np.eye(total, w, dtype=np.complex128)
    blocks.append(cur.copy())
    for _ in range(dilation.n_blocks):
        cur = dilation.matrix @ cur
        blocks.append(cur.copy())
    cols = np.concatenate(blocks, axis=1)
    rank = _column_space_rank(cols, rel_tol)
    defect = float(total - rank)
    return _result(
        "minimality",
        defect,
        0.0,
        f"rank {rank} of {total} from powers 0..{dilation.n_blocks} over {w} basis vectors",
    )


def nonisomorphism_certificate(
    general: AssembledDilation,
    badea: AssembledDilation,
    expected_found: bool | None = None,
    trials: int = DEFAULT_TRIALS,
    seed: int = DEFAULT_SEED,
    cert_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> CheckResult:
    """Norm-gap obstruction to an isomorphism of the two dilations.

    Searches windowed h for a gap between ||W (h,0,...)|| and
    ||W' (h,0,...)||; any unitary fixing H and intertwining the dilations
    would force the gap to vanish identically, so a gap above cert_tol
    certifies non-isomorphism.  The gap equals the 1-defect form of T, so
    a certificate exists exactly when T is not isometric.

    This is a strict-inequality claim: the reported residual is the largest
    gap found, and when `expected_found` is given the check passes iff the
    search outcome matches the expectation; with no expectation it passes
    iff a certificate was found.
    """
    ctol = tols.cert_tol if cert_tol is None else cert_tol
    w = general.dim_h
    if badea.dim_h != w:
        raise ValueError("both dilations must share the H block")
    rng = _rng(seed, "nonisomorphism_certificate")

    candidates = [np.eye(w, dtype=np.complex128)[:, i] for i in range(w)]
    for _ in range(trials):
        candidates.append(_random_complex(rng, w))
    form = general.model.defect_prev
    if form.n == w and w > 0:
        dec = eigh(form)
        # extremal eigenvector of the 1-defect maximizes the quadratic form
        idx = int(np.argmax(np.abs(dec.values)))
        candidates.append(dec.basis[:, idx].copy())

    def gap_of(h: np.ndarray) -> float:
        norm_sq = float(np.vdot(h, h).real)
        if norm_sq == 0.0:
            return 0.0
        xg = np.zeros(general.dim_total, dtype=np.complex128)
        xg[:w] = h
        xb = np.zeros(badea.dim_total, dtype=np.complex128)
        xb[:w] = h
        yg = general.matrix @ xg
        yb = badea.matrix @ xb
        return abs(float(np.vdot(yg, yg).real) - float(np.vdot(yb, yb).real)) / norm_sq

    max_gap = max((gap_of(h) for h in candidates), default=0.0)
    found = max_gap > ctol
    passed = found if expected_found is None else (found == expected_found)
    expectation = (
        "no expectation"
        if expected_found is None
        else f"expected {'found' if expected_found else 'not found'}"
    )
    return CheckResult(
        "nonisomorphism_certificate",
        float(max_gap),
        float(ctol),
        passed,
        f"{w} basis vectors + {trials} random + extremal direction; "
        f"certificate {'found' if found else 'not found'} ({expectation})",
    )


def remark_consistency(
    model: DilationModel,
    weights: ShiftWeights,
    tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> CheckResult:
    """The last nontrivial weight is the identity exactly when the form
    represented by A vanishes.

    On the general path that form is the m-defect, so S_(m-1) = I iff T is
    m-isometric on the window; on the 3-concave path it is the
    T-compressed 3-defect.  Both sides are toleranced norms; the check
    passes when the two indicators agree.  Vacuous for a zero-dimensional
    H'.
    """
    threshold = tols.class_tol if tol is None else tol
    if model.dim_hprime == 0:
        return _result("remark_consistency", 0.0, 0.0, "vacuous (dim H' = 0)")
    if weights.horizon < model.m - 1:
        raise WindowExhaustedError(
            f"need weight S_{model.m - 1}, horizon is {weights.horizon}"
        )
    s = weights.weights[model.m - 2]
    s_norm = max_abs(s.mat - np.eye(s.n))
    form_norm = model.remark_form_norm
    s_small = s_norm <= threshold
    form_small = form_norm <= threshold
    passed = s_small == form_small
    return CheckResult(
        "remark_consistency",
        0.0 if passed else 1.0,
        0.0,
        passed,
        f"||S_{model.m - 1} - I|| = {s_norm:.3e}, represented form norm = {form_norm:.3e}",
    )
