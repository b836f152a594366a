"""Self-contained complex dense Hermitian linear algebra.

Everything downstream (defect forms, invariant metrics, dilation blocks)
is built from the handful of kernels in this module: a cyclic Jacobi
eigensolver for Hermitian matrices, principal and pseudo-inverse square
roots, polynomial evaluation in a commuting family, and toleranced
semidefiniteness tests.  No LAPACK-backed routine is used here; the Jacobi
sweeps are vectorized over disjoint rotation pairs so desk-scale dimensions
(a few hundred) stay cheap.

All values are immutable after construction and safe to share across
threads.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConvergenceError, HermitianityError, NotPsdError
from .tolerances import DEFAULT_JACOBI_SWEEPS, DEFAULT_TOLERANCES, Tolerances


def max_abs(x: np.ndarray) -> float:
    """Entrywise max-norm; 0 for empty arrays."""
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x)))


def as_square_complex(x) -> np.ndarray:
    """Validate and copy input into a square complex128 matrix."""
    mat = np.array(x, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    if mat.size and not np.all(np.isfinite(mat.view(np.float64))):
        raise ValueError("matrix entries must be finite")
    return mat


def _frozen(mat: np.ndarray) -> np.ndarray:
    mat.setflags(write=False)
    return mat


@dataclass(frozen=True)
class HermitianMatrix:
    """A square complex matrix stored in symmetrized form (X + X*)/2.

    `defect` records the max-norm of X - X* seen at construction; it must
    stay below herm_tol * (1 + max-norm of X) or construction fails.
    """

    mat: np.ndarray
    defect: float

    @property
    def n(self) -> int:
        return self.mat.shape[0]

    def norm_max(self) -> float:
        return max_abs(self.mat)

    def restrict(self, k: int) -> "HermitianMatrix":
        """Leading principal k-by-k block (still Hermitian)."""
        if not 0 <= k <= self.n:
            raise ValueError(f"cannot restrict dimension {self.n} to {k}")
        return HermitianMatrix(_frozen(self.mat[:k, :k].copy()), self.defect)


def hermitian(x, herm_tol: float | None = None) -> HermitianMatrix:
    """Construct a HermitianMatrix, checking the defect from the adjoint."""
    tol = DEFAULT_TOLERANCES.herm_tol if herm_tol is None else herm_tol
    mat = as_square_complex(x)
    defect = max_abs(mat - mat.conj().T)
    if defect > tol * (1.0 + max_abs(mat)):
        raise HermitianityError(
            f"matrix deviates from its adjoint by {defect:.3e} "
            f"(allowed {tol * (1.0 + max_abs(mat)):.3e})"
        )
    sym = (mat + mat.conj().T) / 2.0
    return HermitianMatrix(_frozen(sym), defect)


def identity(n: int) -> HermitianMatrix:
    return HermitianMatrix(_frozen(np.eye(n, dtype=np.complex128)), 0.0)


@dataclass(frozen=True)
class EigenDecomposition:
    """Spectral decomposition X = V diag(values) V* with ascending values."""

    values: np.ndarray          # real, ascending
    basis: np.ndarray           # unitary, columns are eigenvectors
    recon_residual: float       # ||X - V diag(values) V*||_max
    basis_residual: float       # ||V*V - I||_max

    @property
    def n(self) -> int:
        return self.values.shape[0]


@lru_cache(maxsize=64)
def _rotation_rounds(n: int) -> tuple:
    """Round-robin schedule covering all index pairs by disjoint rounds.

    Each round is a pair of integer arrays (p, q) with p < q elementwise and
    all indices distinct, so the corresponding rotations commute and can be
    applied in one vectorized step.
    """
    if n < 2:
        return ()
    m = n if n % 2 == 0 else n + 1  # pad with a dummy slot for odd n
    arr = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(arr[i], arr[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        p = np.array([a for a, _ in pairs], dtype=np.intp)
        q = np.array([b for _, b in pairs], dtype=np.intp)
        rounds.append((p, q))
        arr = [arr[0], arr[-1]] + arr[1:-1]
    return tuple(rounds)


def _apply_rotations(a, v, p, q, c, s, phase):
    """Apply the disjoint plane rotations V_i in-place: a <- V* a V, v <- v V.

    Each V_i acts on coordinates (p_i, q_i) as [[c, s], [-conj(phase) s,
    conj(phase) c]] where phase is the unit phase of a[p, q].
    """
    s_ph_conj = s * phase.conj()
    c_ph_conj = c * phase.conj()
    cp = a[:, p].copy()
    cq = a[:, q]
    a[:, p] = cp * c - cq * s_ph_conj
    a[:, q] = cp * s + cq * c_ph_conj
    rp = a[p, :].copy()
    rq = a[q, :]
    a[p, :] = c[:, None] * rp - (s * phase)[:, None] * rq
    a[q, :] = s[:, None] * rp + (c * phase)[:, None] * rq
    cp = v[:, p].copy()
    cq = v[:, q]
    v[:, p] = cp * c - cq * s_ph_conj
    v[:, q] = cp * s + cq * c_ph_conj


def eigh(
    x: HermitianMatrix,
    eig_tol: float | None = None,
    max_sweeps: int = DEFAULT_JACOBI_SWEEPS,
) -> EigenDecomposition:
    """Cyclic Jacobi eigendecomposition of a Hermitian matrix.

    Sweeps rotate away off-diagonal entries round by round until the largest
    one falls below the stopping threshold.  Raises ConvergenceError when the
    sweep budget is exhausted, which signals pathological input.
    """
    tol = DEFAULT_TOLERANCES.eig_tol if eig_tol is None else eig_tol
    n = x.n
    if n == 0:
        empty = np.zeros((0, 0), dtype=np.complex128)
        return EigenDecomposition(np.zeros(0), _frozen(empty), 0.0, 0.0)
    a = np.array(x.mat, dtype=np.complex128)
    if n == 1:
        basis = np.eye(1, dtype=np.complex128)
        return EigenDecomposition(
            _frozen(a.real.reshape(1).copy()), _frozen(basis), 0.0, 0.0
        )

    scale = max_abs(a)
    stop = max(tol * (1.0 + scale) / 4.0, 8.0 * n * np.finfo(float).eps * scale)
    skip = stop / (8.0 * n)
    v = np.eye(n, dtype=np.complex128)
    rounds = _rotation_rounds(n)

    converged = False
    for _ in range(max_sweeps):
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        if max_abs(off) <= stop:
            converged = True
            break
        for p, q in rounds:
            apq = a[p, q]
            mags = np.abs(apq)
            live = mags > skip
            if not np.any(live):
                continue
            pl, ql, apql, magl = p[live], q[live], apq[live], mags[live]
            phase = apql / magl
            tau = (a[ql, ql].real - a[pl, pl].real) / (2.0 * magl)
            sign = np.where(tau >= 0.0, 1.0, -1.0)
            t = sign / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            _apply_rotations(a, v, pl, ql, c, s, phase)
            a[pl, ql] = 0.0
            a[ql, pl] = 0.0
        # keep the iterate exactly Hermitian against rounding drift
        a = (a + a.conj().T) / 2.0
    if not converged:
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        if max_abs(off) > stop:
            raise ConvergenceError(
                f"Jacobi eigensolver did not converge in {max_sweeps} sweeps "
                f"(off-diagonal {max_abs(off):.3e}, target {stop:.3e})"
            )

    values = a.diagonal().real.copy()
    order = np.argsort(values, kind="stable")
    values = values[order]
    v = np.ascontiguousarray(v[:, order])

    recon = v @ (values[:, None] * v.conj().T)
    recon_residual = max_abs(x.mat - recon)
    basis_residual = max_abs(v.conj().T @ v - np.eye(n))
    limit = tol * (1.0 + scale)
    if recon_residual > limit or basis_residual > max(tol, 64 * n * np.finfo(float).eps):
        raise ConvergenceError(
            f"eigendecomposition residuals out of tolerance "
            f"(reconstruction {recon_residual:.3e}, unitarity {basis_residual:.3e})"
        )
    return EigenDecomposition(_frozen(values), _frozen(v), recon_residual, basis_residual)


def spectral_apply(dec: EigenDecomposition, fvals: np.ndarray) -> np.ndarray:
    """Assemble V diag(fvals) V* for per-eigenvalue function values."""
    return dec.basis @ (np.asarray(fvals)[:, None] * dec.basis.conj().T)


class PsdCheck(NamedTuple):
    is_psd: bool
    min_eig: float


def psd_check(x: HermitianMatrix, tol: float | None = None) -> PsdCheck:
    """Toleranced nonnegativity test: passes iff min eig >= -tol*(1+||X||)."""
    t = DEFAULT_TOLERANCES.psd_tol if tol is None else tol
    if x.n == 0:
        return PsdCheck(True, 0.0)
    dec = eigh(x)
    min_eig = float(dec.values[0])
    return PsdCheck(min_eig >= -t * (1.0 + x.norm_max()), min_eig)


def _require_psd(x: HermitianMatrix, dec: EigenDecomposition, psd_tol: float, what: str):
    floor = -psd_tol * (1.0 + x.norm_max())
    if x.n and dec.values[0] < floor:
        raise NotPsdError(
            f"{what}: min eigenvalue {dec.values[0]:.6e} below allowed {floor:.3e}"
        )


def sqrt_psd(
    x: HermitianMatrix,
    tols: Tolerances = DEFAULT_TOLERANCES,
    dec: EigenDecomposition | None = None,
) -> HermitianMatrix:
    """Principal square root of a nonnegative matrix.

    Eigenvalues negative within psd_tol are clamped to zero; anything more
    negative raises NotPsdError rather than being silently repaired.
    """
    if dec is None:
        dec = eigh(x, tols.eig_tol)
    _require_psd(x, dec, tols.psd_tol, "square root")
    root_vals = np.sqrt(np.clip(dec.values, 0.0, None))
    return hermitian(spectral_apply(dec, root_vals), tols.herm_tol)


class PinvSqrt(NamedTuple):
    root: HermitianMatrix            # X^{+1/2}: inverse square root on the range
    projector: HermitianMatrix       # orthogonal projector onto the numerical range
    rank: int


def pinv_sqrt(
    x: HermitianMatrix,
    rank_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
    dec: EigenDecomposition | None = None,
) -> PinvSqrt:
    """Pseudo-inverse square root of a nonnegative matrix.

    Eigenvalues at or below rank_tol * max eigenvalue count as kernel and map
    to zero; the returned projector spans the numerical range and its trace
    is the numerical rank.
    """
    rtol = tols.rank_tol if rank_tol is None else rank_tol
    if dec is None:
        dec = eigh(x, tols.eig_tol)
    _require_psd(x, dec, tols.psd_tol, "pseudo-inverse square root")
    lam_max = float(dec.values[-1]) if x.n else 0.0
    cutoff = rtol * max(lam_max, 0.0)
    kept = dec.values > cutoff
    inv_vals = np.where(kept, 1.0 / np.sqrt(np.where(kept, dec.values, 1.0)), 0.0)
    proj_vals = kept.astype(float)
    root = hermitian(spectral_apply(dec, inv_vals), tols.herm_tol)
    projector = hermitian(spectral_apply(dec, proj_vals), tols.herm_tol)
    return PinvSqrt(root, projector, int(np.count_nonzero(kept)))


def range_basis(
    x: HermitianMatrix,
    rank_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
    dec: EigenDecomposition | None = None,
) -> np.ndarray:
    """Orthonormal columns spanning the numerical range of a PSD matrix."""
    rtol = tols.rank_tol if rank_tol is None else rank_tol
    if dec is None:
        dec = eigh(x, tols.eig_tol)
    _require_psd(x, dec, tols.psd_tol, "range basis")
    lam_max = float(dec.values[-1]) if x.n else 0.0
    kept = dec.values > rtol * max(lam_max, 0.0)
    return np.ascontiguousarray(dec.basis[:, kept])


def poly_eval(
    coeffs: Sequence[HermitianMatrix],
    n: int,
    comm_tol: float | None = None,
) -> HermitianMatrix:
    """Evaluate sum coeffs[k] * n**k at an integer point with exact powers.

    The coefficients must commute pairwise (they are polynomials in a single
    Hermitian matrix in every use here); violation raises ValueError.
    """
    if not coeffs:
        raise ValueError("poly_eval needs at least one coefficient")
    if n < 0 or int(n) != n:
        raise ValueError(f"evaluation point must be a nonnegative integer, got {n!r}")
    ctol = DEFAULT_TOLERANCES.comm_tol if comm_tol is None else comm_tol
    scale = 1.0 + max(c.norm_max() for c in coeffs)
    for i in range(len(coeffs)):
        for j in range(i + 1, len(coeffs)):
            comm = coeffs[i].mat @ coeffs[j].mat - coeffs[j].mat @ coeffs[i].mat
            if max_abs(comm) > ctol * scale * scale:
                raise ValueError(
                    f"coefficients {i} and {j} do not commute "
                    f"(residual {max_abs(comm):.3e})"
                )
    acc = np.zeros_like(coeffs[0].mat)
    point = int(n)
    for k, coeff in enumerate(coeffs):
        acc = acc + coeff.mat * float(point**k)
    return hermitian(acc)
