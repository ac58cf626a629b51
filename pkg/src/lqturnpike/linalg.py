"""Dense real linear-algebra kernel: matrix exponential, Lyapunov and
algebraic Riccati solvers, rank and spectral helpers.

Everything operates on plain 2-D numpy arrays of float64.  All functions are
pure; solvers validate their own contracts (residual bounds, stability of the
closed loop) before returning.
"""

from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolation, DimensionError, NumericalError

EPS = float(np.finfo(np.float64).eps)

# Pade order-13 numerator/denominator coefficients and the matching
# scaling threshold for the 1-norm.
_PADE13_B = np.array([
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
])
_PADE13_THETA = 5.371920351148152


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used throughout the toolkit.

    ``rank_rel=None`` means the machine default ``eps * max(shape)`` is used
    relative to the largest singular value of the matrix at hand.
    """

    ode_rel: float = 1e-8
    ode_abs: float = 1e-10
    residual: float = 1e-8
    rank_rel: float | None = None
    psd_slack: float = 1e-9

    def __post_init__(self):
        for name in ("ode_rel", "ode_abs", "residual", "psd_slack"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"tolerance {name} must be strictly positive")
        if self.rank_rel is not None and not self.rank_rel > 0.0:
            raise ValueError("tolerance rank_rel must be strictly positive")

    def rank_cut(self, shape):
        """Relative singular-value cutoff for a matrix of the given shape."""
        if self.rank_rel is not None:
            return self.rank_rel
        return EPS * max(max(shape), 1)


DEFAULT_TOL = Tolerances()


def as_matrix(a, name="matrix"):
    """Validate and return ``a`` as a finite 2-D float array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m)):
        raise DimensionError(f"{name} contains non-finite entries")
    return m


def as_vector(a, name="vector"):
    """Validate and return ``a`` as a finite 1-D float array."""
    v = np.atleast_1d(np.asarray(a, dtype=float)).ravel()
    if v.size and not np.all(np.isfinite(v)):
        raise DimensionError(f"{name} contains non-finite entries")
    return v


def _require_square(m, name):
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {m.shape}")


def sym(m):
    """Symmetric part (used as a drift projection after matrix updates)."""
    return 0.5 * (m + m.T)


def expm(m):
    """Matrix exponential by scaling-and-squaring with an order-13 Pade
    rational approximant."""
    a = as_matrix(m, "expm argument")
    _require_square(a, "expm argument")
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    norm1 = np.linalg.norm(a, 1)
    squarings = 0
    if norm1 > _PADE13_THETA:
        squarings = int(np.ceil(np.log2(norm1 / _PADE13_THETA)))
        a = a / (2.0 ** squarings)
    b = _PADE13_B
    ident = np.eye(n)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    try:
        r = np.linalg.solve(v - u, v + u)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - pathological
        raise NumericalError(f"Pade denominator singular: {exc}") from exc
    for _ in range(squarings):
        r = r @ r
    return r


def spectral_abscissa(m):
    """Maximum real part over the eigenvalues of a square matrix."""
    a = as_matrix(m, "spectral_abscissa argument")
    _require_square(a, "spectral_abscissa argument")
    if a.shape[0] == 0:
        return -np.inf
    try:
        eigs = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue iteration failed: {exc}") from exc
    return float(np.max(eigs.real))


def min_eig_sym(m):
    """Smallest eigenvalue of a symmetric matrix."""
    a = as_matrix(m, "min_eig_sym argument")
    _require_square(a, "min_eig_sym argument")
    if a.shape[0] == 0:
        return np.inf
    if np.linalg.norm(a - a.T, np.inf) > 1e-12 * (1.0 + np.linalg.norm(a, np.inf)):
        raise DimensionError("min_eig_sym requires a symmetric matrix")
    return float(np.linalg.eigvalsh(sym(a))[0])


def rank_svd(m, tol=DEFAULT_TOL):
    """Numerical rank: number of singular values above the relative cutoff."""
    a = np.asarray(m)
    if a.ndim != 2:
        raise DimensionError(f"rank_svd needs a 2-D array, got shape {a.shape}")
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol.rank_cut(a.shape) * sv[0]))


def smallest_singular_value(m):
    a = np.asarray(m)
    if a.size == 0:
        return np.inf
    return float(np.linalg.svd(a, compute_uv=False)[-1])


def solve_lyapunov(a_stable, q_sym, tol=DEFAULT_TOL):
    """Solve ``A X + X A* + Q = 0`` for symmetric X by Kronecker
    vectorization (dense n^2 x n^2 solve; intended for small n).

    ``A`` must be Hurwitz; Q is symmetrized on input.
    """
    a = as_matrix(a_stable, "A")
    q = as_matrix(q_sym, "Q")
    _require_square(a, "A")
    _require_square(q, "Q")
    n = a.shape[0]
    if q.shape[0] != n:
        raise DimensionError(f"Q has shape {q.shape}, expected {(n, n)}")
    if n == 0:
        return np.zeros((0, 0))
    if spectral_abscissa(a) >= 0.0:
        raise AssumptionViolation(
            "stability", "Lyapunov solve requires a Hurwitz coefficient matrix")
    q = sym(q)
    ident = np.eye(n)
    # row-major vec: vec(A X) = (A (x) I) vec X, vec(X A^T) = (I (x) A) vec X
    kron = np.kron(a, ident) + np.kron(ident, a)
    try:
        x = np.linalg.solve(kron, -q.ravel()).reshape(n, n)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular Kronecker system: {exc}") from exc
    x = sym(x)
    resid = np.linalg.norm(a @ x + x @ a.T + q, "fro")
    if resid > tol.residual * (1.0 + np.linalg.norm(x, "fro")):
        raise NumericalError(
            f"Lyapunov residual {resid:.3e} exceeds tolerance")
    return x


def _are_residual(a, bbt, q, p):
    return a.T @ p + p @ a - p @ bbt @ p + q


def _kleinman_refine(a, bbt, q, p0, tol, max_iter=12):
    """Newton (Kleinman) refinement of an approximately stabilizing ARE
    solution; each step is one Lyapunov solve with the current closed loop.

    Returns the iterate with the smallest residual.  Quadratically
    convergent, so one or two steps repair the accuracy loss that the
    eigenvector extraction suffers at defective Hamiltonian eigenvalues.
    """
    best_p = p0
    best_res = np.linalg.norm(_are_residual(a, bbt, q, p0), "fro")
    p = p0
    for _ in range(max_iter):
        a_cl = a - bbt @ p
        if spectral_abscissa(a_cl) >= 0.0:
            break
        try:
            p_next = sym(solve_lyapunov(a_cl.T, q + p @ bbt @ p, tol))
        except (NumericalError, AssumptionViolation):
            break
        res = np.linalg.norm(_are_residual(a, bbt, q, p_next), "fro")
        improved = res < best_res
        if improved:
            best_p, best_res = p_next, res
        if not improved or res <= 100.0 * EPS * (1.0 + np.linalg.norm(p_next, "fro")):
            break
        p = p_next
    return best_p


def _stable_basis_sign(ham, n):
    """Orthonormal basis of the stable invariant subspace via the matrix
    sign function (Newton iteration with determinantal scaling).

    Robust at defective eigenvalues, where plain eigenvector pairing
    degenerates; requires only that no eigenvalue sits on the imaginary
    axis, which the caller has already verified.
    """
    s = ham.copy()
    m = ham.shape[0]
    for _ in range(100):
        try:
            det = abs(np.linalg.det(s))
            c = det ** (-1.0 / m) if det > 0.0 else 1.0
            s_next = 0.5 * (c * s + np.linalg.inv(c * s))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"sign iteration broke down: {exc}") from exc
        delta = np.linalg.norm(s_next - s, 1)
        s = s_next
        if delta <= 1e-14 * np.linalg.norm(s, 1):
            break
    if np.linalg.norm(s @ s - np.eye(m), 1) > 1e-6 * m:
        raise NumericalError("sign iteration did not converge")
    proj = 0.5 * (np.eye(m) - s)
    u, sv, _ = np.linalg.svd(proj)
    if not (sv[n - 1] > 0.5 > sv[n]):
        raise AssumptionViolation(
            "stabilizing-solution",
            f"stable invariant subspace has dimension {int(np.sum(sv > 0.5))}, "
            f"expected {n}")
    return u[:, :n]


def solve_are_q(a, bbt, q, tol=DEFAULT_TOL):
    """Stabilizing solution of ``A*X + XA - X BB* X + Q = 0`` with
    ``BB*``, ``Q`` symmetric PSD, via the stable invariant subspace of the
    Hamiltonian ``[[A, -BB*], [-Q, -A*]]`` plus Newton residual polish.

    The subspace comes from eigenvector pairing when that basis is well
    conditioned, and from the matrix sign function otherwise (defective
    closed-loop spectra leave the eigenvector basis rank deficient).
    """
    a = as_matrix(a, "A")
    bbt = sym(as_matrix(bbt, "BB*"))
    q = sym(as_matrix(q, "Q"))
    _require_square(a, "A")
    n = a.shape[0]
    if bbt.shape != (n, n) or q.shape != (n, n):
        raise DimensionError("ARE coefficient shapes are inconsistent")
    if n == 0:
        return np.zeros((0, 0))

    ham = np.block([[a, -bbt], [-q, -a.T]])
    try:
        eigvals, eigvecs = np.linalg.eig(ham)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Hamiltonian eigendecomposition failed: {exc}") from exc

    on_axis = np.abs(eigvals.real) <= 1e-9 * (1.0 + np.abs(eigvals))
    if np.any(on_axis):
        raise AssumptionViolation(
            "stabilizing-solution",
            "Hamiltonian has eigenvalues on the imaginary axis")
    stable = eigvals.real < 0.0
    if int(np.sum(stable)) != n:
        raise AssumptionViolation(
            "stabilizing-solution",
            f"stable Hamiltonian subspace has dimension {int(np.sum(stable))}, expected {n}")

    basis = eigvecs[:, stable]
    x11 = basis[:n, :]
    if smallest_singular_value(x11) == 0.0 or np.linalg.cond(x11) > 1e10:
        basis = _stable_basis_sign(ham, n)
        x11 = basis[:n, :]
    x21 = basis[n:, :]
    if smallest_singular_value(x11) == 0.0 or np.linalg.cond(x11) > 1e12:
        raise AssumptionViolation(
            "stabilizing-solution",
            "stable-subspace basis is rank deficient (no stabilizing solution "
            "for the given data)")
    p = np.real(x21 @ np.linalg.inv(x11))
    p = sym(p)
    p = _kleinman_refine(a, bbt, q, p, tol)

    resid = np.linalg.norm(_are_residual(a, bbt, q, p), "fro")
    scale = 1.0 + np.linalg.norm(p, "fro")
    if resid > tol.residual * scale:
        raise NumericalError(f"ARE residual {resid:.3e} exceeds tolerance")
    if spectral_abscissa(a - bbt @ p) >= 0.0:
        raise AssumptionViolation(
            "stabilizing-solution", "computed solution fails to stabilize the closed loop")
    return p


def solve_are_stabilizing(a, b, c, tol=DEFAULT_TOL):
    """Stabilizing solution of ``A*X + XA - X BB* X + C*C = 0``."""
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    c = as_matrix(c, "C")
    if b.shape[0] != a.shape[0] or c.shape[1] != a.shape[0]:
        raise DimensionError("A, B, C dimensions are inconsistent")
    return solve_are_q(a, b @ b.T, c.T @ c, tol)


def psd_factor(q, tol=DEFAULT_TOL):
    """Factor a symmetric PSD matrix as ``G G*`` via its eigendecomposition.

    Eigenvalues below ``-psd_slack`` raise; small negative ones are clipped.
    """
    q = sym(as_matrix(q, "Q"))
    if q.shape[0] == 0:
        return np.zeros((0, 0))
    w, v = np.linalg.eigh(q)
    scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
    if w.size and w[0] < -tol.psd_slack * scale:
        raise AssumptionViolation(
            "definiteness", f"matrix has eigenvalue {w[0]:.3e}, not PSD")
    w = np.clip(w, 0.0, None)
    return v @ np.diag(np.sqrt(w))
