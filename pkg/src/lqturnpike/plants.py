"""Plant definitions (standard and descriptor form) and structural checks:
pencil regularity, impulse controllability/freeness, finite-dynamics tests,
terminal-weight compatibility.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolation, DimensionError
from .linalg import (DEFAULT_TOL, as_matrix, rank_svd, smallest_singular_value,
                     spectral_abscissa)

_REGULARITY_SEED = 20160817  # fixed seed for the randomized regularity probe
_F_COMPAT_ATOL = 1e-12


@dataclass(frozen=True)
class LtiPlant:
    """Standard state-space plant ``xdot = A x + B u`` with running output
    ``C x`` and terminal weight ``F``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.A, "A")
        b = as_matrix(self.B, "B")
        c = as_matrix(self.C, "C")
        f = as_matrix(self.F, "F")
        n = a.shape[0]
        if a.shape[1] != n:
            raise DimensionError(f"A must be square, got {a.shape}")
        if b.shape[0] != n:
            raise DimensionError(f"B has {b.shape[0]} rows, expected {n}")
        if c.shape[1] != n:
            raise DimensionError(f"C has {c.shape[1]} columns, expected {n}")
        if f.shape[1] != n:
            raise DimensionError(f"F has {f.shape[1]} columns, expected {n}")
        for name, m in (("A", a), ("B", b), ("C", c), ("F", f)):
            object.__setattr__(self, name, m)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def k(self):
        return self.C.shape[0]

    @property
    def terminal_weight(self):
        """S = F*F, the quadratic terminal cost matrix."""
        return self.F.T @ self.F


@dataclass(frozen=True)
class DescriptorPlant:
    """Semi-explicit descriptor plant ``E xdot = A x + B u`` with
    ``E = diag(I_d, 0)`` exactly."""

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        e = as_matrix(self.E, "E")
        a = as_matrix(self.A, "A")
        b = as_matrix(self.B, "B")
        c = as_matrix(self.C, "C")
        f = as_matrix(self.F, "F")
        n = a.shape[0]
        if a.shape[1] != n or e.shape != (n, n):
            raise DimensionError("E and A must be square of the same size")
        if b.shape[0] != n or c.shape[1] != n or f.shape[1] != n:
            raise DimensionError("B, C, F dimensions inconsistent with A")
        d = _semi_explicit_order(e)
        for name, m in (("E", e), ("A", a), ("B", b), ("C", c), ("F", f)):
            object.__setattr__(self, name, m)
        object.__setattr__(self, "_d", d)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def k(self):
        return self.C.shape[0]

    @property
    def d(self):
        """Number of differential variables (size of the identity block)."""
        return self._d

    def partition(self):
        d, n = self.d, self.n
        s_full = self.F.T @ self.F
        return SemiExplicitPartition(
            d=d,
            A11=self.A[:d, :d], A12=self.A[:d, d:],
            A21=self.A[d:, :d], A22=self.A[d:, d:],
            B1=self.B[:d, :], B2=self.B[d:, :],
            C1=self.C[:, :d], C2=self.C[:, d:],
            S1=s_full[:d, :d], F1=self.F[:, :d],
        )


def _semi_explicit_order(e):
    """Return d such that E == diag(I_d, 0) exactly, else raise."""
    n = e.shape[0]
    diag = np.diag(e)
    d = int(np.sum(diag == 1.0))
    expected = np.zeros_like(e)
    expected[:d, :d] = np.eye(d)
    if not np.array_equal(e, expected):
        raise DimensionError(
            "E must equal diag(I_d, 0) exactly (no equivalence transformation "
            "is applied)")
    return d


@dataclass(frozen=True)
class SemiExplicitPartition:
    """Blocks of (A, B, C) and the terminal weight conforming with
    ``E = diag(I_d, 0)``."""

    d: int
    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    S1: np.ndarray
    F1: np.ndarray


@dataclass
class StructuralReport:
    regular: bool = False
    impulse_controllable: bool = False
    impulse_free: bool = False
    finite_dynamics_stable: bool = False
    f_compatible: bool = False
    notes: list = field(default_factory=list)

    def all_ok(self):
        return (self.regular and self.impulse_controllable
                and self.impulse_free and self.finite_dynamics_stable
                and self.f_compatible)


def check_pencil_regular(e, a, tol=DEFAULT_TOL, seed=_REGULARITY_SEED):
    """Probabilistic regularity test: sE - A invertible at one of five
    seeded random real shifts in [-10, 10].

    Resamples a shift whenever it lands near-singular, so an unlucky draw at
    an eigenvalue of the pencil does not produce a false negative.  A
    uniformly singular pencil fails every draw.
    """
    e = as_matrix(e, "E")
    a = as_matrix(a, "A")
    if e.shape != a.shape or e.shape[0] != e.shape[1]:
        raise DimensionError("E, A must be square of equal size")
    if e.shape[0] == 0:
        return True
    rng = np.random.default_rng(seed)
    scale = max(np.linalg.norm(a, "fro"), np.linalg.norm(e, "fro"), 1.0)
    for _ in range(5):
        for _ in range(4):  # resample on near-singularity
            s = rng.uniform(-10.0, 10.0)
            m = s * e - a
            if smallest_singular_value(m) > tol.rank_cut(m.shape) * scale:
                return True
    return False


def check_impulse_controllable(e, a, b, tol=DEFAULT_TOL):
    """rank [[E, 0, 0], [A, E, B]] == n + rank E."""
    e = as_matrix(e, "E")
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    n = e.shape[0]
    zero = np.zeros((n, n))
    zero_b = np.zeros((n, b.shape[1]))
    block = np.block([[e, zero, zero_b], [a, e, b]])
    return rank_svd(block, tol) == n + rank_svd(e, tol)


def check_impulse_free(e, a, tol=DEFAULT_TOL):
    """rank [[E, 0], [A, E]] == n + rank E."""
    e = as_matrix(e, "E")
    a = as_matrix(a, "A")
    n = e.shape[0]
    block = np.block([[e, np.zeros((n, n))], [a, e]])
    return rank_svd(block, tol) == n + rank_svd(e, tol)


def check_finite_dynamics_stable(part, tol=DEFAULT_TOL):
    """Stability of the slow subsystem of an impulse-free semi-explicit pair:
    the Schur complement A11 - A12 A22^{-1} A21 must be Hurwitz."""
    a22 = part.A22
    if a22.shape[0] == 0:
        return spectral_abscissa(part.A11) < 0.0
    if smallest_singular_value(a22) <= tol.rank_cut(a22.shape) * max(
            1.0, np.linalg.norm(a22, "fro")):
        raise AssumptionViolation(
            "impulse-freeness", "fast block A22 is singular")
    schur = part.A11 - part.A12 @ np.linalg.solve(a22, part.A21)
    return spectral_abscissa(schur) < 0.0


def check_F_compatible(e, f):
    """range F* within range E*; for semi-explicit E this means the trailing
    n - d columns of F vanish."""
    e = as_matrix(e, "E")
    f = as_matrix(f, "F")
    d = _semi_explicit_order(e)
    return bool(np.all(np.abs(f[:, d:]) <= _F_COMPAT_ATOL))


def _finite_pencil_eigenvalues(e, a, tol, seed=_REGULARITY_SEED):
    """Finite eigenvalues of the regular pencil sE - A.

    Uses the Moebius substitution lam = s0 + 1/mu on the standard
    eigenproblem of (s0 E - A)^{-1} E for a shift s0 where the pencil is
    invertible; mu = 0 corresponds to infinite pencil eigenvalues.
    """
    n = e.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    rng = np.random.default_rng(seed + 1)
    scale = max(np.linalg.norm(a, "fro"), np.linalg.norm(e, "fro"), 1.0)
    for _ in range(20):
        s0 = rng.uniform(-10.0, 10.0)
        m = s0 * e - a
        if smallest_singular_value(m) > tol.rank_cut(m.shape) * scale:
            break
    else:
        raise AssumptionViolation("regularity", "pencil appears singular")
    mu = np.linalg.eigvals(np.linalg.solve(m, e))
    finite = np.abs(mu) > tol.rank_cut((n, n)) * max(1.0, np.max(np.abs(mu)))
    return s0 - 1.0 / mu[finite]


def _finite_dynamics_stabilizable(e, a, b, tol):
    """Hautus test at the unstable finite pencil eigenvalues:
    rank [lam E - A, B] == n for every finite lam with Re lam >= 0."""
    n = e.shape[0]
    for lam in _finite_pencil_eigenvalues(e, a, tol):
        if lam.real < 0.0:
            continue
        block = np.hstack([lam * e - a, b.astype(complex)])
        if rank_svd(block, tol) < n:
            return False
    return True


def structural_report(plant, tol=DEFAULT_TOL, seed=_REGULARITY_SEED):
    """Run all structural checks on a descriptor plant; failures are recorded
    as flags/notes, never raised.

    The ``finite_dynamics_stable`` flag records stabilizability of the slow
    dynamics (the solvability precondition); stability itself is certified on
    the closed loop once a stabilizing Riccati solution is in hand.
    """
    rep = StructuralReport()
    e, a, b, f = plant.E, plant.A, plant.B, plant.F

    rep.regular = check_pencil_regular(e, a, tol, seed=seed)
    if not rep.regular:
        rep.notes.append("pencil sE - A appears singular; remaining checks skipped")
        return rep

    rep.impulse_controllable = check_impulse_controllable(e, a, b, tol)
    if not rep.impulse_controllable:
        rep.notes.append("system is not impulse controllable")
    rep.impulse_free = check_impulse_free(e, a, tol)
    if not rep.impulse_free:
        rep.notes.append("open-loop pair is not impulse-free (closed loop may "
                         "still be, via the Riccati gain)")
    rep.f_compatible = check_F_compatible(e, f)
    if not rep.f_compatible:
        rep.notes.append("terminal weight F acts on algebraic variables "
                         "(range F* not within range E*)")
    try:
        rep.finite_dynamics_stable = _finite_dynamics_stabilizable(e, a, b, tol)
    except AssumptionViolation as exc:
        rep.finite_dynamics_stable = False
        rep.notes.append(str(exc))
    if not rep.finite_dynamics_stable:
        rep.notes.append("slow dynamics not stabilizable")
    rep.notes.append("finite_dynamics_stable records stabilizability of the "
                     "slow dynamics; closed-loop stability is verified at the "
                     "Riccati stage")
    return rep


def wrap_standard(plant):
    """View an LtiPlant as a descriptor plant with E = I."""
    return DescriptorPlant(E=np.eye(plant.n), A=plant.A, B=plant.B,
                           C=plant.C, F=plant.F)
