"""Periodic solutions with a prescribed branch order.

For a word S of length n the cycle points solve the linear system
(I - M_S) x0 = mu * P_S b, where M_S is the ordered product of branch
matrices along S (the stability matrix) and P_S is the sum of its
suffix products (the border-collision matrix).  P_S never involves the
first symbol, so flipping S at index 0 leaves it bit-identical.

Admissibility compares the sign pattern of the orbit's first components
with the word; points inside the on-manifold band are unconstrained.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass

import numpy as np

from . import smallmat
from .pwamap import PwaMap, apply_branch, rho
from .smallmat import SINGULARITY_TOL, Spectrum
from .symseq import SymbolSequence, as_sequence, flip

BAND_TOL = 1e-8


class SingularSystemError(ValueError):
    """The cycle solution system is singular; see solution_nature."""

    def __init__(self, msg: str, det_IminusM: float, det_P: float):
        super().__init__(msg)
        self.det_IminusM = det_IminusM
        self.det_P = det_P


def stability_matrix(pwa: PwaMap, seq: SymbolSequence | str) -> np.ndarray:
    """Ordered product A_{S_{n-1}} ... A_{S_0}."""
    seq = as_sequence(seq)
    m = np.eye(pwa.N)
    for symbol in seq:
        m = pwa.branch(symbol) @ m
    return m


def bc_matrix(pwa: PwaMap, seq: SymbolSequence | str) -> np.ndarray:
    """Suffix-product sum I + A_{S_{n-1}} + A_{S_{n-1}}A_{S_{n-2}} + ...

    The sum stops before the first symbol is ever used, so the result is
    exactly independent of S_0.
    """
    seq = as_sequence(seq)
    p = np.eye(pwa.N)
    t = np.eye(pwa.N)
    for i in range(len(seq) - 1, 0, -1):
        t = t @ pwa.branch(seq[i])
        p = p + t
    return p


def orbit_under(pwa: PwaMap, mu: float, seq: SymbolSequence | str, x0) -> np.ndarray:
    """The n+1 points of forced branch iteration along the word from x0."""
    seq = as_sequence(seq)
    pts = np.empty((len(seq) + 1, pwa.N))
    pts[0] = np.asarray(x0, dtype=float)
    for i, symbol in enumerate(seq):
        pts[i + 1] = apply_branch(pwa, mu, symbol, pts[i])
    return pts


class Admissibility(enum.Enum):
    ADMISSIBLE = "admissible"
    BOUNDARY = "boundary"
    VIRTUAL = "virtual"


@dataclass(frozen=True)
class AdmissibilityReport:
    kind: Admissibility
    boundary_indices: tuple[int, ...]
    violating_indices: tuple[int, ...]
    margin: float

    @property
    def ok(self) -> bool:
        """Admissible or on-manifold only; no strict sign violations."""
        return self.kind is not Admissibility.VIRTUAL


def admissibility(points, seq: SymbolSequence | str,
                  band: float = BAND_TOL) -> AdmissibilityReport:
    """Compare orbit signs with the word.

    Index i is on-manifold when |s_i| <= band * max(1, ||x_i||); such
    points satisfy either symbol.  Off-manifold signs must match
    (L negative, R positive); every mismatch is reported.  margin is the
    smallest off-manifold |s_i| (inf if every point is on the manifold).
    """
    seq = as_sequence(seq)
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] != len(seq):
        raise ValueError(f"{pts.shape[0]} points for a length-{len(seq)} word")
    boundary: list[int] = []
    violating: list[int] = []
    margin = float("inf")
    for i, symbol in enumerate(seq):
        s = pts[i, 0]
        if abs(s) <= band * max(1.0, float(np.linalg.norm(pts[i]))):
            boundary.append(i)
            continue
        margin = min(margin, abs(s))
        if (symbol == "L" and s > 0.0) or (symbol == "R" and s < 0.0):
            violating.append(i)
    if violating:
        kind = Admissibility.VIRTUAL
    elif boundary:
        kind = Admissibility.BOUNDARY
    else:
        kind = Admissibility.ADMISSIBLE
    return AdmissibilityReport(kind, tuple(boundary), tuple(violating), margin)


@dataclass(frozen=True)
class CycleSolution:
    """An S-cycle with its diagnostics."""

    sequence: SymbolSequence
    points: np.ndarray        # (n, N), x_0 .. x_{n-1}
    s_values: np.ndarray      # first components
    admissibility: AdmissibilityReport
    multipliers: Spectrum     # spectrum of M_S
    det_IminusM: float
    det_P: float
    wrap_residual: float

    @property
    def n(self) -> int:
        return len(self.sequence)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(f"# sequence = {self.sequence}\n")
        out.write(f"# admissibility = {self.admissibility.kind.value}\n")
        out.write(f"# det_IminusM = {self.det_IminusM:.17g}\n")
        out.write(f"# det_P = {self.det_P:.17g}\n")
        out.write("# multipliers = " + "; ".join(
            f"{v.real:.17g}{v.imag:+.17g}j" for v in self.multipliers.values) + "\n")
        out.write(f"# wrap_residual = {self.wrap_residual:.17g}\n")
        cols = ",".join(f"x{k + 1}" for k in range(self.points.shape[1]))
        out.write(f"index,s,{cols}\n")
        for i in range(self.points.shape[0]):
            row = ",".join(f"{v:.17g}" for v in self.points[i])
            out.write(f"{i},{self.s_values[i]:.17g},{row}\n")
        return out.getvalue()


def solve_cycle(pwa: PwaMap, mu: float, seq: SymbolSequence | str,
                band: float = BAND_TOL,
                tol_sing: float = SINGULARITY_TOL) -> CycleSolution:
    """Solve the cycle system and rebuild the orbit by forced iteration.

    Raises SingularSystemError (carrying both determinants) when
    I - M_S is singular by the shared predicate; callers wanting the
    full classification should use solution_nature.
    """
    seq = as_sequence(seq)
    m = stability_matrix(pwa, seq)
    p = bc_matrix(pwa, seq)
    eye = np.eye(pwa.N)
    d_m = smallmat.det(eye - m)
    d_p = smallmat.det(p)
    if smallmat.is_singular(eye - m, tol_sing):
        raise SingularSystemError(
            f"I - M_S singular (det = {d_m:.3e}); see solution_nature",
            det_IminusM=d_m, det_P=d_p)
    x0 = np.linalg.solve(eye - m, mu * (p @ pwa.b))
    pts = orbit_under(pwa, mu, seq, x0)
    wrap = float(np.linalg.norm(pts[-1] - pts[0]) /
                 max(1.0, float(np.linalg.norm(pts[0]))))
    body = pts[:-1]
    return CycleSolution(
        sequence=seq,
        points=body,
        s_values=body[:, 0].copy(),
        admissibility=admissibility(body, seq, band),
        multipliers=smallmat.eigenvalues(m),
        det_IminusM=d_m,
        det_P=d_p,
        wrap_residual=wrap,
    )


def nth_iterate_map(pwa: PwaMap, mu: float, seq: SymbolSequence | str) -> PwaMap:
    """The n-step composite as a map of the same piecewise-affine form.

    Branch matrices are the stability matrices of the word with its
    first symbol forced to L and to R (they differ only in the first
    column), and the offset is P_S b, so evaluating the returned map at
    the same mu reproduces n forced steps of the original.
    """
    seq = as_sequence(seq)
    seq_l = seq if seq[0] == "L" else flip(seq, 0)
    seq_r = seq if seq[0] == "R" else flip(seq, 0)
    m_l = stability_matrix(pwa, seq_l)
    m_r = stability_matrix(pwa, seq_r)
    return PwaMap(m_l, m_r, bc_matrix(pwa, seq) @ pwa.b)


class NatureCell(enum.Enum):
    UNIQUE_OFF_MANIFOLD = "unique_off_manifold"
    NO_SOLUTION = "no_solution"
    UNIQUE_ON_MANIFOLD = "unique_on_manifold"
    AFFINE_FAMILY = "affine_family"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class SolutionNature:
    cell: NatureCell
    det_IminusM: float
    det_P: float


def solution_nature(pwa: PwaMap, mu: float, seq: SymbolSequence | str,
                    tol_sing: float = SINGULARITY_TOL,
                    degeneracy_tol: float = 1e-12) -> SolutionNature:
    """Classify the cycle system by the two singularity verdicts.

    Nonsingular I - M_S gives a unique solution, on the manifold exactly
    when P_S is singular; singular I - M_S gives no solution for
    nonsingular P_S and (possibly) an affine family otherwise.  mu = 0
    or rho.b = 0 short-circuits to DEGENERATE.
    """
    seq = as_sequence(seq)
    m = stability_matrix(pwa, seq)
    p = bc_matrix(pwa, seq)
    eye = np.eye(pwa.N)
    d_m = smallmat.det(eye - m)
    d_p = smallmat.det(p)
    r = rho(pwa)
    degenerate = mu == 0.0 or \
        abs(float(r @ pwa.b)) <= degeneracy_tol * max(1.0, float(np.max(np.abs(r))))
    if degenerate:
        return SolutionNature(NatureCell.DEGENERATE, d_m, d_p)
    m_sing = smallmat.is_singular(eye - m, tol_sing)
    p_sing = smallmat.is_singular(p, tol_sing)
    if not m_sing:
        cell = NatureCell.UNIQUE_ON_MANIFOLD if p_sing else NatureCell.UNIQUE_OFF_MANIFOLD
    else:
        cell = NatureCell.AFFINE_FAMILY if p_sing else NatureCell.NO_SOLUTION
    return SolutionNature(cell, d_m, d_p)


def affine_family(pwa: PwaMap, mu: float, seq: SymbolSequence | str,
                  null_tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Particular solution and null-space basis when the system is singular.

    Returns (x0, basis) with basis rows spanning null(I - M_S); every
    x0 + c @ basis solves the cycle system.  Raises SingularSystemError
    when the system is inconsistent (least-squares residual too large).
    """
    seq = as_sequence(seq)
    m = stability_matrix(pwa, seq)
    p = bc_matrix(pwa, seq)
    eye = np.eye(pwa.N)
    a = eye - m
    rhs = mu * (p @ pwa.b)
    x0, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    residual = float(np.linalg.norm(a @ x0 - rhs))
    scale = max(1.0, float(np.linalg.norm(rhs)))
    if residual > 1e-6 * scale:
        raise SingularSystemError(
            f"inconsistent system, residual {residual:.3e}",
            det_IminusM=smallmat.det(a), det_P=smallmat.det(p))
    u, s, vt = np.linalg.svd(a)
    smax = s[0] if s[0] > 0 else 1.0
    basis = vt[s <= null_tol * smax]
    return x0, basis


def stacked_system(pwa: PwaMap, mu: float, seq: SymbolSequence | str
                   ) -> tuple[np.ndarray, np.ndarray]:
    """The full n*N-dimensional linear system over all cycle points at once.

    Unknowns are (x_0, ..., x_{n-1}) stacked; equations are
    x_{i+1} - A_{S_i} x_i = mu*b with wrap-around.  Kept as an
    independent oracle for the elimination-based solver.
    """
    seq = as_sequence(seq)
    n, big = len(seq), len(seq) * pwa.N
    a = np.zeros((big, big))
    rhs = np.zeros(big)
    for i in range(n):
        rows = slice(i * pwa.N, (i + 1) * pwa.N)
        a[rows, ((i + 1) % n) * pwa.N:((i + 1) % n) * pwa.N + pwa.N] = np.eye(pwa.N)
        a[rows, i * pwa.N:(i + 1) * pwa.N] -= pwa.branch(seq[i])
        rhs[i * pwa.N:(i + 1) * pwa.N] = mu * pwa.b
    return a, rhs
