"""The piecewise-affine continuous map x' = mu*b + A_{L|R} x.

The branch is selected by the sign of the first state component
s = x[0]; the two matrices must agree exactly in every column but the
first, which makes the map continuous across the switching manifold
s = 0.  mu is deliberately an argument rather than a field: the scaling
symmetry f_{lam*mu}(lam*x) = lam*f_mu(x) makes only the sign of mu
essential.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import smallmat
from .smallmat import SINGULARITY_TOL


class ContinuityError(ValueError):
    """The two branch matrices differ outside the first column."""


class UnitMultiplierError(ValueError):
    """I - A is singular: the requested fixed point does not exist."""


@dataclass(frozen=True, eq=False)
class PwaMap:
    """Branch matrices A_L, A_R (equal off the first column) and offset b."""

    A_L: np.ndarray
    A_R: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a_l = smallmat.as_matrix(self.A_L)
        a_r = smallmat.as_matrix(self.A_R)
        b = np.asarray(self.b, dtype=float)
        if a_l.shape != a_r.shape:
            raise ValueError("branch matrices must have the same shape")
        if b.shape != (a_l.shape[0],):
            raise ValueError(f"offset shape {b.shape} does not match N={a_l.shape[0]}")
        # exact, not tolerance-based: silent near-discontinuity is worse than rejection
        if a_l.shape[0] > 1 and not np.array_equal(a_l[:, 1:], a_r[:, 1:]):
            raise ContinuityError("A_L and A_R differ outside the first column")
        object.__setattr__(self, "A_L", a_l)
        object.__setattr__(self, "A_R", a_r)
        object.__setattr__(self, "b", b)

    @property
    def N(self) -> int:
        return self.A_L.shape[0]

    def branch(self, symbol: str) -> np.ndarray:
        if symbol == "L":
            return self.A_L
        if symbol == "R":
            return self.A_R
        raise ValueError(f"unknown branch symbol {symbol!r}")


def evaluate(pwa: PwaMap, mu: float, x) -> np.ndarray:
    """One step of the map; branch chosen by the sign of x[0].

    At s = 0 both branches agree exactly (continuity), so the choice is
    immaterial.
    """
    x = np.asarray(x, dtype=float)
    a = pwa.A_L if x[0] <= 0.0 else pwa.A_R
    return mu * pwa.b + a @ x


def apply_branch(pwa: PwaMap, mu: float, symbol: str, x) -> np.ndarray:
    """One step forced through the named branch, ignoring the sign of x[0]."""
    x = np.asarray(x, dtype=float)
    return mu * pwa.b + pwa.branch(symbol) @ x


def rho(pwa: PwaMap, tol: float = 1e-10) -> np.ndarray:
    """Shared first row of adj(I - A_L) and adj(I - A_R).

    The two computations must agree (continuity guarantees it up to
    roundoff); disagreement beyond tol raises ContinuityError.
    """
    if pwa.N < 2:
        raise ValueError("rho requires dimension >= 2")
    eye = np.eye(pwa.N)
    row_l = smallmat.adjugate(eye - pwa.A_L)[0]
    row_r = smallmat.adjugate(eye - pwa.A_R)[0]
    scale = max(1.0, float(np.max(np.abs(row_l))), float(np.max(np.abs(row_r))))
    if np.max(np.abs(row_l - row_r)) > tol * scale:
        raise ContinuityError("adjugate first rows disagree beyond tolerance")
    return row_l


@dataclass(frozen=True)
class FixedPointReport:
    side: str
    point: np.ndarray
    s_star: float
    admissible: bool
    det_IminusA: float


def fixed_point(pwa: PwaMap, mu: float, side: str,
                tol_sing: float = SINGULARITY_TOL) -> FixedPointReport:
    """Fixed point of one branch: x* = mu * (I - A)^-1 b.

    Admissible iff s* = x*[0] strictly carries the side's sign (negative
    for L, positive for R).
    """
    if pwa.N < 2:
        raise ValueError("fixed_point requires dimension >= 2")
    a = pwa.branch(side)
    eye = np.eye(pwa.N)
    d = smallmat.det(eye - a)
    try:
        x = smallmat.solve(eye - a, mu * pwa.b, tol=tol_sing)
    except smallmat.SingularMatrixError as exc:
        raise UnitMultiplierError(f"I - A_{side} is singular: {exc}") from exc
    s = float(x[0])
    admissible = s < 0.0 if side == "L" else s > 0.0
    return FixedPointReport(side=side, point=x, s_star=s, admissible=admissible,
                            det_IminusA=d)


class BorderCollisionClass(enum.Enum):
    PERSISTENCE = "persistence"
    NONSMOOTH_FOLD = "nonsmooth_fold"
    DEGENERATE = "degenerate"


def classify_border_collision(pwa: PwaMap, tol_sing: float = SINGULARITY_TOL,
                              degeneracy_tol: float = 1e-12) -> BorderCollisionClass:
    """Feigin parity rule at mu = 0.

    Counts the real multipliers of each branch matrix exceeding one.
    Even total: one fixed point persists through the border collision.
    Odd total: the two fixed points coexist for one sign of mu and
    annihilate in a nonsmooth fold.  Degenerate when rho.b = 0 or when
    either I - A_i is singular.
    """
    if pwa.N < 2:
        raise ValueError("classification requires dimension >= 2")
    eye = np.eye(pwa.N)
    if smallmat.is_singular(eye - pwa.A_L, tol_sing) or \
       smallmat.is_singular(eye - pwa.A_R, tol_sing):
        return BorderCollisionClass.DEGENERATE
    r = rho(pwa)
    if abs(float(r @ pwa.b)) <= degeneracy_tol * max(1.0, float(np.max(np.abs(r)))):
        return BorderCollisionClass.DEGENERATE
    total = smallmat.eigenvalues(pwa.A_L).count_real_greater_than(1.0) + \
        smallmat.eigenvalues(pwa.A_R).count_real_greater_than(1.0)
    if total % 2 == 0:
        return BorderCollisionClass.PERSISTENCE
    return BorderCollisionClass.NONSMOOTH_FOLD


def is_homeomorphism(pwa: PwaMap) -> bool:
    """det(A_L) * det(A_R) > 0 is equivalent to global invertibility."""
    return smallmat.det(pwa.A_L) * smallmat.det(pwa.A_R) > 0.0


# ---------------------------------------------------------------------------
# Config text format: key = value lines, matrices row-major, p/q fractions.
# ---------------------------------------------------------------------------

def parse_number(text: str) -> float:
    """Parse a decimal or an exact integer fraction like 28/87."""
    t = text.strip()
    if "/" in t:
        num, den = t.split("/", 1)
        return float(Fraction(int(num.strip()), int(den.strip())))
    return float(t)


def _parse_vector(text: str) -> np.ndarray:
    return np.array([parse_number(p) for p in text.split(",")])


def parse_map_config(text: str) -> tuple[PwaMap, float | None]:
    """Parse the key = value map format.

    Keys: N, A_L, A_R (row-major, comma separated, p/q literals allowed),
    b, and optional mu.  Lines starting with # are comments.
    """
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    for key in ("N", "A_L", "A_R", "b"):
        if key not in entries:
            raise ValueError(f"missing key {key!r} in map config")
    n = int(entries["N"])
    a_l = _parse_vector(entries["A_L"]).reshape(n, n)
    a_r = _parse_vector(entries["A_R"]).reshape(n, n)
    b = _parse_vector(entries["b"])
    mu = parse_number(entries["mu"]) if "mu" in entries else None
    return PwaMap(a_l, a_r, b), mu


def format_map_config(pwa: PwaMap, mu: float | None = None) -> str:
    """Serialize a map back to the config format (round-trips exactly)."""
    def row_major(a: np.ndarray) -> str:
        return ", ".join(repr(float(v)) for v in a.ravel())

    lines = [
        f"N = {pwa.N}",
        f"A_L = {row_major(pwa.A_L)}",
        f"A_R = {row_major(pwa.A_R)}",
        f"b = {row_major(pwa.b)}",
    ]
    if mu is not None:
        lines.append(f"mu = {mu!r}")
    return "\n".join(lines) + "\n"
