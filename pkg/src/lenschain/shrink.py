"""Shrinking points: certificates, invariant polygons, and unfolding.

A shrinking point is a codimension-two parameter point where a
resonance tongue has zero width.  Non-terminating points (interior of a
lens chain) are certified by simultaneous singularity of two
border-collision matrices; terminating points (end of a chain, l = n-1)
by a pair of branch multipliers sitting on the unit circle at a rational
angle.  Both carry an invariant polygon whose dynamics reduce to rigid
rotation, and both can be located and unfolded inside two-parameter map
families.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import smallmat
from .cycles import (
    BAND_TOL,
    Admissibility,
    AdmissibilityReport,
    CycleSolution,
    admissibility,
    bc_matrix,
    orbit_under,
    solve_cycle,
    stability_matrix,
)
from .pwamap import PwaMap, evaluate, rho
from .smallmat import SINGULARITY_TOL
from .symseq import RotationalParams, SymbolSequence, flip, rotational


class DegenerateCertificateError(ValueError):
    """Polygon construction failed: the two base cycles coincide."""


class NoConvergenceError(RuntimeError):
    def __init__(self, msg: str, iterations: int, residual: float):
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual


class SingularJacobianError(RuntimeError):
    """The two determinant residuals have a rank-deficient Jacobian."""


class ChartError(RuntimeError):
    """Local chart inversion (eta, nu) -> parameters did not converge."""


class DegenerateUnfoldingError(RuntimeError):
    """One of the leading coefficients k1..k4 failed the nonzero test."""


class ShrinkKind(enum.Enum):
    NON_TERMINATING = "non_terminating"
    TERMINATING = "terminating"


@dataclass
class FailureReport:
    """Names the first failing clause of a certificate check."""

    clause: str
    residual: float
    detail: str = ""

    def __bool__(self) -> bool:
        return False


@dataclass
class ShrinkingPointCertificate:
    kind: ShrinkKind
    params: RotationalParams
    mu: float
    p_cycle: CycleSolution          # the flip-at-0 cycle through the point
    t_values: np.ndarray            # its first components
    residuals: dict[str, float]
    construction_points: np.ndarray | None = None  # terminating only
    polygon: "Polygon | None" = None

    def __bool__(self) -> bool:
        return True

    @property
    def sequence(self) -> SymbolSequence:
        return rotational(self.params.l, self.params.m, self.params.n)


def _rho_b(pwa: PwaMap) -> float:
    r = rho(pwa)
    return float(r @ pwa.b) / max(1.0, float(np.max(np.abs(r))))


def check_nonterminating(pwa: PwaMap, mu: float, l: int, m: int, n: int,
                         tol_sing: float = SINGULARITY_TOL,
                         band: float = BAND_TOL,
                         ) -> ShrinkingPointCertificate | FailureReport:
    """Certify a non-terminating shrinking point for the word built from (l, m, n).

    Clauses, in order: rho.b nondegeneracy; singularity of P_S and of
    P_{S^{((l-1)d)}}; nonsingularity of I - M for the flip-at-0 and
    flip-at-ld words; admissibility of the flip-at-0 cycle.  The first
    failing clause is reported with its residual.  Structural
    precondition violations (bad l, m, dimension, mu = 0) raise.
    """
    if pwa.N < 2:
        raise ValueError("shrinking points need dimension >= 2")
    if mu == 0.0:
        raise ValueError("mu must be nonzero")
    if math.gcd(m, n) != 1:
        raise ValueError(f"gcd({m}, {n}) != 1")
    if not 1 < l < n - 1:
        raise ValueError(f"non-terminating points need 1 < l < n-1, got l={l}, n={n}")

    params = RotationalParams.make(l, m, n)
    d = params.d
    seq = rotational(l, m, n)
    rb = _rho_b(pwa)
    if abs(rb) <= 1e-12:
        return FailureReport("nondegeneracy", abs(rb), "rho.b vanishes")

    p_s = bc_matrix(pwa, seq)
    det_p_s = smallmat.det(p_s)
    if not smallmat.is_singular(p_s, tol_sing):
        return FailureReport("det_P_S", det_p_s, f"P_S nonsingular for {seq}")

    from .symseq import cyclic  # local import keeps module header light
    seq_rot = cyclic(seq, (l - 1) * d)
    p_rot = bc_matrix(pwa, seq_rot)
    det_p_rot = smallmat.det(p_rot)
    if not smallmat.is_singular(p_rot, tol_sing):
        return FailureReport("det_P_S_l1d", det_p_rot,
                             f"P nonsingular for rotation {seq_rot}")

    eye = np.eye(pwa.N)
    seq_check = flip(seq, 0)
    im_check = eye - stability_matrix(pwa, seq_check)
    det_m_check = smallmat.det(im_check)
    if smallmat.is_singular(im_check, tol_sing):
        return FailureReport("det_IminusM_check", det_m_check,
                             f"I - M singular for {seq_check}")

    ld = (l * d) % n
    seq_hat = flip(seq, ld)
    im_hat = eye - stability_matrix(pwa, seq_hat)
    det_m_hat = smallmat.det(im_hat)
    if smallmat.is_singular(im_hat, tol_sing):
        return FailureReport("det_IminusM_hat", det_m_hat,
                             f"I - M singular for {seq_hat}")

    p_cycle = solve_cycle(pwa, mu, seq_check, band=band, tol_sing=tol_sing)
    if not p_cycle.admissibility.ok:
        return FailureReport("admissibility",
                             p_cycle.admissibility.margin,
                             f"violations at {p_cycle.admissibility.violating_indices}")

    return ShrinkingPointCertificate(
        kind=ShrinkKind.NON_TERMINATING,
        params=params,
        mu=mu,
        p_cycle=p_cycle,
        t_values=p_cycle.s_values.copy(),
        residuals={
            "det_P_S": det_p_s,
            "det_P_S_l1d": det_p_rot,
            "det_IminusM_check": det_m_check,
            "det_IminusM_hat": det_m_hat,
            "admissibility_margin": p_cycle.admissibility.margin,
        },
    )


def _rotation_block(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s], [-s, c]])


def check_terminating(pwa: PwaMap, mu: float, m: int, n: int,
                      tol_sing: float = SINGULARITY_TOL,
                      band: float = BAND_TOL,
                      eig_tol: float = 1e-8,
                      ) -> ShrinkingPointCertificate | FailureReport:
    """Certify a terminating shrinking point (l = n-1 implied).

    Requires an admissible left fixed point whose branch matrix carries
    the multiplier pair exp(+-2*pi*i*m/n).  The cycle through the point
    is built explicitly on the center subspace (eigenvector, rotation
    block, and the 2x2 system fixing the two on-manifold points) and
    cross-checked against the linear solve of the flip-at-0 word.
    """
    if pwa.N < 2:
        raise ValueError("shrinking points need dimension >= 2")
    if mu == 0.0:
        raise ValueError("mu must be nonzero")
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if math.gcd(m, n) != 1:
        raise ValueError(f"gcd({m}, {n}) != 1")

    l = n - 1
    params = RotationalParams.make(l, m, n)
    rb = _rho_b(pwa)
    if abs(rb) <= 1e-12:
        return FailureReport("nondegeneracy", abs(rb), "rho.b vanishes")

    eye = np.eye(pwa.N)
    if smallmat.is_singular(eye - pwa.A_L, tol_sing):
        return FailureReport("fixed_point_existence",
                             smallmat.det(eye - pwa.A_L),
                             "I - A_L is singular")
    x_star = smallmat.solve(eye - pwa.A_L, mu * pwa.b, tol=tol_sing)
    s_star = float(x_star[0])
    if not s_star < 0.0:
        return FailureReport("fixed_point_admissible", s_star,
                             "left fixed point is not admissible")

    theta = 2.0 * np.pi * m / n
    target = np.exp(1j * theta)
    spectrum = smallmat.eigenvalues(pwa.A_L)
    gap = spectrum.min_distance_to([target, np.conj(target)])
    if gap > eig_tol:
        return FailureReport("eigenvalue_gap", gap,
                             f"no multiplier near exp(2*pi*i*{m}/{n})")

    seq = rotational(l, m, n)
    seq_check = flip(seq, 0)
    im_check = eye - stability_matrix(pwa, seq_check)
    det_m_check = smallmat.det(im_check)
    if smallmat.is_singular(im_check, tol_sing):
        return FailureReport("det_IminusM_check", det_m_check,
                             f"I - M singular for {seq_check}")

    # center-subspace construction of the cycle through the point
    vals, vecs = np.linalg.eig(pwa.A_L)
    v = vecs[:, int(np.argmin(np.abs(vals - target)))]
    if abs(v[0]) <= 1e-12:
        return FailureReport("eigenvector_alignment", abs(v[0]),
                             "eigenvector first component vanishes")
    v = v / v[0]  # e1.v = 1: positive real part, unit modulus
    y, z = v.real.copy(), v.imag.copy()
    yz = np.column_stack([y, z])
    c1, s1 = np.cos(2.0 * np.pi / n), np.sin(2.0 * np.pi / n)
    x_sys = np.array([[y[0], z[0]],
                      [y[0] * c1 + z[0] * s1, -y[0] * s1 + z[0] * c1]])
    alpha_beta = np.linalg.solve(x_sys, -s_star * np.ones(2))
    construction = np.empty((n, pwa.N))
    for i in range(n):
        construction[i] = yz @ (_rotation_block(theta * i) @ alpha_beta) + x_star

    p_cycle = solve_cycle(pwa, mu, seq_check, band=band, tol_sing=tol_sing)
    construction_residual = float(
        np.max(np.linalg.norm(construction - p_cycle.points, axis=1)))

    d = params.d
    sid_residual = 0.0
    cos_half = np.cos(np.pi / n)
    for i in range(n):
        predicted = s_star * (1.0 - np.cos(2.0 * np.pi * (i + 0.5) / n) / cos_half)
        sid_residual = max(sid_residual,
                           abs(construction[(i * d) % n, 0] - predicted))

    if not p_cycle.admissibility.ok:
        return FailureReport("admissibility",
                             p_cycle.admissibility.margin,
                             f"violations at {p_cycle.admissibility.violating_indices}")

    return ShrinkingPointCertificate(
        kind=ShrinkKind.TERMINATING,
        params=params,
        mu=mu,
        p_cycle=p_cycle,
        t_values=p_cycle.s_values.copy(),
        residuals={
            "eigenvalue_gap": gap,
            "det_IminusM_check": det_m_check,
            "sid_residual": sid_residual,
            "construction_residual": construction_residual,
            "admissibility_margin": p_cycle.admissibility.margin,
        },
        construction_points=construction,
    )


# ---------------------------------------------------------------------------
# Invariant polygon and the rigid-rotation conjugacy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampledCycle:
    tau: float
    points: np.ndarray
    wrap_residual: float
    verdict: Admissibility


@dataclass
class Polygon:
    vertices: np.ndarray            # (n, N), ordered by rotation: vertex j = p_{j*d}
    vertex_orbit_indices: tuple[int, ...]
    tau_grid: np.ndarray
    sampled_cycles: list[SampledCycle]
    planarity_defect: float
    edge_min_separation: float

    @property
    def n(self) -> int:
        return self.vertices.shape[0]


def _segment_distance(p0, p1, q0, q1) -> float:
    """Minimum distance between segments [p0, p1] and [q0, q1] in R^N."""
    d1, d2, r = p1 - p0, q1 - q0, p0 - q0
    a, e, f = float(d1 @ d1), float(d2 @ d2), float(d2 @ r)
    if a <= 1e-30 and e <= 1e-30:
        return float(np.linalg.norm(r))
    if a <= 1e-30:
        s, t = 0.0, np.clip(f / e, 0.0, 1.0)
    else:
        c = float(d1 @ r)
        if e <= 1e-30:
            t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-30 else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t, s = 1.0, np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm((p0 + s * d1) - (q0 + t * d2)))


def _planarity_defect(vertices: np.ndarray) -> float:
    if vertices.shape[1] <= 2:
        return 0.0
    centered = vertices - vertices.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    residual = centered - centered @ vt[:2].T @ vt[:2]
    return float(np.max(np.linalg.norm(residual, axis=1)))


def polygon(pwa: PwaMap, certificate: ShrinkingPointCertificate,
            tau_grid_size: int = 64,
            band: float = BAND_TOL,
            wrap_tol: float = 1e-9) -> Polygon:
    """Build the invariant polygon carried by a certificate.

    Vertices are the cycle points ordered by rotation (vertex j is point
    j*d of the orbit); the tau grid samples the one-parameter family of
    cycles w(tau) = tau*p + (1-tau)*p_d interpolating between adjacent
    rotations of the same orbit.  Terminating certificates use the
    center-subspace construction points as vertices.
    """
    params = certificate.params
    n, d = params.n, params.d
    mu = certificate.mu
    pts = (certificate.construction_points
           if certificate.construction_points is not None
           else certificate.p_cycle.points)
    p0, pd = pts[0], pts[d % n]
    if np.linalg.norm(p0 - pd) <= 1e-12 * max(1.0, np.linalg.norm(p0)):
        raise DegenerateCertificateError("base cycle points coincide")

    order = [(j * d) % n for j in range(n)]
    vertices = pts[order]

    seq = rotational(params.l, params.m, params.n)
    taus = np.linspace(0.0, 1.0, tau_grid_size)
    samples: list[SampledCycle] = []
    for tau in taus:
        x0 = tau * p0 + (1.0 - tau) * pd
        orbit = orbit_under(pwa, mu, seq, x0)
        wrap = float(np.linalg.norm(orbit[-1] - orbit[0]) /
                     max(1.0, float(np.linalg.norm(orbit[0]))))
        verdict = admissibility(orbit[:-1], seq, band).kind
        samples.append(SampledCycle(float(tau), orbit[:-1], wrap, verdict))

    min_sep = float("inf")
    for i in range(n):
        a0, a1 = vertices[i], vertices[(i + 1) % n]
        for j in range(i + 1, n):
            if (j - i) % n in (1, n - 1):
                continue  # adjacent edges share a vertex
            b0, b1 = vertices[j], vertices[(j + 1) % n]
            min_sep = min(min_sep, _segment_distance(a0, a1, b0, b1))

    result = Polygon(
        vertices=vertices,
        vertex_orbit_indices=tuple(order),
        tau_grid=taus,
        sampled_cycles=samples,
        planarity_defect=_planarity_defect(vertices),
        edge_min_separation=min_sep,
    )
    certificate.polygon = result
    return result


def rigid_rotation_check(pwa: PwaMap, mu: float, poly: Polygon,
                         params: RotationalParams,
                         grid_size: int = 100) -> float:
    """Max deviation of the induced circle map from rotation by 2*pi*m/n.

    The polygon boundary is parametrized edge by edge; each grid angle
    is pushed through the actual map and pulled back, and the deviation
    from a rigid rotation is measured modulo 2*pi.
    """
    verts = poly.vertices
    n = poly.n
    step = 2.0 * np.pi / n

    def embed(theta: float) -> np.ndarray:
        scaled = n * theta / (2.0 * np.pi)
        j = int(np.floor(scaled)) % n
        tau = scaled - np.floor(scaled)
        return tau * verts[j] + (1.0 - tau) * verts[(j + 1) % n]

    def pull_back(point: np.ndarray) -> list[float]:
        best = (float("inf"), 0, 0.0)
        for j in range(n):
            a, b = verts[j], verts[(j + 1) % n]
            dv = a - b
            tau = float(np.clip((point - b) @ dv / (dv @ dv), 0.0, 1.0))
            res = float(np.linalg.norm(point - (tau * a + (1.0 - tau) * b)))
            if res < best[0]:
                best = (res, j, tau)
        _, j, tau = best
        # the parametrization is two-to-one exactly at vertices: each vertex
        # is the tau = 0 end of one edge and the tau = 1 end of another, so
        # the inverse is set-valued there
        angles = [step * (j + tau)]
        if tau >= 1.0 - 1e-9:
            angles.append(step * (j - 1))
        if tau <= 1e-9:
            angles.append(step * (j + 2))
        return angles

    rotation = 2.0 * np.pi * params.m / params.n
    worst = 0.0
    for theta in np.linspace(0.0, 2.0 * np.pi, grid_size, endpoint=False):
        image = evaluate(pwa, mu, embed(theta))
        deviations = []
        for angle in pull_back(image):
            diff = (angle - theta - rotation) % (2.0 * np.pi)
            deviations.append(min(diff, 2.0 * np.pi - diff))
        worst = max(worst, min(deviations))
    return worst


# ---------------------------------------------------------------------------
# Two-parameter families: locating and unfolding shrinking points
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MapFamily:
    """A two-parameter family of maps with a fixed nonzero mu."""

    builder: Callable[[float, float], PwaMap]
    mu: float
    box: tuple[float, float, float, float] | None = None
    name: str = ""

    def map_at(self, p1: float, p2: float) -> PwaMap:
        return self.builder(float(p1), float(p2))


def _fd_step(xi: np.ndarray) -> float:
    return max(1e-6, 1e-7 * float(np.linalg.norm(xi)))


def _newton2(func, xi0, tol_abs=1e-12, tol_rel=1e-10, max_iter=50):
    """Damped Newton for 2-vector residuals with central FD Jacobian."""
    xi = np.asarray(xi0, dtype=float).copy()
    f = func(xi)
    norm0 = float(np.linalg.norm(f))
    jac = np.zeros((2, 2))

    def fill_jacobian():
        h = _fd_step(xi)
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            jac[:, k] = (func(xi + e) - func(xi - e)) / (2.0 * h)

    for iteration in range(1, max_iter + 1):
        norm_f = float(np.linalg.norm(f))
        if norm_f <= tol_abs or norm_f <= tol_rel * max(norm0, 1e-300):
            fill_jacobian()
            return xi, f, iteration - 1, jac
        fill_jacobian()
        try:
            step = np.linalg.solve(jac, f)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError(str(exc)) from exc
        scale = 1.0
        for _ in range(20):
            trial = xi - scale * step
            f_trial = func(trial)
            if float(np.linalg.norm(f_trial)) < norm_f:
                xi, f = trial, f_trial
                break
            scale *= 0.5
        else:
            raise NoConvergenceError("damping exhausted", iteration, norm_f)
    final = float(np.linalg.norm(f))
    if final <= tol_abs or final <= tol_rel * max(norm0, 1e-300):
        return xi, f, max_iter, jac
    raise NoConvergenceError("iteration budget exhausted", max_iter, final)


@dataclass
class ShrinkSearchResult:
    xi: np.ndarray
    residuals: np.ndarray
    iterations: int
    certificate: ShrinkingPointCertificate | FailureReport


def find_shrinking_point(family: MapFamily, l: int, m: int, n: int,
                         guess, tol_sing: float = SINGULARITY_TOL,
                         band: float = BAND_TOL,
                         max_iter: int = 50) -> ShrinkSearchResult:
    """Newton-refine the two border-collision determinants to a joint zero.

    The residual vector is (det P_S, det P of the rotation by (l-1)d);
    on convergence the certificate check runs at the root and its result
    (grant or failure report) is returned alongside the parameters.
    """
    params = RotationalParams.make(l, m, n)
    seq = rotational(l, m, n)
    from .symseq import cyclic
    seq_rot = cyclic(seq, (l - 1) * params.d)

    def residual(xi: np.ndarray) -> np.ndarray:
        pwa = family.map_at(xi[0], xi[1])
        return np.array([smallmat.det(bc_matrix(pwa, seq)),
                         smallmat.det(bc_matrix(pwa, seq_rot))])

    xi, f, iters, jac = _newton2(residual, guess, max_iter=max_iter)
    if smallmat.condition_estimate(jac) > 1e12:
        raise SingularJacobianError(
            f"determinant Jacobian ill-conditioned at root: cond = "
            f"{smallmat.condition_estimate(jac):.2e}")
    cert = check_nonterminating(family.map_at(xi[0], xi[1]), family.mu,
                                l, m, n, tol_sing=tol_sing, band=band)
    return ShrinkSearchResult(xi=xi, residuals=f, iterations=iters,
                              certificate=cert)


@dataclass
class RegionProbe:
    region: str
    eta: float
    nu: float
    xi: np.ndarray
    verdicts: dict[str, AdmissibilityReport]
    max_moduli: dict[str, float]
    real_multipliers_above_one: dict[str, int]


@dataclass
class Unfolding:
    xi_star: np.ndarray
    params: RotationalParams
    radius: float
    chart: str
    k1: float
    k2: float
    k3: float
    k4: float
    k_pattern: str
    h_slope: float
    g1_coeff: float
    g1_linear: float
    g2_coeff: float
    g2_linear: float
    q_slopes: dict[int, float]
    boundary_samples: dict[str, np.ndarray]
    axis_consistency: dict[str, float]
    region_probes: list[RegionProbe]
    notes: list[str] = field(default_factory=list)


class _Chart:
    """Local coordinates (eta, nu) = (s_0, s_ld) of the flip-at-0 cycle."""

    def __init__(self, family: MapFamily, xi_star: np.ndarray,
                 params: RotationalParams):
        self.family = family
        self.xi_star = np.asarray(xi_star, dtype=float)
        self.params = params
        seq = rotational(params.l, params.m, params.n)
        self.seq = seq
        self.seq_check = flip(seq, 0)
        self.ld = (params.l * params.d) % params.n

    def coords(self, xi: np.ndarray) -> np.ndarray:
        pwa = self.family.map_at(xi[0], xi[1])
        eye = np.eye(pwa.N)
        m = stability_matrix(pwa, self.seq_check)
        x0 = np.linalg.solve(eye - m,
                             self.family.mu * (bc_matrix(pwa, self.seq_check) @ pwa.b))
        pts = orbit_under(pwa, self.family.mu, self.seq_check, x0)
        return np.array([pts[0][0], pts[self.ld][0]])

    def invert(self, eta: float, nu: float, xi0=None) -> np.ndarray:
        target = np.array([eta, nu])
        start = self.xi_star if xi0 is None else np.asarray(xi0, dtype=float)
        try:
            xi, _, _, _ = _newton2(lambda xi: self.coords(xi) - target, start,
                                   tol_abs=1e-13, tol_rel=0.0, max_iter=80)
        except (NoConvergenceError, SingularJacobianError) as exc:
            raise ChartError(f"chart inversion failed at ({eta}, {nu}): {exc}") from exc
        return xi


def _bracketed_root(fun, center: float, width: float, max_expand: int = 40) -> float:
    """Expand a bracket around center until fun changes sign, then solve."""
    lo, hi = center - width, center + width
    f_lo, f_hi = fun(lo), fun(hi)
    for _ in range(max_expand):
        if np.sign(f_lo) != np.sign(f_hi):
            return float(brentq(fun, lo, hi, xtol=1e-15, rtol=8.9e-16))
        width *= 1.8
        lo, hi = center - width, center + width
        f_lo, f_hi = fun(lo), fun(hi)
    raise NoConvergenceError("no sign change while bracketing", max_expand,
                             min(abs(f_lo), abs(f_hi)))


def _probe(family: MapFamily, chart: _Chart, region: str, eta: float, nu: float,
           seq_hat: SymbolSequence, band: float) -> RegionProbe:
    xi = chart.invert(eta, nu)
    pwa = family.map_at(xi[0], xi[1])
    verdicts: dict[str, AdmissibilityReport] = {}
    moduli: dict[str, float] = {}
    real_counts: dict[str, int] = {}
    for name, word in (("S", chart.seq), ("S_check", chart.seq_check),
                       ("S_hat", seq_hat)):
        sol = solve_cycle(pwa, family.mu, word, band=band)
        verdicts[name] = sol.admissibility
        moduli[name] = sol.multipliers.max_modulus
        real_counts[name] = sol.multipliers.count_real_greater_than(1.0)
    return RegionProbe(region=region, eta=eta, nu=nu, xi=xi,
                       verdicts=verdicts, max_moduli=moduli,
                       real_multipliers_above_one=real_counts)


def unfold(family: MapFamily, xi_star, l: int, m: int, n: int,
           radius: float = 1e-3, samples: int = 11,
           tol_sing: float = SINGULARITY_TOL, band: float = BAND_TOL,
           k_tol: float = 1e-8) -> Unfolding:
    """Numerically realize the local two-parameter picture at a certified point.

    The chart axes are the two on-manifold conditions of the flip-at-0
    cycle; k1, k2 are the leading derivatives of det(I - M_S) in the
    chart, k3, k4 the values of det(I - M) for the two flipped words at
    the point.  The two curved boundaries (where the flip-at-ld cycle
    collides) are traced by 1D root-finding and fitted with quadratics;
    probes inside the two admissibility wedges record cycle verdicts and
    multipliers.  Terminating certificates fail the k4 nonzero test by
    construction (the pure-L word has a double unit multiplier there).
    """
    params = RotationalParams.make(l, m, n)
    d, nn = params.d, params.n
    xi_star = np.asarray(xi_star, dtype=float)
    chart = _Chart(family, xi_star, params)
    seq = chart.seq
    ld = chart.ld
    seq_hat = flip(seq, ld)

    samples = max(9, samples)

    def det_ims(xi: np.ndarray) -> float:
        pwa = family.map_at(xi[0], xi[1])
        return smallmat.det(np.eye(pwa.N) - stability_matrix(pwa, seq))

    def shat_pair(xi: np.ndarray) -> np.ndarray:
        pwa = family.map_at(xi[0], xi[1])
        m_hat = stability_matrix(pwa, seq_hat)
        eye = np.eye(pwa.N)
        x0 = np.linalg.solve(eye - m_hat,
                             family.mu * (bc_matrix(pwa, seq_hat) @ pwa.b))
        pts = orbit_under(pwa, family.mu, seq_hat, x0)
        return np.array([pts[0][0], pts[ld][0]])

    h = 1e-6
    k1 = (det_ims(chart.invert(h, 0.0)) - det_ims(chart.invert(-h, 0.0))) / (2 * h)
    k2 = (det_ims(chart.invert(0.0, h)) - det_ims(chart.invert(0.0, -h))) / (2 * h)
    pwa_star = family.map_at(xi_star[0], xi_star[1])
    eye = np.eye(pwa_star.N)
    k3 = smallmat.det(eye - stability_matrix(pwa_star, chart.seq_check))
    k4 = smallmat.det(eye - stability_matrix(pwa_star, seq_hat))
    for name, value in (("k1", k1), ("k2", k2), ("k3", k3), ("k4", k4)):
        if abs(value) <= k_tol:
            raise DegenerateUnfoldingError(f"{name} = {value:.3e} fails nonzero test")

    if np.sign(k1) == np.sign(k2) == -np.sign(k3) == np.sign(k4):
        k_pattern = "allK"
    elif np.sign(k1) == -np.sign(k2):
        k_pattern = "k1k2_opposite"
    else:
        k_pattern = "neither"
    notes = []
    if k_pattern == "neither":
        notes.append("measured k signs match no expected pattern")

    p_cycle = solve_cycle(pwa_star, family.mu, chart.seq_check, band=band)
    t = p_cycle.s_values

    # the two straight boundaries are the chart axes by construction
    boundary_samples: dict[str, np.ndarray] = {}
    axis_consistency: dict[str, float] = {}
    grid = np.linspace(radius / samples, radius, samples)
    for name, points in (("s_check_0", [(0.0, g) for g in grid]),
                         ("s_check_ld", [(g, 0.0) for g in grid])):
        rows, worst = [], 0.0
        for eta, nu in points:
            xi = chart.invert(eta, nu)
            coords = chart.coords(xi)
            resid = abs(coords[0]) if name == "s_check_0" else abs(coords[1])
            worst = max(worst, resid)
            rows.append((eta, nu, xi[0], xi[1]))
        boundary_samples[name] = np.array(rows)
        axis_consistency[name] = worst

    # curved boundaries: roots of the flip-at-ld cycle's on-manifold conditions
    t_lp1 = t[((l + 1) * d) % nn]
    t_md = t[(-d) % nn]
    pred_g1 = -k2 / (k1 * t_lp1)
    pred_g2 = -k1 / (k2 * t_md)
    two_sided = np.concatenate([-grid[::-1], grid])

    rows = []
    for nu in two_sided:
        center = pred_g1 * nu * nu
        eta_root = _bracketed_root(
            lambda e: shat_pair(chart.invert(e, nu))[1],
            center, max(abs(center), 1e-4 * radius * radius + 1e-14))
        rows.append((eta_root, nu, *chart.invert(eta_root, nu)))
    boundary_samples["s_hat_ld"] = np.array(rows)
    basis = np.vstack([boundary_samples["s_hat_ld"][:, 1] ** 2,
                       boundary_samples["s_hat_ld"][:, 1],
                       np.ones(len(two_sided))]).T
    coef1 = np.linalg.lstsq(basis, boundary_samples["s_hat_ld"][:, 0], rcond=None)[0]

    rows = []
    for eta in two_sided:
        center = pred_g2 * eta * eta
        nu_root = _bracketed_root(
            lambda v: shat_pair(chart.invert(eta, v))[0],
            center, max(abs(center), 1e-4 * radius * radius + 1e-14))
        rows.append((eta, nu_root, *chart.invert(eta, nu_root)))
    boundary_samples["s_hat_0"] = np.array(rows)
    basis = np.vstack([boundary_samples["s_hat_0"][:, 0] ** 2,
                       boundary_samples["s_hat_0"][:, 0],
                       np.ones(len(two_sided))]).T
    coef2 = np.linalg.lstsq(basis, boundary_samples["s_hat_0"][:, 1], rcond=None)[0]

    if l == n - 1:
        valid = [i for i in range(nn) if i not in {0, (n - 2) % nn, (n - 1) % nn}]
    else:
        valid = [i for i in range(nn)
                 if i not in {0, (l - 1) % nn, l % nn, (nn - 1) % nn}]
    q_slopes = {i: -k1 * t[((i + 1) * d) % nn] / (k2 * t[(i * d) % nn])
                for i in valid}

    probes = [
        _probe(family, chart, "psi1", radius / 2, radius / 2, seq_hat, band),
        _probe(family, chart, "psi2", -radius / 2, -radius / 2, seq_hat, band),
    ]

    return Unfolding(
        xi_star=xi_star, params=params, radius=radius,
        chart="eta = s_0, nu = s_ld of the flip-at-0 cycle",
        k1=k1, k2=k2, k3=k3, k4=k4, k_pattern=k_pattern,
        h_slope=-k1 / k2,
        g1_coeff=float(coef1[0]), g1_linear=float(coef1[1]),
        g2_coeff=float(coef2[0]), g2_linear=float(coef2[1]),
        q_slopes=q_slopes,
        boundary_samples=boundary_samples,
        axis_consistency=axis_consistency,
        region_probes=probes,
        notes=notes,
    )


@dataclass
class VirtualCurveResult:
    index: int
    samples: np.ndarray          # (K, 4): eta, nu, xi1, xi2
    fitted_slope: float
    formula_slope: float
    verdicts: list[Admissibility]


def virtual_curves(family: MapFamily, xi_star, l: int, m: int, n: int,
                   index: int, radius: float = 1e-3, samples: int = 9,
                   band: float = BAND_TOL) -> VirtualCurveResult:
    """Trace the singularity curve of the rotated border-collision matrix.

    Along the traced curve the cycle of the word rotated by index*d has
    its base point on the switching manifold, but away from the four
    tongue boundaries the cycle itself is virtual, so these curves never
    show up in attractor scans.
    """
    params = RotationalParams.make(l, m, n)
    d, nn = params.d, params.n
    if l == n - 1:
        excluded = {0, (n - 2) % nn, (n - 1) % nn}
    else:
        excluded = {0, (l - 1) % nn, l % nn, (nn - 1) % nn}
    if index % nn in excluded:
        raise ValueError(f"index {index} is a tongue-boundary index, not a virtual one")

    chart = _Chart(family, np.asarray(xi_star, dtype=float), params)
    seq = chart.seq
    from .symseq import cyclic
    seq_rot = cyclic(seq, (index * d) % nn)

    pwa_star = family.map_at(xi_star[0], xi_star[1])
    p_cycle = solve_cycle(pwa_star, family.mu, chart.seq_check, band=band)
    t = p_cycle.s_values

    def det_rot(xi: np.ndarray) -> float:
        pwa = family.map_at(xi[0], xi[1])
        return smallmat.det(bc_matrix(pwa, seq_rot))

    # leading slope of det(I - M_S) zero curve enters the prediction
    h = 1e-6
    def det_ims(xi):
        pwa = family.map_at(xi[0], xi[1])
        return smallmat.det(np.eye(pwa.N) - stability_matrix(pwa, seq))
    k1 = (det_ims(chart.invert(h, 0.0)) - det_ims(chart.invert(-h, 0.0))) / (2 * h)
    k2 = (det_ims(chart.invert(0.0, h)) - det_ims(chart.invert(0.0, -h))) / (2 * h)
    formula_slope = -k1 * t[((index + 1) * d) % nn] / (k2 * t[(index * d) % nn])

    grid = np.concatenate([np.linspace(-radius, -radius / samples, samples),
                           np.linspace(radius / samples, radius, samples)])
    rows, verdicts = [], []
    for eta in grid:
        center = formula_slope * eta
        nu_root = _bracketed_root(
            lambda v: det_rot(chart.invert(eta, v)),
            center, max(abs(center) * 0.5, 1e-3 * radius))
        xi = chart.invert(eta, nu_root)
        rows.append((eta, nu_root, xi[0], xi[1]))
        pwa = family.map_at(xi[0], xi[1])
        verdicts.append(
            solve_cycle(pwa, family.mu, seq, band=band).admissibility.kind)
    arr = np.array(rows)
    fitted = float(arr[:, 0] @ arr[:, 1] / (arr[:, 0] @ arr[:, 0]))
    return VirtualCurveResult(index=index, samples=arr, fitted_slope=fitted,
                              formula_slope=formula_slope, verdicts=verdicts)


@dataclass
class CorollaryReport:
    det_IminusM: float
    IminusM_fires: bool
    p_dets: list[float]
    p_fires: list[bool]
    flat_index: int | None

    @property
    def all_singular(self) -> bool:
        return self.IminusM_fires and all(self.p_fires)


def corollary_check(pwa: PwaMap, mu: float, l: int, m: int, n: int,
                    tol_sing: float = SINGULARITY_TOL) -> CorollaryReport:
    """Evaluate det(I - M_S) and det P over every cyclic rotation of the word.

    At a shrinking point all of them must fire the singularity
    predicate.  For terminating points (l = n-1) the rotation starting
    at the single R is flagged: its determinant is quadratically flat in
    parameters, though still zero at the point itself.
    """
    from .symseq import cyclic
    params = RotationalParams.make(l, m, n)
    seq = rotational(l, m, n)
    im = np.eye(pwa.N) - stability_matrix(pwa, seq)
    det_m = smallmat.det(im)
    fires_m = smallmat.is_singular(im, tol_sing)
    p_dets, p_fires = [], []
    for i in range(n):
        p = bc_matrix(pwa, cyclic(seq, i))
        p_dets.append(smallmat.det(p))
        p_fires.append(smallmat.is_singular(p, tol_sing))
    flat = ((n - 1) * params.d) % n if l == n - 1 else None
    return CorollaryReport(det_IminusM=det_m, IminusM_fires=fires_m,
                           p_dets=p_dets, p_fires=p_fires, flat_index=flat)
