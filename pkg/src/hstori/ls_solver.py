"""Lyapunov-Schmidt pipeline for perturbed Clifford-type tori.

The nonlinear problem ``Phi(u, v) = 0`` is split into the part orthogonal to
the seven-dimensional cokernel of the flat operator, solved by a damped
Picard iteration preconditioned with :func:`solve_L0`, and the finite
obstruction ``G`` (six cokernel integrals), which is driven to zero by a
Newton search over unitary frames.

Every frame-dependent quantity is computed on the *pipeline potential*::

    P = rescale_potential(apply_motion(F, *frame.motion()), rho)

i.e. ``F`` is pulled back by the frame motion and then blown up by ``rho``,
so the torus ``Sigma_r`` always sits at the origin of ``P``.

Cokernel pairing functions
--------------------------
The six non-constant cokernel elements are ``f_i (v1_i, 1)`` where ``f_i``
is the Hamiltonian of the ``i``-th unit motion, normalised by
``iota_X omega = df`` (so ``X = -J grad f``).  With this sign ``G_i`` is the
first variation of volume along the ambient Hamiltonian flow of ``f_i``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import newton_krylov
from scipy.optimize import NoConvergence

from .errors import (
    CertificateError,
    DegenerateCriticalPointError,
    DegenerateMetricError,
    DegenerateRadiiError,
    ImmersionError,
    NoFrameFoundError,
    SolverAbortedError,
    SolverDivergedError,
    TotallyRealError,
)
from .kahler_potential import (
    FrameParams,
    PotentialPolynomial,
    apply_motion,
    as_frame,
    f_r_gradient,
    f_r_hessian,
    rescale_potential,
    unit_motion,
)
from .torus_geometry import (
    as_radii,
    embed,
    immersion_state,
    phi_from_state,
    volume,
)
from .torus_spectral import (
    cokernel_basis,
    cokernel_coefficients,
    grid,
    project_off_cokernel,
    solve_L0,
)

log = logging.getLogger(__name__)

MAX_RHO = 0.15
MIN_TOL = 1e-11
GRAM_COND_MAX = 1e8
HESSIAN_COND_MAX = 1e4
JACOBIAN_STEP = 1e-4
MOTION_STEP = 1e-5
MAX_HALVINGS = 6


def pipeline_potential(potential: PotentialPolynomial, rho: float, frame=None) -> PotentialPolynomial:
    """Pull ``potential`` back by the frame motion and rescale by ``rho``.

    At ``rho = 0`` the blow-up limit is the flat potential.
    """
    if rho == 0:
        return PotentialPolynomial.euclidean()
    return rescale_potential(apply_motion(potential, *as_frame(frame).motion()), rho)


def motion_hamiltonians(r, N: int):
    """Pairing functions ``f_i`` on the grid and the matching ``v1_i``.

    Returns
    -------
    F : ndarray, shape (6, N, N)
        Hamiltonians of the unit motions in chart order.
    v1 : ndarray, shape (6,)
        First components of the associated cokernel vectors.
    """
    r1, r2 = as_radii(r)
    t1, t2 = grid(N)
    F = np.stack([
        r1 * np.sin(t1),
        -r1 * np.cos(t1),
        r2 * np.sin(t2),
        -r2 * np.cos(t2),
        -r1 * r2 * np.cos(t1 - t2),
        -r1 * r2 * np.sin(t1 - t2),
    ])
    s = 1.0 / (r1 * r2)
    return F, np.array([s, s, -s, -s, 0.0, 0.0])


@dataclass(frozen=True)
class CokernelComponents:
    """Cokernel content of the residual of a projected solve.

    ``a`` multiplies the constant element ``(0, 1)``; ``b`` the six elements
    ``f_i (v1_i, 1)``.  ``I = gram @ b`` where
    ``gram[i, j] = (1 + v1_i v1_j) int (f_i - c_i) f_j dVol``.
    """

    a: float
    b: np.ndarray
    I: np.ndarray
    c: np.ndarray
    gram: np.ndarray

    @classmethod
    def zero(cls, r, N: int = 32) -> "CokernelComponents":
        return cls(0.0, np.zeros(6), np.zeros(6), np.zeros(6), _gram(r, N, None)[0])


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual_sup: float
    residual_l2: float
    norm_uv: float
    components: CokernelComponents | None
    wall_time: float
    history: tuple = ()
    method: str = "picard"


def _pair_norms(p):
    a, b = p[0].values, p[1].values
    sup = max(np.abs(a).max(), np.abs(b).max())
    l2 = math.sqrt(4 * math.pi**2 * (np.mean(a**2) + np.mean(b**2)))
    return float(sup), float(l2)


def _state(u, v, P, r):
    try:
        return immersion_state(u, v, P, r)
    except (ImmersionError, TotallyRealError, DegenerateMetricError) as exc:
        raise SolverAbortedError(f"iterate left the admissible set: {exc}") from exc


def _projected_residual(u, v, P, r):
    return project_off_cokernel(phi_from_state(_state(u, v, P, r)), r)


def _check_inputs(rho, tol):
    if not 0 <= rho <= MAX_RHO:
        raise ValueError(f"rho must lie in [0, {MAX_RHO}], got {rho}")
    if tol < MIN_TOL:
        raise ValueError(f"tol must be >= {MIN_TOL}, got {tol}")


def solve_projected(
    potential: PotentialPolynomial,
    rho: float,
    r,
    frame=None,
    tol: float = 1e-11,
    max_iter: int = 50,
    N: int = 32,
    initial=None,
    with_components: bool = True,
):
    """Solve ``pi o Phi_rho(u, v) = 0`` for mean-zero ``(u, v)`` orthogonal to the kernel.

    Parameters
    ----------
    potential : PotentialPolynomial
        Unscaled potential ``F`` (``rho`` is applied here).
    rho : float
        Blow-up scale, ``0 <= rho <= 0.15``.
    r : pair of float
        Torus radii.
    frame : FrameParams or array_like, optional
        Unitary frame; identity by default.
    tol : float
        Target sup-norm of the projected residual (``>= 1e-11``).
    initial : pair of ndarray, optional
        Warm start ``(u, v)``.

    Returns
    -------
    u, v : ndarray
    report : SolveReport

    Raises
    ------
    SolverDivergedError
        Neither Picard nor the Newton-Krylov fallback met ``tol``.
    SolverAbortedError
        An iterate stopped being a totally real immersion.
    """
    _check_inputs(rho, tol)
    r = as_radii(r)
    t0 = time.perf_counter()
    if rho == 0:
        z = np.zeros((N, N))
        comps = CokernelComponents.zero(r, N) if with_components else None
        return z, z.copy(), SolveReport(1, 0.0, 0.0, 0.0, comps, time.perf_counter() - t0, (0.0,))

    P = pipeline_potential(potential, rho, frame)
    if initial is None:
        u, v = np.zeros((N, N)), np.zeros((N, N))
    else:
        u, v = (np.array(x, dtype=float) for x in initial)

    res = _projected_residual(u, v, P, r)
    sup, _ = _pair_norms(res)
    history = [sup]
    lam = 1.0
    it = 0
    method = "picard"
    while sup >= tol and it < max_iter:
        du, dv = solve_L0(res, r, tol=1e-6)
        for _ in range(MAX_HALVINGS + 1):
            un, vn = u - lam * du.values, v - lam * dv.values
            try:
                rn = _projected_residual(un, vn, P, r)
                sn = _pair_norms(rn)[0]
            except SolverAbortedError:
                sn = np.inf
            if sn < sup or sn < tol:
                break
            lam *= 0.5
        else:
            break
        u, v, res, sup = un, vn, rn, sn
        history.append(sup)
        it += 1
        lam = min(1.0, 2 * lam)
        if len(history) > 6 and sup > 0.9 * history[-4]:
            break

    if sup >= tol:
        log.info("Picard stalled at %.3e after %d iterations; Newton-Krylov fallback", sup, it)
        u, v, it_nk = _newton_krylov(u, v, P, r, tol, max_iter)
        res = _projected_residual(u, v, P, r)
        sup = _pair_norms(res)[0]
        it += it_nk
        history.append(sup)
        method = "newton-krylov"
        if sup >= tol:
            raise SolverDivergedError(
                f"projected residual {sup:.3e} above tol {tol:.1e}", residual=sup, iterations=it
            )

    sup, l2 = _pair_norms(res)
    comps = cokernel_integrals(u, v, potential, rho, r, frame) if with_components else None
    norm = float(max(np.abs(u).max(), np.abs(v).max()))
    report = SolveReport(it, sup, l2, norm, comps, time.perf_counter() - t0, tuple(history), method)
    return u, v, report


def _newton_krylov(u, v, P, r, tol, max_iter):
    N = u.shape[0]
    count = [0]

    def F(x):
        count[0] += 1
        uu, vv = x[: N * N].reshape(N, N), x[N * N :].reshape(N, N)
        du, dv = solve_L0(_projected_residual(uu, vv, P, r), r, tol=1e-6)
        return np.concatenate([du.values.ravel(), dv.values.ravel()])

    x0 = np.concatenate([u.ravel(), v.ravel()])
    try:
        x = newton_krylov(F, x0, f_tol=tol * 1e-2, maxiter=max_iter)
    except (NoConvergence, SolverAbortedError) as exc:
        x = exc.args[0] if isinstance(exc, NoConvergence) and exc.args else x0
    return x[: N * N].reshape(N, N), x[N * N :].reshape(N, N), count[0]


def _gram(r, N, dvol):
    F, v1 = motion_hamiltonians(r, N)
    if dvol is None:
        r1, r2 = as_radii(r)
        dvol = np.full((N, N), r1 * r2)
    w = 4 * np.pi**2 / N**2
    c = np.einsum("iab,ab->i", F, dvol) / dvol.sum()
    centred = F - c[:, None, None]
    inner = np.einsum("iab,jab,ab->ij", centred, F, dvol) * w
    gram = (1 + np.outer(v1, v1)) * inner
    return gram, c, centred, v1


def cokernel_integrals(u, v, potential: PotentialPolynomial, rho: float, r, frame=None) -> CokernelComponents:
    """Cokernel integrals ``I_i`` of the residual of a converged projected solve.

    ``I_i = int (f_i - c_i) (v1_i Phi_1 + Phi_2) dVol`` over the perturbed
    torus with its induced volume form, ``c_i`` chosen so that ``f_i - c_i``
    has zero mean for that volume.

    Raises
    ------
    DegenerateRadiiError
        Condition number of the Gram matrix exceeds ``1e8``.
    """
    r = as_radii(r)
    u = np.asarray(u, dtype=float)
    N = u.shape[0]
    if rho == 0:
        return CokernelComponents.zero(r, N)
    P = pipeline_potential(potential, rho, frame)
    st = immersion_state(u, v, P, r)
    p = phi_from_state(st)
    gram, c, centred, v1 = _gram(r, N, st.sqrt_det_h)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > GRAM_COND_MAX:
        raise DegenerateRadiiError(f"cokernel Gram matrix condition {cond:.3e}")
    w = 4 * np.pi**2 / N**2
    I = np.array([
        np.sum(centred[i] * (v1[i] * p[0].values + p[1].values) * st.sqrt_det_h) * w for i in range(6)
    ])
    b = np.linalg.solve(gram, I)
    a = float(cokernel_coefficients(p, r)[0])
    return CokernelComponents(a, b, I, c, gram)


def direct_cokernel_b(u, v, potential: PotentialPolynomial, rho: float, r, frame=None) -> np.ndarray:
    """``b`` by flat L2 projection of ``Phi`` onto the cokernel, in the Hamiltonian basis.

    An independent route to :attr:`CokernelComponents.b`: at a converged
    solve ``Phi`` lies in the cokernel so both routes agree to solver tolerance.
    """
    r = as_radii(r)
    N = np.asarray(u).shape[0]
    P = pipeline_potential(potential, rho, frame)
    p = phi_from_state(immersion_state(u, v, P, r))
    F, v1 = motion_hamiltonians(r, N)
    r1, r2 = r
    w = 4 * np.pi**2 / N**2 * r1 * r2
    out = np.empty(6)
    for i in range(6):
        e1, e2 = v1[i] * F[i], F[i]
        out[i] = np.sum(p[0].values * e1 + p[1].values * e2) / np.sum(e1 * e1 + e2 * e2)
    return out


def G(potential: PotentialPolynomial, rho: float, r, frame=None, **solve_kw) -> np.ndarray:
    """The six cokernel integrals at ``frame`` after a projected solve."""
    _, _, rep = solve_projected(potential, rho, r, frame, **solve_kw)
    return rep.components.I.copy()


def predict_G_leading(potential: PotentialPolynomial, rho: float, r, frame=None) -> np.ndarray:
    """``4 pi^2 r1 r2 rho^2 D f_r`` along the six unit motions at ``frame``."""
    r1, r2 = as_radii(r)
    if rho == 0:
        return np.zeros(6)
    P = pipeline_potential(potential, rho, frame)
    return 4 * np.pi**2 * r1 * r2 * rho**2 * f_r_gradient(P, None, (r1, r2))


def cycle_actions(P: PotentialPolynomial, r, N: int = 32) -> np.ndarray:
    """Symplectic actions of the two coordinate circles of ``Sigma_r``, averaged.

    ``a_k = int_{gamma_k} lambda`` with ``lambda = Im(dF)`` (``d lambda = omega``),
    averaged over the transverse angle.  Flat torus: ``a_k = pi r_k^2``.
    """
    tg = embed(r, None, N)
    E, _ = tg.derivatives()
    d = P.derivatives([(1, 0, 0, 0), (0, 1, 0, 0)], tg.points)
    return np.array([
        2 * np.pi * np.mean((d[(1, 0, 0, 0)] * E[j, 0] + d[(0, 1, 0, 0)] * E[j, 1]).imag) for j in range(2)
    ])


def omega_correction(P: PotentialPolynomial, r, N: int = 32) -> np.ndarray:
    """``v1_i int (f_i - c_i)(omega - omega_flat)`` over ``Sigma_r`` for each motion."""
    from .torus_geometry import pullback_omega

    r = as_radii(r)
    tg = embed(r, None, N)
    pb = pullback_omega(tg, P).values
    r1, r2 = r
    F, v1 = motion_hamiltonians(r, N)
    dvol = np.full((N, N), r1 * r2)
    c = np.einsum("iab,ab->i", F, dvol) / dvol.sum()
    w = 4 * np.pi**2 / N**2
    return np.array([v1[i] * np.sum((F[i] - c[i]) * pb) * w for i in range(6)])


def volume_first_variation(P: PotentialPolynomial, r, h: float = MOTION_STEP, N: int = 32) -> np.ndarray:
    """Central difference of ``Vol(mu_t^(i)(Sigma_r))`` at ``t = 0`` for each unit motion."""
    tg = embed(r, None, N)
    out = np.empty(6)
    for i in range(6):
        vp = volume(tg, apply_motion(P, *unit_motion(i, h)))
        vm = volume(tg, apply_motion(P, *unit_motion(i, -h)))
        out[i] = (vp - vm) / (2 * h)
    return out


def predict_G_action(potential: PotentialPolynomial, rho: float, r, frame=None, h: float = MOTION_STEP, N: int = 32):
    """Volume first variation at fixed symplectic action.

    ``d/dt [Vol - sum_k (dVol/da_k) a_k]`` along each unit motion, with the
    flat-torus sensitivities ``dVol/da_k = 2 pi r1 r2 / r_k^2``.  Rigid
    motions change the actions of ``Sigma_r`` at order ``rho^2``; removing
    that change gives the variation along an action-preserving deformation.
    """
    r = as_radii(r)
    r1, r2 = r
    if rho == 0:
        return np.zeros(6)
    P = pipeline_potential(potential, rho, frame)
    tg = embed(r, None, N)
    sens = np.array([2 * np.pi * r1 * r2 / r1**2, 2 * np.pi * r1 * r2 / r2**2])
    out = np.empty(6)
    for i in range(6):
        Pp = apply_motion(P, *unit_motion(i, h))
        Pm = apply_motion(P, *unit_motion(i, -h))
        W = [volume(tg, Q) - sens @ cycle_actions(Q, r, N) for Q in (Pp, Pm)]
        out[i] = (W[0] - W[1]) / (2 * h)
    return out


def sample_directions(N: int, count: int = 4, nmax: int = 3, seed: int = 0):
    """Smooth random pairs ``(du, dv)`` built from modes with ``|n_k| <= nmax``, sup-normalised."""
    rng = np.random.default_rng(seed)
    t1, t2 = grid(N)
    out = []
    for _ in range(count):
        pair = []
        for _ in range(2):
            f = np.zeros((N, N))
            for a in range(-nmax, nmax + 1):
                for b in range(-nmax, nmax + 1):
                    if a or b:
                        c = rng.normal(size=2) / (1 + a * a + b * b)
                        f += c[0] * np.cos(a * t1 + b * t2) + c[1] * np.sin(a * t1 + b * t2)
            pair.append(f / np.abs(f).max())
        out.append(tuple(pair))
    return out


def operator_defect(
    potential: PotentialPolynomial, rho: float, r, frame=None, N: int = 32, count: int = 4, seed: int = 0, t: float = 1e-4
) -> float:
    """Sampled ``sup |(L_rho - L0) w|`` at ``(u, v) = 0`` over unit-sup directions ``w``.

    ``L_rho`` is the central-difference linearization of the stationarity
    residual on the pipeline potential.
    """
    from .torus_geometry import linearize_phi_fd
    from .torus_spectral import apply_L0

    P = pipeline_potential(potential, rho, frame)
    zero = np.zeros((N, N))
    worst = 0.0
    for du, dv in sample_directions(N, count, seed=seed):
        fd = linearize_phi_fd(zero, zero, P, r, (du, dv), t=t)
        flat = apply_L0(du, dv, r)
        for a, b in zip(fd, flat):
            worst = max(worst, float(np.abs(a.values - b.values).max()))
    return worst


# ---------------------------------------------------------------- frame search

@dataclass
class FrameResult:
    frame: FrameParams
    G: np.ndarray
    iterations: int
    fields: tuple
    report: SolveReport
    history: list = field(default_factory=list)
    jacobian: np.ndarray | None = None


def check_nondegenerate(potential: PotentialPolynomial, r, tau0=None) -> np.ndarray:
    """FD Hessian of ``f_r`` at ``tau0``; raises if its condition exceeds ``1e4``."""
    Hs = f_r_hessian(potential, tau0, r)
    cond = np.linalg.cond(Hs)
    if not np.isfinite(cond) or cond > HESSIAN_COND_MAX:
        raise DegenerateCriticalPointError(f"f_r Hessian condition number {cond:.3e} exceeds {HESSIAN_COND_MAX:.0e}")
    return Hs


def g_jacobian(potential, rho, r, tau, step=JACOBIAN_STEP, initial=None, **solve_kw):
    """Central-difference Jacobian of ``G`` in the chart coordinates."""
    J = np.empty((6, 6))
    for j in range(6):
        e = np.zeros(6)
        e[j] = step
        gp = G(potential, rho, r, tau + e, initial=initial, **solve_kw)
        gm = G(potential, rho, r, tau - e, initial=initial, **solve_kw)
        J[:, j] = (gp - gm) / (2 * step)
    return J


def find_frame(
    potential: PotentialPolynomial,
    rho: float,
    r,
    tau0=None,
    gtol: float = 1e-9,
    max_iter: int = 10,
    check_hessian: bool = True,
    initial=None,
    **solve_kw,
) -> FrameResult:
    """Newton search for a frame with ``G = 0`` starting from ``tau0``.

    Raises
    ------
    DegenerateCriticalPointError
        ``f_r`` is degenerate at ``tau0`` or the Jacobian of ``G`` is singular.
    NoFrameFoundError
        Newton did not reach ``|G| < gtol``; ``history`` holds
        ``(tau, |G|, step length)`` per iteration.
    """
    r = as_radii(r)
    tau = as_frame(tau0).tau.copy()
    # flat space (no perturbation terms) is trivially solved at any frame
    if check_hessian and potential.terms:
        check_nondegenerate(potential, r, tau)
    u, v, rep = solve_projected(potential, rho, r, tau, initial=initial, **solve_kw)
    g = rep.components.I
    history = [(tau.copy(), float(np.linalg.norm(g)), 0.0)]
    J = None
    it = 0
    while np.linalg.norm(g) >= gtol:
        if it >= max_iter:
            raise NoFrameFoundError(f"|G| = {np.linalg.norm(g):.3e} after {it} Newton steps", history)
        J = g_jacobian(potential, rho, r, tau, initial=(u, v), **solve_kw)
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
            raise DegenerateCriticalPointError(f"Jacobian of G is singular (singular values {sv})")
        step = -np.linalg.solve(J, g)
        t = 1.0
        gn0 = np.linalg.norm(g)
        while True:
            cand = tau + t * step
            try:
                un, vn, rn = solve_projected(potential, rho, r, cand, initial=(u, v), **solve_kw)
                ok = np.linalg.norm(rn.components.I) < gn0 or t < 1 / 64
            except (SolverAbortedError, SolverDivergedError):
                ok = False
                if t < 1 / 64:
                    raise NoFrameFoundError("line search left the admissible region", history)
            if ok:
                break
            t *= 0.5
        tau, u, v, rep = cand, un, vn, rn
        g = rep.components.I
        it += 1
        history.append((tau.copy(), float(np.linalg.norm(g)), float(t * np.linalg.norm(step))))
        log.info("find_frame step %d: |G| = %.3e", it, np.linalg.norm(g))
    return FrameResult(FrameParams(tau), g.copy(), it, (u, v), rep, history, J)


# ---------------------------------------------------------------- certificate

@dataclass(frozen=True)
class Certificate:
    passed: bool
    pullback_sup: float
    divH_sup: float
    a: float
    a_bound: float
    b_max: float
    volume: float

    @property
    def breakdown(self) -> dict:
        return {
            "pullback_sup": self.pullback_sup,
            "divH_sup": self.divH_sup,
            "a": self.a,
            "a_bound": self.a_bound,
            "b_max": self.b_max,
            "volume": self.volume,
        }


def certify(
    u,
    v,
    potential: PotentialPolynomial,
    rho: float,
    r,
    frame=None,
    tol: float = 1e-8,
    a_tol: float = 1e-10,
    raise_on_fail: bool = True,
) -> Certificate:
    """Stationarity certificate of the torus ``mu_X(u, v)(Sigma_r)`` at ``frame``.

    Checks ``sup|mu^* omega| <= tol``, ``sup|div H| <= tol`` and that the
    constant cokernel component obeys ``|a| <= a_tol (1 + sup|div H| Vol)``.
    """
    r = as_radii(r)
    P = pipeline_potential(potential, rho, frame)
    st = immersion_state(u, v, P, r)
    pb = float(np.abs(st.pullback).max())
    dh = float(np.abs(st.divH).max())
    vol = st.volume()
    p = phi_from_state(st)
    coef = cokernel_coefficients(p, r)
    a = float(coef[0])
    bound = a_tol * (1 + dh * vol)
    cert = Certificate(
        passed=bool(pb <= tol and dh <= tol and abs(a) <= bound),
        pullback_sup=pb,
        divH_sup=dh,
        a=a,
        a_bound=bound,
        b_max=float(np.abs(coef[1:]).max()),
        volume=vol,
    )
    if raise_on_fail and not cert.passed:
        raise CertificateError("stationarity certificate failed", cert.breakdown)
    return cert


# ---------------------------------------------------------------- radius sweep

@dataclass
class SweepPoint:
    r: tuple
    frame: FrameParams
    norm_uv: float
    certificate: Certificate | None
    critical_point: np.ndarray | None
    critical_gradient: float
    error: str | None = None


@dataclass
class SweepResult:
    points: list
    truncated: bool

    @property
    def all_certified(self) -> bool:
        return not self.truncated and all(p.certificate is not None and p.certificate.passed for p in self.points)

    def tau_jumps(self) -> np.ndarray:
        taus = np.array([p.frame.tau for p in self.points])
        return np.linalg.norm(np.diff(taus, axis=0), axis=1)

    def continuous(self, factor: float = 10.0) -> bool:
        """Max jump of ``tau*`` below ``factor`` times the median jump."""
        jumps = self.tau_jumps()
        if jumps.size == 0:
            return True
        med = np.median(jumps)
        return bool(jumps.max() <= factor * med) if med > 0 else bool(jumps.max() < 1e-12)


def critical_point_near(potential: PotentialPolynomial, r, tau0, tol: float = 1e-10, max_iter: int = 20):
    """Newton on ``grad f_r`` from ``tau0``; returns ``(tau, |grad|)``."""
    tau = as_frame(tau0).tau.copy()
    for _ in range(max_iter):
        g = f_r_gradient(potential, tau, r)
        if np.linalg.norm(g) < tol:
            break
        tau = tau - np.linalg.solve(f_r_hessian(potential, tau, r), g)
    return tau, float(np.linalg.norm(f_r_gradient(potential, tau, r)))


def sweep_radii(
    potential: PotentialPolynomial,
    rho: float,
    r,
    delta: float = 0.02,
    count: int = 5,
    tau0=None,
    direction=(1.0, 1.0),
    **find_kw,
) -> SweepResult:
    """Continuation of certified solutions over ``r' = r + s d``, ``|s| <= delta``.

    Points are visited from the centre outwards; each start reuses the frame
    and fields of its neighbour.  A failure truncates that side of the sweep.
    """
    if delta > 0.05:
        raise ValueError("sweep radius must be <= 0.05")
    r = np.array(tuple(as_radii(r)))
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    offsets = np.linspace(-delta, delta, count) if count > 1 else np.zeros(1)
    centre = int(np.argmin(np.abs(offsets)))
    results: dict[int, SweepPoint] = {}
    truncated = False

    def run(k, start, fields):
        rk = tuple(r + offsets[k] * d)
        res = find_frame(potential, rho, rk, start, initial=fields, **find_kw)
        u, v = res.fields
        cert = certify(u, v, potential, rho, rk, res.frame, raise_on_fail=False)
        crit, cg = critical_point_near(potential, rk, res.frame.tau)
        pt = SweepPoint(rk, res.frame, res.report.norm_uv, cert, crit, cg)
        return pt, res.frame.tau, res.fields

    for order in (range(centre, count), range(centre - 1, -1, -1)):
        start = as_frame(tau0).tau if not results else results[centre].frame.tau
        fields = None if not results else _centre_fields
        for k in order:
            try:
                pt, start, fields = run(k, start, fields)
            except (DegenerateCriticalPointError, NoFrameFoundError, SolverDivergedError, SolverAbortedError) as exc:
                log.warning("sweep truncated at r' = %s: %s", tuple(r + offsets[k] * d), exc)
                results[k] = SweepPoint(tuple(r + offsets[k] * d), FrameParams(start), np.nan, None, None, np.nan, str(exc))
                truncated = True
                break
            results[k] = pt
            if k == centre:
                _centre_fields = fields
        if results[centre].error is not None:
            break
    pts = [results[k] for k in sorted(results) if results[k].error is None]
    return SweepResult(pts, truncated)
