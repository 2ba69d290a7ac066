"""Deformed tori ``mu_X(Sigma_r)`` and their induced geometry.

The torus ``Sigma_r = {(r1 e^{i t1}, r2 e^{i t2})}`` is pushed radially::

    z^k(theta) = r_k (1 + X^k(theta)) e^{i theta^k}

and every geometric quantity is assembled node by node on the ``N x N`` grid.

Sign conventions
----------------
``B_{jkl} = omega(E_l, (nabla_{E_j} E_k)^perp)`` and ``H_l = h^{jk} B_{jkl}``.
This ordering of the slots gives ``B = r_m^2`` on the diagonal and
``H_j = 1`` on the flat torus.  The stationarity residual returned by
:func:`phi` is ``(pullback / (r1 r2), -div H)``; with these signs its
derivative at the flat torus is exactly the operator in
:mod:`hstori.torus_spectral`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateMetricError, ImmersionError, TotallyRealError
from .kahler_potential import PotentialPolynomial
from .torus_spectral import SpectralField, grid, spectral_derivative

IMMERSION_FLOOR = 0.1
TOTALLY_REAL_TOL = 1e-6


@dataclass(frozen=True)
class Radii:
    """Torus radii ``(r1, r2)`` and the ansatz tensor ``eps``."""

    r1: float
    r2: float
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "r1", float(self.r1))
        object.__setattr__(self, "r2", float(self.r2))
        if not (self.r1 > 0 and self.r2 > 0):
            raise ValueError("radii must be positive")
        if self.normalized and abs(self.r1**2 + self.r2**2 - 1) > 1e-12:
            raise ValueError("normalized radii must satisfy r1^2 + r2^2 = 1")

    def __iter__(self):
        return iter((self.r1, self.r2))

    def __getitem__(self, i):
        return (self.r1, self.r2)[i]

    @property
    def eps(self) -> np.ndarray:
        """``eps[k, j] = eps_k^j``: ``eps_1^2 = -r1/r2``, ``eps_2^1 = r2/r1``."""
        return np.array([[0.0, -self.r1 / self.r2], [self.r2 / self.r1, 0.0]])

    @classmethod
    def equal(cls) -> "Radii":
        s = 2**-0.5
        return cls(s, s, normalized=True)


def as_radii(r) -> Radii:
    return r if isinstance(r, Radii) else Radii(*r)


@dataclass(frozen=True)
class NormalField:
    """Relative radial perturbations ``(X^1, X^2)``."""

    X1: SpectralField
    X2: SpectralField

    @property
    def N(self) -> int:
        return self.X1.N

    @classmethod
    def zeros(cls, N: int) -> "NormalField":
        z = SpectralField.zeros(N)
        return cls(z, z)

    @classmethod
    def constant(cls, a: float, b: float, N: int) -> "NormalField":
        return cls(SpectralField(np.full((N, N), a)), SpectralField(np.full((N, N), b)))

    def stack(self) -> np.ndarray:
        return np.stack([self.X1.values, self.X2.values])


def _vals(f):
    return f.values if isinstance(f, SpectralField) else np.asarray(f, dtype=float)


def ansatz_X(u, v, r) -> NormalField:
    """``X^k = (d_k v + eps_k^j d_j u) / r_k^2`` with spectral derivatives."""
    r = as_radii(r)
    u, v = _vals(u), _vals(v)
    du = [spectral_derivative(u, 0), spectral_derivative(u, 1)]
    dv = [spectral_derivative(v, 0), spectral_derivative(v, 1)]
    e = r.eps
    X = []
    for k, rk in enumerate(r):
        X.append((dv[k] + e[k, 0] * du[0] + e[k, 1] * du[1]) / rk**2)
    return NormalField(SpectralField(X[0]), SpectralField(X[1]))


@dataclass(frozen=True, eq=False)
class TorusGrid:
    """Grid of ambient points ``z[k, i1, i2]`` of a torus with winding (1,0),(0,1)."""

    points: np.ndarray
    r: Radii

    @property
    def N(self) -> int:
        return self.points.shape[1]

    def amplitude(self) -> np.ndarray:
        """Periodic amplitudes ``z^k e^{-i theta^k}``."""
        t1, t2 = grid(self.N)
        return np.stack([self.points[0] * np.exp(-1j * t1), self.points[1] * np.exp(-1j * t2)])

    def derivatives(self):
        """Tangents ``E[j, k] = d z^k / d theta^j`` and ``D[j, l, k] = d^2 z^k / d theta^j d theta^l``.

        The winding factor is peeled off first so that only periodic smooth
        amplitudes are differentiated spectrally.
        """
        N = self.N
        t1, t2 = grid(N)
        ph = np.stack([np.exp(1j * t1), np.exp(1j * t2)])
        A = self.amplitude()
        dA = np.stack([spectral_derivative(A, 1), spectral_derivative(A, 2)])  # [j, k]
        ddA = np.empty((2, 2, 2, N, N), dtype=complex)
        for j in range(2):
            for l in range(j, 2):
                ddA[j, l] = ddA[l, j] = spectral_derivative(dA[j], 1 + l)
        E = np.empty((2, 2, N, N), dtype=complex)
        D = np.empty((2, 2, 2, N, N), dtype=complex)
        for k in range(2):
            for j in range(2):
                E[j, k] = (dA[j, k] + 1j * (j == k) * A[k]) * ph[k]
                for l in range(2):
                    D[j, l, k] = (
                        ddA[j, l, k]
                        + 1j * (l == k) * dA[j, k]
                        + 1j * (j == k) * dA[l, k]
                        - (j == k) * (l == k) * A[k]
                    ) * ph[k]
        return E, D


def embed(r, X: NormalField | None = None, N: int | None = None) -> TorusGrid:
    """Points ``(r1 (1+X^1) e^{i t1}, r2 (1+X^2) e^{i t2})`` on the grid.

    Raises
    ------
    ImmersionError
        If ``|1 + X^k| < 0.1`` somewhere.
    """
    r = as_radii(r)
    if X is None:
        X = NormalField.zeros(N or 32)
    Xs = X.stack()
    if np.abs(1 + Xs).min() < IMMERSION_FLOOR:
        raise ImmersionError("deformation too large: |1 + X^k| < 0.1")
    t1, t2 = grid(X.N)
    pts = np.stack(
        [r.r1 * (1 + Xs[0]) * np.exp(1j * t1), r.r2 * (1 + Xs[1]) * np.exp(1j * t2)]
    )
    return TorusGrid(pts, r)


# ------------------------------------------------------------ ambient data

_H_ALPHAS = {(0, 0): (1, 0, 1, 0), (0, 1): (1, 0, 0, 1), (1, 0): (0, 1, 1, 0), (1, 1): (0, 1, 0, 1)}
# F_{,b c lbar} for b <= c
_T_ALPHAS = {
    (0, 0, 0): (2, 0, 1, 0),
    (0, 0, 1): (2, 0, 0, 1),
    (0, 1, 0): (1, 1, 1, 0),
    (0, 1, 1): (1, 1, 0, 1),
    (1, 1, 0): (0, 2, 1, 0),
    (1, 1, 1): (0, 2, 0, 1),
}


def _ambient(potential: PotentialPolynomial, pts: np.ndarray, with_connection: bool = True):
    alphas = list(_H_ALPHAS.values()) + (list(_T_ALPHAS.values()) if with_connection else [])
    d = potential.derivatives(alphas, pts)
    Hm = np.empty((2, 2) + pts.shape[1:], dtype=complex)
    for (k, l), a in _H_ALPHAS.items():
        Hm[k, l] = d[a]
    Hm[0, 0] = Hm[0, 0].real
    Hm[1, 1] = Hm[1, 1].real
    if not with_connection:
        return Hm, None
    T = np.empty((2, 2, 2) + pts.shape[1:], dtype=complex)
    for (b, c, l), a in _T_ALPHAS.items():
        T[b, c, l] = T[c, b, l] = d[a]
    return Hm, T


def _pair(Hm, X, Y):
    """``sum_{k,l} h_{k lbar} X^k conj(Y^l)`` nodewise; X, Y have leading axis 2."""
    return np.einsum("kl...,k...,l...->...", Hm, X, np.conj(Y))


def _inv2(m):
    """Inverse of a field of 2x2 matrices with axes (2, 2, ...)."""
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    inv = np.empty_like(m)
    inv[0, 0] = m[1, 1] / det
    inv[1, 1] = m[0, 0] / det
    inv[0, 1] = -m[0, 1] / det
    inv[1, 0] = -m[1, 0] / det
    return inv, det


@dataclass(frozen=True, eq=False)
class ImmersionState:
    """Nodewise geometry of an immersed torus in a Kähler metric.

    Arrays carry the grid axes last.  ``h[j, k]`` is the induced metric,
    ``gamma[s, l, m]`` its Christoffel symbols, ``B[j, k, l]`` the symplectic
    second fundamental form, ``H[l]`` the mean curvature one-form.
    """

    grid: TorusGrid
    E: np.ndarray
    h: np.ndarray
    hinv: np.ndarray
    sqrt_det_h: np.ndarray
    gamma: np.ndarray
    B: np.ndarray
    H: np.ndarray
    divH: np.ndarray
    pullback: np.ndarray

    @property
    def N(self) -> int:
        return self.grid.N

    def volume(self) -> float:
        return float(np.mean(self.sqrt_det_h) * 4 * np.pi**2)

    def table(self):
        """Rows ``(theta1, theta2, Re z1, Im z1, Re z2, Im z2, H1, H2, divH, pullback)``."""
        t1, t2 = grid(self.N)
        z = self.grid.points
        cols = [t1, t2, z[0].real, z[0].imag, z[1].real, z[1].imag, self.H[0], self.H[1], self.divH, self.pullback]
        return np.stack([c.ravel() for c in cols], axis=1)

    def to_csv(self, path) -> None:
        header = ["theta1", "theta2", "re_z1", "im_z1", "re_z2", "im_z2", "H1", "H2", "divH", "omega_pullback"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in self.table():
                w.writerow([repr(float(x)) for x in row])


def _totally_real_check(E):
    N = E.shape[-1]
    cols = []
    for v in (E[0], E[1], 1j * E[0], 1j * E[1]):
        cols.append(np.stack([v[0].real, v[0].imag, v[1].real, v[1].imag]))
    M = np.stack(cols, axis=1).reshape(4, 4, N * N).transpose(2, 0, 1)
    smin = np.linalg.svd(M, compute_uv=False)[:, -1].min()
    if smin <= TOTALLY_REAL_TOL:
        raise TotallyRealError(f"tangent planes not totally real (min singular value {smin:.2e})")
    return smin


def induced_geometry(torus: TorusGrid, potential: PotentialPolynomial, check: bool = True) -> ImmersionState:
    """Assemble ``h``, ``Gamma``, ``B``, ``H``, ``div H`` and the pullback of ``omega``."""
    E, D = torus.derivatives()
    if check:
        _totally_real_check(E)
    Hm, T = _ambient(potential, torus.points)
    Hinv, _ = _inv2(Hm)
    N = torus.N

    h = np.empty((2, 2, N, N))
    for j in range(2):
        for k in range(j, 2):
            h[j, k] = h[k, j] = 2 * _pair(Hm, E[j], E[k]).real
    hinv, deth = _inv2(h)
    if deth.min() <= 0:
        raise DegenerateMetricError("induced metric not positive definite")
    pullback = -2 * _pair(Hm, E[0], E[1]).imag

    # (nabla_{E_j} E_k)^{1,0} = D_{jk} + Gamma^a_{bc} E_j^b E_k^c,
    # Gamma^a_{bc} = sum_l g^{a lbar} F_{,b c lbar} and g^{a lbar} = Hinv[l, a]
    B = np.empty((2, 2, 2, N, N))
    for j in range(2):
        for k in range(j, 2):
            s = np.einsum("bcl...,b...,c...->l...", T, E[j], E[k])
            V = D[j, k] + np.einsum("la...,l...->a...", Hinv, s)
            gV = np.stack([2 * _pair(Hm, V, E[m]).real for m in range(2)])
            a = np.einsum("sm...,m...->s...", hinv, gV)
            Vperp = V - a[0] * E[0] - a[1] * E[1]
            for l in range(2):
                B[j, k, l] = B[k, j, l] = -2 * _pair(Hm, E[l], Vperp).imag
    H = np.einsum("jk...,jkl...->l...", hinv, B)

    dh = np.stack([spectral_derivative(h, 2), spectral_derivative(h, 3)])  # [m, p, q]
    # Gamma^s_{lm} = 1/2 h^{sp} (d_l h_{pm} + d_m h_{pl} - d_p h_{lm})
    low = 0.5 * (
        np.einsum("lpm...->plm...", dh)
        + np.einsum("mpl...->plm...", dh)
        - dh
    )
    gamma = np.einsum("sp...,plm...->slm...", hinv, low)
    dH = np.stack([spectral_derivative(H, 1), spectral_derivative(H, 2)])  # [m, l]
    cov = np.einsum("ml...->lm...", dH) - np.einsum("slm...,s...->lm...", gamma, H)
    divH = np.einsum("lm...,lm...->...", hinv, cov)

    return ImmersionState(torus, E, h, hinv, np.sqrt(deth), gamma, B, H, divH, pullback)


def div_H(state: ImmersionState) -> SpectralField:
    return SpectralField(state.divH)


def pullback_omega(torus: TorusGrid, potential: PotentialPolynomial) -> SpectralField:
    """Coefficient of ``mu^* omega`` against ``dtheta1 ^ dtheta2``."""
    E, _ = torus.derivatives()
    Hm, _ = _ambient(potential, torus.points, with_connection=False)
    return SpectralField(-2 * _pair(Hm, E[0], E[1]).imag)


def volume(torus: TorusGrid, potential: PotentialPolynomial) -> float:
    """``int sqrt(det h) dtheta`` by the trapezoid rule."""
    E, _ = torus.derivatives()
    Hm, _ = _ambient(potential, torus.points, with_connection=False)
    h00 = 2 * _pair(Hm, E[0], E[0]).real
    h11 = 2 * _pair(Hm, E[1], E[1]).real
    h01 = 2 * _pair(Hm, E[0], E[1]).real
    det = h00 * h11 - h01**2
    if det.min() <= 0:
        raise DegenerateMetricError("induced metric not positive definite")
    return float(np.mean(np.sqrt(det)) * 4 * np.pi**2)


def immersion_state(u, v, potential: PotentialPolynomial, r, check: bool = True) -> ImmersionState:
    r = as_radii(r)
    return induced_geometry(embed(r, ansatz_X(u, v, r)), potential, check=check)


def phi_from_state(state: ImmersionState):
    r1, r2 = state.grid.r
    return SpectralField(state.pullback / (r1 * r2)), SpectralField(-state.divH)


def phi(u, v, potential: PotentialPolynomial, r):
    """Stationarity residual ``(pullback / (r1 r2), -div H)`` of ``mu_X(u,v)(Sigma_r)``."""
    return phi_from_state(immersion_state(u, v, potential, r))


def linearize_phi_fd(u0, v0, potential, r, direction, t: float = 1e-4):
    """Central difference of :func:`phi` at ``(u0, v0)`` along ``direction``."""
    if not 1e-6 <= t <= 1e-3:
        raise ValueError("step must lie in [1e-6, 1e-3]")
    du, dv = (_vals(d) for d in direction)
    u0, v0 = _vals(u0), _vals(v0)
    p = phi(u0 + t * du, v0 + t * dv, potential, r)
    m = phi(u0 - t * du, v0 - t * dv, potential, r)
    return (
        SpectralField((p[0].values - m[0].values) / (2 * t)),
        SpectralField((p[1].values - m[1].values) / (2 * t)),
    )


@dataclass(frozen=True)
class FourierSplit:
    """Torus integral of a polynomial split by Fourier order."""

    integral: float
    low_order: float
    fourth_order: float

    @property
    def defect(self) -> float:
        return abs(self.integral - self.low_order - self.fourth_order)


def fourier_split(poly: PotentialPolynomial, r, N: int = 32) -> FourierSplit:
    """Check ``int_T2 f = 4 pi^2 (f(0) + r1^2 f_{1 1bar} + r2^2 f_{2 2bar}) + Q4``.

    ``f`` is the full polynomial of ``poly`` (degree <= 4 for the identity to
    be exact) restricted to ``Sigma_r``; ``Q4`` collects the contributions of
    the three diagonal quartic monomials ``|z1|^4, |z1|^2 |z2|^2, |z2|^4``.
    The left side is the trapezoid rule, exact for trigonometric polynomials
    of degree below ``N``.
    """
    r1, r2 = as_radii(r)
    t1, t2 = grid(N)
    z = np.stack([r1 * np.exp(1j * t1), r2 * np.exp(1j * t2)])
    integral = float(np.mean(poly.evaluate(z)) * 4 * np.pi**2)
    d = poly.derivatives([(0, 0, 0, 0), (1, 0, 1, 0), (0, 1, 0, 1)], (0, 0))
    low = 4 * np.pi**2 * (d[(0, 0, 0, 0)] + r1**2 * d[(1, 0, 1, 0)] + r2**2 * d[(0, 1, 0, 1)]).real
    c = poly.full_terms()
    q4 = (
        c.get((2, 0, 2, 0), 0) * r1**4
        + c.get((1, 1, 1, 1), 0) * r1**2 * r2**2
        + c.get((0, 2, 0, 2), 0) * r2**4
    )
    return FourierSplit(integral, float(low), float(4 * np.pi**2 * np.real(q4)))
