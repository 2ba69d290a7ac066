"""Fourier-side treatment of the flat linearized operator on the torus.

Fields live on the uniform ``N x N`` grid ``theta_j = 2 pi j / N`` (array axis
0 is ``theta^1``).  The flat linearization acts on a pair ``(u, v)`` of
mean-zero functions mode by mode through the lower-triangular matrix::

    M(n) = [[-|n|_r^2, 0   ],
            [ c(n),    Q(n)]]

where ``|n|_r^2 = n1^2/r1^2 + n2^2/r2^2``,
``Q(n) = sum_{i,k} (n_i^2 n_k^2 + n_i n_k)/(r_i^2 r_k^2) - sum_i 2 n_i^2 / r_i^4`` and
``c(n) = (n1 + n2)(n1/(r1^3 r2) - n2/(r1 r2^3))`` is the multiplier of the
coupling ``A^{lm} eps_l^k d_m d_k`` with ``A^{lm} = 2 delta^{lm}/r_m^4 - 1/(r_l^2 r_m^2)``.
The first channel is the Laplacian of ``u`` (the 2-form coefficient divided
by the flat area density ``r1 r2``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import InconsistentRHSError

CHOP = 1e-14
KERNEL_MODES = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))


def _rr(r):
    r1, r2 = (float(x) for x in r)
    return r1, r2


def wavenumbers(N: int) -> np.ndarray:
    return np.fft.fftfreq(N, 1.0 / N)


def grid(N: int):
    """Mesh ``(theta1, theta2)`` with ``indexing='ij'``."""
    t = 2 * np.pi * np.arange(N) / N
    return np.meshgrid(t, t, indexing="ij")


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real scalar field on the ``N x N`` torus grid."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("SpectralField needs a square 2-d array")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @cached_property
    def coeffs(self) -> np.ndarray:
        """Fourier coefficients ``fhat(n) = mean(f exp(-i n.theta))``."""
        return np.fft.fft2(self.values) / self.N**2

    @classmethod
    def from_coeffs(cls, c) -> "SpectralField":
        c = np.asarray(c)
        return cls(np.real(np.fft.ifft2(c * c.shape[0] ** 2)))

    @classmethod
    def from_function(cls, f: Callable, N: int) -> "SpectralField":
        t1, t2 = grid(N)
        return cls(np.broadcast_to(f(t1, t2), (N, N)))

    @classmethod
    def zeros(cls, N: int) -> "SpectralField":
        return cls(np.zeros((N, N)))

    @classmethod
    def mode(cls, n, N: int, kind: str = "cos") -> "SpectralField":
        fn = np.cos if kind == "cos" else np.sin
        return cls.from_function(lambda a, b: fn(n[0] * a + n[1] * b), N)

    def mean(self) -> float:
        return float(self.values.mean())

    def sup(self) -> float:
        return float(np.abs(self.values).max())

    def derivative(self, axis: int, order: int = 1) -> "SpectralField":
        return SpectralField(spectral_derivative(self.values, axis, order))

    def integral(self, density: float | np.ndarray = 1.0) -> float:
        """Trapezoid integral over ``[0, 2pi]^2`` against ``density``."""
        return float(np.mean(self.values * density) * 4 * np.pi**2)

    def __add__(self, other):
        return SpectralField(self.values + _vals(other))

    def __sub__(self, other):
        return SpectralField(self.values - _vals(other))

    def __mul__(self, other):
        return SpectralField(self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(-self.values)


def _vals(x):
    return x.values if isinstance(x, SpectralField) else x


def spectral_derivative(values: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
    """FFT derivative along ``axis`` with the Nyquist mode zeroed."""
    N = values.shape[axis]
    k = 1j * wavenumbers(N)
    k[N // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = N
    mult = (k**order).reshape(shape)
    out = np.fft.ifft(np.fft.fft(values, axis=axis) * mult, axis=axis)
    return out.real if np.isrealobj(values) else out


# ---------------------------------------------------------------- symbols


def laplace_symbol(n1, n2, r):
    r1, r2 = _rr(r)
    return n1**2 / r1**2 + n2**2 / r2**2


def quartic_symbol(n1, n2, r):
    r1, r2 = _rr(r)
    a = n1**2 / r1**2 + n2**2 / r2**2
    b = n1 / r1**2 + n2 / r2**2
    return a**2 + b**2 - 2 * (n1**2 / r1**4 + n2**2 / r2**4)


def coupling_symbol(n1, n2, r):
    r1, r2 = _rr(r)
    return (n1 + n2) * (n1 / (r1**3 * r2) - n2 / (r1 * r2**3))


def symbol(n: Sequence[int], r):
    """Mode matrix ``M(n)`` and quartic symbol ``Q(n)`` for a single mode."""
    n1, n2 = (float(x) for x in n)
    Q = quartic_symbol(n1, n2, r)
    M = np.array([[-laplace_symbol(n1, n2, r), 0.0], [coupling_symbol(n1, n2, r), Q]])
    return M, Q


@dataclass(frozen=True, eq=False)
class ModeSystem:
    """Symbol arrays on the FFT mode grid of size ``N``."""

    N: int
    r: tuple
    lap: np.ndarray
    Q: np.ndarray
    c: np.ndarray
    kernel_mask: np.ndarray

    @classmethod
    def build(cls, N: int, r) -> "ModeSystem":
        k = wavenumbers(N)
        n1, n2 = np.meshgrid(k, k, indexing="ij")
        mask = np.zeros((N, N), dtype=bool)
        for m in KERNEL_MODES:
            mask[m[0] % N, m[1] % N] = True
        return cls(
            N,
            _rr(r),
            laplace_symbol(n1, n2, r),
            quartic_symbol(n1, n2, r),
            coupling_symbol(n1, n2, r),
            mask,
        )


_MODE_CACHE: dict = {}


def mode_system(N: int, r) -> ModeSystem:
    key = (N, _rr(r))
    ms = _MODE_CACHE.get(key)
    if ms is None:
        if len(_MODE_CACHE) > 64:
            _MODE_CACHE.clear()
        ms = _MODE_CACHE[key] = ModeSystem.build(N, r)
    return ms


def _coeffs(f):
    if isinstance(f, SpectralField):
        return f.coeffs
    return np.fft.fft2(np.asarray(f, dtype=float)) / np.asarray(f).shape[0] ** 2


def _pair_from_coeffs(cu, cv):
    return SpectralField.from_coeffs(cu), SpectralField.from_coeffs(cv)


def _zero_mean(c):
    c = np.array(c, dtype=complex)
    c[0, 0] = 0.0
    return c


def _chop(c):
    """Zero FFT roundoff (below ``CHOP * max|c|``) before a high-order symbol amplifies it."""
    c = np.array(c, dtype=complex)
    c[np.abs(c) < CHOP * np.abs(c).max(initial=0.0)] = 0.0
    return c


def apply_L0(u, v, r):
    """Flat linearization of the stationarity system acting on ``(u, v)``."""
    cu, cv = _chop(_zero_mean(_coeffs(u))), _chop(_zero_mean(_coeffs(v)))
    ms = mode_system(cu.shape[0], r)
    return _pair_from_coeffs(-ms.lap * cu, ms.c * cu + ms.Q * cv)


def apply_L0_adjoint(p, q, r):
    """Formal adjoint of :func:`apply_L0` for the flat pairing of pairs.

    ``(p, q) -> (Lap p + C q, Q q)`` with ``C`` the (self-adjoint) coupling.
    Constants are kept: the adjoint acts on the mean-zero-augmented space.
    """
    cp, cq = _chop(_coeffs(p)), _chop(_coeffs(q))
    ms = mode_system(cp.shape[0], r)
    return _pair_from_coeffs(-ms.lap * cp + ms.c * cq, ms.Q * cq)


def flat_inner(x, y, r) -> float:
    """``int (x1 y1 + x2 y2) dVol`` with the flat density ``r1 r2``."""
    r1, r2 = _rr(r)
    s = sum(np.mean(_vals(a) * _vals(b)) for a, b in zip(x, y))
    return float(s * 4 * np.pi**2 * r1 * r2)


# ---------------------------------------------------------- kernel/cokernel


_KERNEL_FUNCS = (
    ("cos t1", lambda a, b: np.cos(a)),
    ("cos t2", lambda a, b: np.cos(b)),
    ("sin t1", lambda a, b: np.sin(a)),
    ("sin t2", lambda a, b: np.sin(b)),
    ("cos(t1-t2)", lambda a, b: np.cos(a - b)),
    ("sin(t1-t2)", lambda a, b: np.sin(a - b)),
)


def kernel_basis(r, N: int = 32):
    """The six kernel pairs ``(0, f)``, normalised in the flat L2 pairing."""
    r1, r2 = _rr(r)
    norm = np.sqrt(2 * np.pi**2 * r1 * r2)
    zero = SpectralField.zeros(N)
    return [(zero, SpectralField.from_function(f, N) * (1 / norm)) for _, f in _KERNEL_FUNCS]


@dataclass(frozen=True)
class CokernelBasis:
    """Adjoint kernel: the constant pair ``(0, 1)`` and six pairs ``f (v1, 1)``.

    Attributes
    ----------
    names : tuple of str
        Labels of the six trigonometric functions ``f``.
    v1 : ndarray, shape (6,)
        First components of the constant vectors (second components are 1).
    gram : ndarray, shape (6, 6)
        Flat-volume Gram matrix of the six functions ``f``.
    """

    r: tuple
    names: tuple
    funcs: tuple
    v1: np.ndarray
    gram: np.ndarray

    def functions(self, N: int):
        return [SpectralField.from_function(f, N) for f in self.funcs]

    def elements(self, N: int):
        """Seven pairs; the first is the constant ``(0, 1)``."""
        one = SpectralField(np.ones((N, N)))
        zero = SpectralField.zeros(N)
        out = [(zero, one)]
        for f, a in zip(self.functions(N), self.v1):
            out.append((f * a, f))
        return out


def cokernel_basis(r) -> CokernelBasis:
    r1, r2 = _rr(r)
    s = 1.0 / (r1 * r2)
    v1 = np.array([s, -s, s, -s, 0.0, 0.0])
    gram = 2 * np.pi**2 * r1 * r2 * np.eye(6)
    names = tuple(n for n, _ in _KERNEL_FUNCS)
    funcs = tuple(f for _, f in _KERNEL_FUNCS)
    return CokernelBasis((r1, r2), names, funcs, v1, gram)


def cokernel_coefficients(pair, r):
    """Flat-L2 coefficients of ``pair`` along the seven cokernel elements."""
    N = _vals(pair[0]).shape[0]
    out = []
    for e in cokernel_basis(r).elements(N):
        out.append(flat_inner(pair, e, r) / flat_inner(e, e, r))
    return np.array(out)


def project_off_cokernel(pair, r):
    """Flat-L2 orthogonal projection onto the complement of the cokernel."""
    N = _vals(pair[0]).shape[0]
    coef = cokernel_coefficients(pair, r)
    p, q = np.array(_vals(pair[0]), float), np.array(_vals(pair[1]), float)
    for a, (e1, e2) in zip(coef, cokernel_basis(r).elements(N)):
        p -= a * e1.values
        q -= a * e2.values
    return SpectralField(p), SpectralField(q)


def solve_L0(rhs, r, tol: float = 1e-8):
    """Inverse of the projected flat operator from the cokernel complement.

    Each mode solves the triangular system ``M(n)``; on the six kernel modes
    the ``v`` coefficient is set to zero so the solution is orthogonal to the
    kernel.  The mean of both outputs is zero.

    Raises
    ------
    InconsistentRHSError
        If ``apply_L0`` of the solution misses ``rhs`` by more than
        ``tol * (1 + sup|rhs|)`` (``rhs`` had cokernel content).
    """
    c1, c2 = _coeffs(rhs[0]), _coeffs(rhs[1])
    ms = mode_system(c1.shape[0], r)
    lap = ms.lap.copy()
    lap[0, 0] = 1.0
    cu = -c1 / lap
    Q = np.where(ms.kernel_mask, 1.0, ms.Q)
    Q[0, 0] = 1.0
    cv = (c2 - ms.c * cu) / Q
    cv[ms.kernel_mask] = 0.0
    cu[0, 0] = cv[0, 0] = 0.0
    u, v = _pair_from_coeffs(cu, cv)
    back = apply_L0(u, v, r)
    scale = 1.0 + max(np.abs(_vals(rhs[0])).max(), np.abs(_vals(rhs[1])).max())
    miss = max(np.abs(back[0].values - _vals(rhs[0])).max(), np.abs(back[1].values - _vals(rhs[1])).max())
    if miss > tol * scale:
        raise InconsistentRHSError(f"rhs not in the range of the flat operator (miss {miss:.3e})")
    return u, v


def q_roots(r, nmax: int = 20, tol: float = 1e-8):
    """Integer modes with ``|n_k| <= nmax`` where the quartic symbol vanishes."""
    k = np.arange(-nmax, nmax + 1)
    n1, n2 = np.meshgrid(k, k, indexing="ij")
    Q = quartic_symbol(n1, n2, r)
    hit = np.abs(Q) <= tol
    return sorted(zip(n1[hit].tolist(), n2[hit].tolist())), Q


def kernel_report_rows(r, nmax: int = 8):
    """Rows ``(n1, n2, Q(n))`` for ``|n_k| <= nmax``."""
    rows = []
    for a in range(-nmax, nmax + 1):
        for b in range(-nmax, nmax + 1):
            rows.append((a, b, float(quartic_symbol(a, b, r))))
    return rows


def write_kernel_report(path, r, nmax: int = 8) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n1", "n2", "Q"])
        for row in kernel_report_rows(r, nmax):
            w.writerow([row[0], row[1], repr(row[2])])
