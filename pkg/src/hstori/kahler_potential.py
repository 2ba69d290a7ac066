"""Kähler potentials on a neighbourhood of the origin in C^2.

A potential is stored as an exact polynomial in the independent variables
``(z1, z2, zb1, zb2)``::

    F(z, zb) = base(z, zb) + rho**2 * Fhat(z, zb)

where ``base`` is the Euclidean part ``|z|^2 / 2`` (plus whatever linear and
constant terms a rigid motion produces) and ``Fhat`` is the perturbation.
A monomial is keyed by its multi-degree ``(a, b, c, d)`` meaning
``z1**a z2**b zb1**c zb2**d``.

Conventions
-----------
Real coordinates are ordered ``(Re z1, Im z1, Re z2, Im z2)``.  With
``h_{k lbar} = d^2 F / dz^k dzb^l`` the metric and Kähler form are::

    g(X, Y)     =  2 Re sum_{k,l} h_{k lbar} X^k conj(Y^l)
    omega(X, Y) = -2 Im sum_{k,l} h_{k lbar} X^k conj(Y^l)

with ``X^k = dz^k(X)``, so that ``F = |z|^2/2`` gives the identity metric,
``omega = dx1^dy1 + dx2^dy2`` and ``omega(X, Y) = g(JX, Y)``.
"""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import (
    DegenerateMetricError,
    InvalidMotionError,
    NormalFormError,
    RealityError,
    UnsupportedOrderError,
)

MAX_JET_ORDER = 4
REALITY_TOL = 1e-12
UNITARY_TOL = 1e-12

K1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
K2 = np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=complex)

EUCLIDEAN_BASE = {(1, 0, 1, 0): 0.5 + 0j, (0, 1, 0, 1): 0.5 + 0j}


def conj_index(alpha):
    """Swap holomorphic and antiholomorphic degrees."""
    a, b, c, d = alpha
    return (c, d, a, b)


def _clean(terms: Mapping) -> dict:
    out = {}
    for k, v in terms.items():
        k = tuple(int(x) for x in k)
        if len(k) != 4 or min(k) < 0:
            raise ValueError(f"bad multi-degree {k}")
        v = complex(v)
        if v != 0:
            out[k] = out.get(k, 0j) + v
    return out


def reality_defect(terms: Mapping) -> float:
    """Largest ``|kappa(a,b,c,d) - conj(kappa(c,d,a,b))|`` over all terms."""
    worst = 0.0
    for k, v in terms.items():
        worst = max(worst, abs(v - np.conj(terms.get(conj_index(k), 0j))))
    return worst


def symmetrize(terms: Mapping) -> dict:
    """Project a term dictionary onto its real (conjugate-symmetric) part."""
    keys = set(terms) | {conj_index(k) for k in terms}
    out = {}
    for k in keys:
        v = 0.5 * (terms.get(k, 0j) + np.conj(terms.get(conj_index(k), 0j)))
        if v != 0:
            out[k] = complex(v)
    return out


def _merge(*pairs) -> dict:
    out: dict = defaultdict(complex)
    for scale, terms in pairs:
        for k, v in terms.items():
            out[k] += scale * v
    return {k: v for k, v in out.items() if v != 0}


class _Compiled:
    """Vectorised evaluator of a term dictionary and its mixed partials."""

    def __init__(self, terms: Mapping):
        keys = list(terms)
        self.exps = np.array(keys, dtype=int).reshape(-1, 4)
        self.coefs = np.array([terms[k] for k in keys], dtype=complex)
        self.maxdeg = int(self.exps.max()) if len(keys) else 0
        self._cache: dict = {}

    def _plan(self, alpha):
        plan = self._cache.get(alpha)
        if plan is None:
            if len(self.coefs) == 0:
                plan = (np.zeros(0, complex), np.zeros((0, 4), int))
            else:
                al = np.asarray(alpha)
                keep = np.all(self.exps >= al, axis=1)
                e = self.exps[keep]
                fac = np.ones(len(e))
                for i in range(4):
                    fac *= np.array([math.perm(int(n), int(al[i])) for n in e[:, i]], dtype=float)
                plan = (self.coefs[keep] * fac, e - al)
            self._cache[alpha] = plan
        return plan

    def powers(self, z1, z2):
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        D = self.maxdeg + 1
        p = np.empty((4, D) + z1.shape, dtype=complex)
        p[:, 0] = 1.0
        for row, base in enumerate((z1, z2, np.conj(z1), np.conj(z2))):
            for k in range(1, D):
                p[row, k] = p[row, k - 1] * base
        return p

    def derivative(self, alpha, pw):
        coef, e = self._plan(tuple(alpha))
        shape = pw.shape[2:]
        if len(coef) == 0:
            return np.zeros(shape, dtype=complex)
        mono = pw[0, e[:, 0]] * pw[1, e[:, 1]] * pw[2, e[:, 2]] * pw[3, e[:, 3]]
        return np.tensordot(coef, mono, axes=1)


@dataclass(frozen=True, eq=False)
class PotentialPolynomial:
    """Exact polynomial Kähler potential ``F = base + rho**2 * terms``.

    Parameters
    ----------
    terms : mapping
        Perturbation ``Fhat`` as ``{(a, b, c, d): coefficient}``.
    rho : float
        Scale attached to the perturbation part.
    base : mapping, optional
        Unscaled part, defaults to ``|z|^2 / 2``.
    normal_form : bool
        When true every perturbation term must have total degree >= 4.
    """

    terms: Mapping = field(default_factory=dict)
    rho: float = 1.0
    base: Mapping = field(default_factory=lambda: dict(EUCLIDEAN_BASE))
    normal_form: bool = True

    def __post_init__(self):
        terms = _clean(self.terms)
        base = _clean(self.base)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "rho", float(self.rho))
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        for name, t in (("perturbation", terms), ("base", base)):
            scale = max([1.0] + [abs(v) for v in t.values()])
            if reality_defect(t) > REALITY_TOL * scale:
                raise RealityError(f"{name} terms are not conjugate symmetric")
        if self.normal_form and any(sum(k) < 4 for k in terms):
            raise NormalFormError("normal-form potential has perturbation terms of degree < 4")

    @classmethod
    def euclidean(cls) -> "PotentialPolynomial":
        return cls({}, rho=0.0)

    @property
    def degree(self) -> int:
        return max([0] + [sum(k) for k in self.terms] + [sum(k) for k in self.base])

    def full_terms(self) -> dict:
        """All terms of ``F`` with the ``rho**2`` factor applied."""
        return _merge((1.0, self.base), (self.rho**2, self.terms))

    def replace(self, **changes) -> "PotentialPolynomial":
        kw = dict(terms=self.terms, rho=self.rho, base=self.base, normal_form=self.normal_form)
        kw.update(changes)
        return PotentialPolynomial(**kw)

    @cached_property
    def _full(self) -> _Compiled:
        return _Compiled(self.full_terms())

    @cached_property
    def _hat(self) -> _Compiled:
        return _Compiled(self.terms)

    def evaluate(self, z) -> np.ndarray:
        """Value of ``F`` at points ``z`` of shape ``(2, ...)``; real part returned."""
        z = np.asarray(z, dtype=complex)
        pw = self._full.powers(z[0], z[1])
        return self._full.derivative((0, 0, 0, 0), pw).real

    def derivatives(self, alphas: Iterable, z, part: str = "full") -> dict:
        """Mixed partials of ``F`` (or of ``Fhat`` with ``part='hat'``) at ``z``."""
        comp = self._full if part == "full" else self._hat
        z = np.asarray(z, dtype=complex)
        pw = comp.powers(z[0], z[1])
        return {tuple(a): comp.derivative(tuple(a), pw) for a in alphas}

    def allclose(self, other: "PotentialPolynomial", atol: float = 1e-12) -> bool:
        mine, theirs = self.full_terms(), other.full_terms()
        return all(abs(mine.get(k, 0) - theirs.get(k, 0)) <= atol for k in set(mine) | set(theirs))


def multi_indices(order: int, min_order: int = 0):
    """All multi-degrees ``(p, q, s, t)`` with ``min_order <= p+q+s+t <= order``."""
    return [a for a in product(range(order + 1), repeat=4) if min_order <= sum(a) <= order]


@dataclass(frozen=True)
class PotentialJet:
    """Mixed partials of a potential up to ``order`` at a base point.

    ``derivs[(p, q, s, t)]`` is ``d^{p+q+s+t} F / dz1^p dz2^q dzb1^s dzb2^t``.
    """

    point: np.ndarray
    order: int
    derivs: Mapping

    def __getitem__(self, alpha) -> complex:
        return self.derivs[tuple(alpha)]

    def hermitian(self) -> np.ndarray:
        """Matrix ``h[k, l] = F_{k lbar}``."""
        return np.array(
            [[self[(1, 0, 1, 0)], self[(1, 0, 0, 1)]], [self[(0, 1, 1, 0)], self[(0, 1, 0, 1)]]]
        )


def eval_jet(potential: PotentialPolynomial, point, order: int = 4) -> PotentialJet:
    """All mixed partials of ``F`` up to ``order`` at ``point`` (exact)."""
    if order > MAX_JET_ORDER:
        raise UnsupportedOrderError(f"jets are available up to order {MAX_JET_ORDER}, got {order}")
    if order < 2:
        raise UnsupportedOrderError("jet order must be at least 2")
    point = np.asarray(point, dtype=complex).reshape(2)
    d = potential.derivatives(multi_indices(order), point)
    return PotentialJet(point, order, {k: complex(v) for k, v in d.items()})


# real basis vectors (Re z1, Im z1, Re z2, Im z2) written as complex 2-vectors
_REAL_BASIS = np.array([[1, 0], [1j, 0], [0, 1], [0, 1j]], dtype=complex)


def real_forms(h: np.ndarray):
    """Real 4x4 matrices of ``g`` and ``omega`` for a Hermitian ``h``."""
    P = np.einsum("ak,kl,bl->ab", _REAL_BASIS, h, _REAL_BASIS.conj())
    return 2 * P.real, -2 * P.imag


J_REAL = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
"""Complex structure in real coordinates: ``J e_x = e_y``, ``J e_y = -e_x``."""


def metric_at(jet: PotentialJet):
    """Hermitian matrix ``h``, real metric ``g`` and real Kähler form ``omega``.

    Raises
    ------
    DegenerateMetricError
        If ``h`` is not positive definite.
    """
    h = jet.hermitian()
    h = 0.5 * (h + h.conj().T)
    if np.linalg.eigvalsh(h).min() <= 0:
        raise DegenerateMetricError(f"metric not positive definite at {jet.point}")
    g, omega = real_forms(h)
    return h, g, omega


def _check_unitary(U):
    U = np.asarray(U, dtype=complex)
    if U.shape != (2, 2) or np.abs(U.conj().T @ U - np.eye(2)).max() > UNITARY_TOL:
        raise InvalidMotionError("motion matrix is not unitary to 1e-12")
    return U


def _poly_mul(p: Mapping, q: Mapping) -> dict:
    out: dict = defaultdict(complex)
    for ka, va in p.items():
        for kb, vb in q.items():
            out[(ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2], ka[3] + kb[3])] += va * vb
    return out


def _compose(terms: Mapping, U, tau) -> dict:
    if not terms:
        return {}
    w = [
        {(1, 0, 0, 0): U[0, 0], (0, 1, 0, 0): U[0, 1], (0, 0, 0, 0): tau[0]},
        {(1, 0, 0, 0): U[1, 0], (0, 1, 0, 0): U[1, 1], (0, 0, 0, 0): tau[1]},
    ]
    w += [{conj_index(k): np.conj(v) for k, v in wi.items()} for wi in w]
    D = max(max(k) for k in terms)
    pows = []
    for wi in w:
        seq = [{(0, 0, 0, 0): 1.0 + 0j}]
        for _ in range(D):
            seq.append(_poly_mul(seq[-1], wi))
        pows.append(seq)
    out: dict = defaultdict(complex)
    for (a, b, c, d), kappa in terms.items():
        prod_ = _poly_mul(_poly_mul(pows[0][a], pows[1][b]), _poly_mul(pows[2][c], pows[3][d]))
        for k, v in prod_.items():
            out[k] += kappa * v
    return symmetrize(out)


def apply_motion(potential: PotentialPolynomial, U, tau) -> PotentialPolynomial:
    """Pull a potential back by the motion ``z -> U z + tau`` (exact composition)."""
    U = _check_unitary(U)
    tau = np.asarray(tau, dtype=complex).reshape(2)
    base = _compose(potential.base, U, tau)
    hat = _compose(potential.terms, U, tau)
    normal = potential.normal_form and not np.any(tau) and bool(hat)
    return PotentialPolynomial(hat, rho=potential.rho, base=base, normal_form=normal)


def rescale_potential(potential: PotentialPolynomial, rho: float) -> PotentialPolynomial:
    """Blow coordinates up by ``1/rho``: ``F(z) -> F(rho z) / rho**2``.

    Degree-``d`` perturbation terms pick up ``rho**(d-4)`` and the attached scale is
    multiplied by ``rho``; degree-``d`` base terms pick up ``rho**(d-2)``.
    """
    rho = float(rho)
    if rho <= 0:
        raise ValueError("rescaling factor must be positive")
    hat = {k: v * rho ** (sum(k) - 4) for k, v in potential.terms.items()}
    base = {k: v * rho ** (sum(k) - 2) for k, v in potential.base.items()}
    return PotentialPolynomial(
        hat, rho=potential.rho * rho, base=base, normal_form=potential.normal_form
    )


@dataclass(frozen=True)
class CurvatureData:
    """Complexified curvature ``R[k, l, m, n] = R_{k lbar m nbar}`` and its trace."""

    R: np.ndarray
    ricci: np.ndarray


_ALPHA = {}


def _alpha(hol: Sequence[int], anti: Sequence[int]):
    key = (tuple(hol), tuple(anti))
    if key not in _ALPHA:
        a = [0, 0, 0, 0]
        for i in hol:
            a[i] += 1
        for i in anti:
            a[2 + i] += 1
        _ALPHA[key] = tuple(a)
    return _ALPHA[key]


def complex_curvature(potential: PotentialPolynomial, point, normalized: bool = False) -> CurvatureData:
    """Complexified curvature of the metric of ``F`` at ``point``.

    ``R_{k lbar m nbar} = F_{,k lbar m nbar} - sum g^{ubar v} F_{,k m ubar} F_{,lbar nbar v}``.

    With ``normalized=True`` the tensor is divided by ``rho**2`` (computed without
    division, so ``rho = 0`` returns the limiting fourth-derivative tensor of ``Fhat``).
    """
    point = np.asarray(point, dtype=complex).reshape(2)
    jet = eval_jet(potential, point, 2)
    h = metric_at(jet)[0]
    hinv = np.linalg.inv(h)
    alphas3 = {_alpha((k, m), (u,)) for k in range(2) for m in range(2) for u in range(2)}
    alphas4 = {_alpha((k, m), (l, n)) for k in range(2) for m in range(2) for l in range(2) for n in range(2)}
    hat = potential.derivatives(alphas3 | alphas4, point, part="hat")
    rho2 = potential.rho**2
    R = np.empty((2, 2, 2, 2), dtype=complex)
    for k, l, m, n in product(range(2), repeat=4):
        quart = hat[_alpha((k, m), (l, n))]
        corr = 0j
        for u, v in product(range(2), repeat=2):
            # g^{ubar v} is hinv[u, v]; F_{,lbar nbar v} = conj(F_{,l n vbar})
            corr += hat[_alpha((k, m), (u,))] * hinv[u, v] * np.conj(hat[_alpha((l, n), (v,))])
        R[k, l, m, n] = quart - rho2 * corr
    if not normalized:
        R = rho2 * R
    ricci = np.einsum("klmm->kl", R)
    return CurvatureData(R, ricci)


@dataclass(frozen=True)
class FrameParams:
    """Six chart coordinates of a unitary frame modulo diagonal matrices.

    ``tau[0:4]`` are the translations ``(Re tau1, Im tau1, Re tau2, Im tau2)``;
    ``tau[4], tau[5]`` rotate by ``exp(i tau5 K1 + i tau6 K2)``.
    """

    tau: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        t = np.asarray(self.tau, dtype=float).reshape(6).copy()
        t.setflags(write=False)
        object.__setattr__(self, "tau", t)

    @classmethod
    def identity(cls) -> "FrameParams":
        return cls(np.zeros(6))

    def motion(self):
        """``(U, shift)`` of the motion ``z -> U z + shift``."""
        t = self.tau
        U = expm(1j * (t[4] * K1 + t[5] * K2))
        return U, np.array([t[0] + 1j * t[1], t[2] + 1j * t[3]])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.tau))


def as_frame(frame) -> FrameParams:
    if frame is None:
        return FrameParams.identity()
    return frame if isinstance(frame, FrameParams) else FrameParams(frame)


def unit_motion(i: int, t: float):
    """The motion with ``tau_i = t`` and all other chart coordinates zero."""
    tau = np.zeros(6)
    tau[i] = t
    return FrameParams(tau).motion()


def compose_motions(outer, inner):
    """Motion ``outer o inner`` where each motion is ``(U, shift)``."""
    Uo, so = outer
    Ui, si = inner
    return Uo @ Ui, Uo @ si + so


def _radii(r):
    r1, r2 = (float(x) for x in r)
    return r1, r2


def frame_bracket(curv: CurvatureData, r) -> float:
    r1, r2 = _radii(r)
    return float((r1**2 * curv.ricci[0, 0] + r2**2 * curv.ricci[1, 1]).real)


def f_r(potential: PotentialPolynomial, frame, r) -> float:
    """Frame functional ``r1^2 Ric_{1 1bar} + r2^2 Ric_{2 2bar}`` at the moved origin.

    The potential is pulled back by the frame motion and the curvature is read
    at the origin of the result.  The value is normalised by ``rho**2`` so that
    it is the scale-free functional of ``Fhat``.
    """
    moved = apply_motion(potential, *as_frame(frame).motion())
    return frame_bracket(complex_curvature(moved, (0, 0), normalized=True), r)


def _f_r_motion(potential, motion, r):
    moved = apply_motion(potential, *motion)
    return frame_bracket(complex_curvature(moved, (0, 0), normalized=True), r)


def f_r_gradient(potential: PotentialPolynomial, frame, r, h: float = 1e-5) -> np.ndarray:
    """Derivative of ``f_r`` along the six unit motions applied at ``frame``.

    Central differences with step ``h``.  Direction ``i`` moves the frame by
    ``frame o mu_t^(i)`` (translation or rotation in the frame's own
    coordinates); at the identity frame these are the chart partials.
    """
    base = as_frame(frame).motion()
    grad = np.empty(6)
    for i in range(6):
        fp = _f_r_motion(potential, compose_motions(base, unit_motion(i, h)), r)
        fm = _f_r_motion(potential, compose_motions(base, unit_motion(i, -h)), r)
        grad[i] = (fp - fm) / (2 * h)
    return grad


def f_r_hessian(potential: PotentialPolynomial, frame, r, h: float = 1e-3) -> np.ndarray:
    """Finite-difference Hessian of ``f_r`` in the chart coordinates."""
    tau = as_frame(frame).tau
    f0 = f_r(potential, tau, r)
    H = np.empty((6, 6))
    E = np.eye(6) * h
    fp = [f_r(potential, tau + E[i], r) for i in range(6)]
    fm = [f_r(potential, tau - E[i], r) for i in range(6)]
    for i in range(6):
        H[i, i] = (fp[i] - 2 * f0 + fm[i]) / h**2
    for i in range(6):
        for j in range(i + 1, 6):
            # second difference along e_i + e_j, minus the two pure parts
            fpp = f_r(potential, tau + E[i] + E[j], r)
            fmm = f_r(potential, tau - E[i] - E[j], r)
            dd = (fpp - 2 * f0 + fmm) / h**2
            H[i, j] = H[j, i] = 0.5 * (dd - H[i, i] - H[j, j])
    return H


def load_potential(path, rho: float | None = None) -> PotentialPolynomial:
    """Read a potential file (YAML or JSON).

    Format::

        rho: 1.0
        terms:
          - {deg: [2, 0, 2, 0], re: 1.0, im: 0.0}

    Asymmetric coefficient sets are symmetrised with a warning when the defect
    exceeds 1e-12.
    """
    import yaml

    data = yaml.safe_load(Path(path).read_text())
    return potential_from_dict(data, rho=rho)


def potential_from_dict(data: Mapping, rho: float | None = None) -> PotentialPolynomial:
    terms: dict = defaultdict(complex)
    for entry in data.get("terms", []) or []:
        deg = tuple(int(x) for x in entry["deg"])
        terms[deg] += complex(float(entry.get("re", 0.0)), float(entry.get("im", 0.0)))
    terms = dict(terms)
    scale = max([1.0] + [abs(v) for v in terms.values()])
    defect = reality_defect(terms)
    if defect > REALITY_TOL * scale:
        warnings.warn(f"potential terms not conjugate symmetric (defect {defect:.3e}); symmetrising")
    terms = symmetrize(terms)
    r = float(data.get("rho", 1.0)) if rho is None else float(rho)
    return PotentialPolynomial(terms, rho=r, normal_form=bool(data.get("normal_form", True)))


def potential_to_dict(potential: PotentialPolynomial) -> dict:
    rows = [
        {"deg": list(k), "re": float(v.real), "im": float(v.imag)}
        for k, v in sorted(potential.terms.items())
    ]
    return {"rho": potential.rho, "normal_form": potential.normal_form, "terms": rows}


def save_potential(potential: PotentialPolynomial, path) -> None:
    import yaml

    Path(path).write_text(yaml.safe_dump(potential_to_dict(potential), sort_keys=False))
