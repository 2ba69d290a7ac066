"""Reference potentials used by the tests, the acceptance suite and the CLI."""

from __future__ import annotations

import numpy as np

from .kahler_potential import PotentialPolynomial, symmetrize

NONDEGENERATE_RADII = (0.6, 0.8)
DEGENERATE_RADII = (1 / np.sqrt(2), 1 / np.sqrt(2))


def toric_quartic() -> PotentialPolynomial:
    """``|z1|^2 |z2|^2 + |z1|^4 + |z2|^4``.

    Invariant under the diagonal torus action, so the Clifford-type torus is
    exactly stationary for every ``rho`` and the residual at ``(0, 0)``
    vanishes identically.
    """
    return PotentialPolynomial({(1, 1, 1, 1): 1.0, (2, 0, 2, 0): 1.0, (0, 2, 0, 2): 1.0})


def degenerate_fixture():
    """Toric quartic at equal radii: the frame functional has a flat direction.

    Returns ``(potential, r)``.
    """
    return toric_quartic(), DEGENERATE_RADII


def nondegenerate_fixture():
    """Potential with a nondegenerate critical point of ``f_r`` at the identity frame.

    ``|z1|^2|z2|^2 + |z1|^4 + 2|z2|^4 + 0.3((z1 zb2)^2 + cc)
    + 0.5(|z1|^6 + |z2|^6) + (z1^3 zb2^2 + cc)`` at ``r = (0.6, 0.8)``.

    Distinct Ricci eigenvalues and ``r1 != r2`` make the rotational Hessian
    nonzero; the sextic terms supply the translational Hessian; the quintic
    term leaves ``f_r`` critical at the identity but moves the zero of ``G``
    by ``O(rho^2)``.  Returns ``(potential, r)``.
    """
    terms = {
        (1, 1, 1, 1): 1.0,
        (2, 0, 2, 0): 1.0,
        (0, 2, 0, 2): 2.0,
        (2, 0, 0, 2): 0.3,
        (0, 2, 2, 0): 0.3,
        (3, 0, 3, 0): 0.5,
        (0, 3, 0, 3): 0.5,
        (3, 0, 0, 2): 1.0,
        (0, 2, 3, 0): 1.0,
    }
    return PotentialPolynomial(terms), NONDEGENERATE_RADII


def random_potential(rng: np.random.Generator, degrees=(4,), scale: float = 1.0) -> PotentialPolynomial:
    """Random real polynomial perturbation with monomials of the given total degrees."""
    terms = {}
    for d in degrees:
        for a in range(d + 1):
            for b in range(d + 1 - a):
                for c in range(d + 1 - a - b):
                    e = d - a - b - c
                    terms[(a, b, c, e)] = scale * complex(rng.normal(), rng.normal())
    return PotentialPolynomial(symmetrize(terms))
