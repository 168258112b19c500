"""Real solid harmonic polynomials and their derivatives.

A real solid harmonic of degree l and order m is a degree-l harmonic
polynomial in (x, y, z).  Polynomials here are unnormalized: rational
coefficients are reduced to content 1 and the sign is fixed so that the
monomial with the highest power of z (ties broken lexicographically in
(x, y, z) exponents) has a positive coefficient.  With this convention the
(2, 2, sine) harmonic is literally x*y.
"""

from functools import lru_cache

import numpy as np
import sympy as sp

_x, _y, _z = sp.symbols("x y z", real=True)

COSINE = "cosine"
SINE = "sine"


def _solid_harmonic_expr(degree, order, parity):
    """Cartesian polynomial for the real solid harmonic (degree, order, parity)."""
    l, m = degree, order
    if l < 1:
        raise ValueError("degree must be >= 1")
    if not 0 <= m <= l:
        raise ValueError(f"order must satisfy 0 <= order <= degree, got {m}")
    if parity not in (COSINE, SINE):
        raise ValueError(f"parity must be '{COSINE}' or '{SINE}'")
    if m == 0 and parity == SINE:
        raise ValueError("sine harmonic of order 0 is identically zero")

    u = sp.Symbol("u")
    # m-th derivative of the Legendre polynomial; r^(l-m) * g(z/r) is a
    # polynomial in z and r^2 because g has definite parity.
    g = sp.diff(sp.legendre(l, u), u, m)
    r2 = _x**2 + _y**2 + _z**2
    radial = sp.S.Zero
    for k, coeff in enumerate(sp.Poly(g, u).all_coeffs()[::-1]):
        if coeff == 0:
            continue
        # degree of g is l - m; remaining even power of r
        radial += coeff * _z**k * r2 ** sp.Rational(l - m - k, 2)
    # azimuthal factor: Re/Im of (x + i y)^m
    azim = sp.expand((_x + sp.I * _y) ** m)
    azim = sp.re(azim) if parity == COSINE else sp.im(azim)
    expr = sp.expand(radial * azim)

    poly = sp.Poly(expr, _x, _y, _z)
    coeffs = poly.coeffs()
    content = sp.gcd_list(coeffs)
    poly = sp.Poly(poly.as_expr() / content, _x, _y, _z)
    # sign convention: positive coefficient on the monomial with maximal
    # z power, ties broken lexicographically in (x, y) exponents
    lead = max(poly.monoms(), key=lambda mon: (mon[2], mon[0], mon[1]))
    if poly.coeff_monomial(sp.prod(s**e for s, e in zip((_x, _y, _z), lead))) < 0:
        poly = sp.Poly(-poly.as_expr(), _x, _y, _z)
    return poly.as_expr()


@lru_cache(maxsize=None)
def term_polynomial(degree, order, parity):
    """Sympy expression of the normalized real solid harmonic."""
    return _solid_harmonic_expr(degree, order, parity)


@lru_cache(maxsize=None)
def term_parities(degree, order, parity):
    """(sx, sz): parity of the polynomial under x -> -x and z -> -z (+1/-1)."""
    expr = term_polynomial(degree, order, parity)
    out = []
    for sym in (_x, _z):
        flipped = sp.expand(expr.subs(sym, -sym))
        if sp.simplify(flipped - expr) == 0:
            out.append(+1)
        elif sp.simplify(flipped + expr) == 0:
            out.append(-1)
        else:  # pragma: no cover - solid harmonics always have definite parity
            out.append(0)
    return tuple(out)


@lru_cache(maxsize=None)
def term_functions(degree, order, parity):
    """Numpy callables (value, grad, hess, third) for one harmonic term.

    grad(r) -> (3,), hess(r) -> (3, 3), third(r) -> (3, 3, 3) with r a
    length-3 array-like.  All derivatives are exact polynomial derivatives.
    """
    expr = term_polynomial(degree, order, parity)
    syms = (_x, _y, _z)
    grad = [sp.diff(expr, s) for s in syms]
    hess = [[sp.diff(g, s) for s in syms] for g in grad]
    third = [[[sp.diff(h, s) for s in syms] for h in row] for row in hess]

    f_val = sp.lambdify(syms, expr, modules="numpy")
    f_grad = sp.lambdify(syms, grad, modules="numpy")
    f_hess = sp.lambdify(syms, hess, modules="numpy")
    f_third = sp.lambdify(syms, third, modules="numpy")

    def value(r):
        return float(f_val(r[0], r[1], r[2]))

    def gradient(r):
        return np.asarray(f_grad(r[0], r[1], r[2]), dtype=float)

    def hessian(r):
        return np.asarray(f_hess(r[0], r[1], r[2]), dtype=float)

    def third_deriv(r):
        return np.asarray(f_third(r[0], r[1], r[2]), dtype=float)

    return value, gradient, hessian, third_deriv
