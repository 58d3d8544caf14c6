"""Adaptive quadrature along vertical paths in the upper half plane.

Independent numeric route for integrals to the cusp i*infinity.  Everything
here works on plain callables so it can cross-check the closed-form series
machinery without sharing code with it.
"""

from __future__ import annotations

import cmath
import math

from scipy.integrate import quad

TWO_PI = 2.0 * math.pi


def vertical_integral(f, tau, tail=None, epsabs=1e-12, limit=400):
    """int_tau^{i oo} f(z) dz along z = tau + i t.

    The integrand is assumed to decay like exp(-2 pi t) or faster (cusp
    forms); the path is cut once the decay factor drops below 1e-24 relative.
    """
    if tail is None:
        tail = max(10.0, 24.0 * math.log(10.0) / TWO_PI - tau.imag)

    def g(t):
        return f(tau + 1j * t)

    val, _err = quad(g, 0.0, tail, epsabs=epsabs, limit=limit, complex_func=True)
    return 1j * val


def functional_value_quad(forms, powers, tau, epsabs=1e-11):
    """Iterated integral int_tau^{ioo} h1(z) z^{n1} (next level)(z) dz by nested
    adaptive quadrature.  forms: list of callables z -> h_i(z)."""
    if not forms:
        return 1.0 + 0j
    if len(forms) == 1:
        h, n = forms[0], powers[0]
        return vertical_integral(lambda z: h(z) * z**n, tau, epsabs=epsabs)

    h, n = forms[0], powers[0]
    inner_eps = max(epsabs * 0.1, 1e-12)

    def integrand(z):
        return h(z) * z**n * functional_value_quad(forms[1:], powers[1:], z, inner_eps)

    return vertical_integral(integrand, tau, epsabs=epsabs)


def derivative_fd(f, tau, step=1e-5):
    """Central finite difference of a callable on the upper half plane."""
    return (f(tau + step) - f(tau - step)) / (2.0 * step)


def qpow(tau, n):
    return cmath.exp(2j * math.pi * n * tau)
