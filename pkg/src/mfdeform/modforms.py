"""Cusp forms and companions.

Eta-product q-expansions (exact integer arithmetic), the level-N weight-2
Eisenstein combination, holomorphic Eichler integrals, period polynomials by
least-squares fit, and the specific bilinear combination -2 h' ei +- 4 h ei'
driving the second-order deformation, with its sign adjudicated numerically
(the two candidate signs are one integration-by-parts step apart; exactly one
makes the induced second-order cocycle polynomial).
"""

from __future__ import annotations

import numpy as np

from . import qpoly
from .groups import GroupElement, IM_FLOOR, adjust_tau, feasible_y_interval
from .qpoly import MixedExpansion

DEFAULT_NQ = 128


class CuspForm:
    """q-expansion a_1 q + a_2 q^2 + ... with a_0 = 0."""

    def __init__(self, weight, level, coefficients, label=""):
        if weight <= 0 or weight % 2:
            raise ValueError("weight must be a positive even integer")
        if level < 1:
            raise ValueError("level must be positive")
        self.weight = int(weight)
        self.level = int(level)
        an = np.zeros(len(coefficients) + 1, dtype=complex)
        an[1:] = coefficients
        if not np.all(np.isfinite(an.view(float))):
            raise ValueError("coefficients must be finite")
        self.an = an
        self.label = label
        self._cache = {}

    @property
    def nq_max(self):
        return len(self.an) - 1

    def coefficient(self, n):
        return self.an[n] if 0 <= n <= self.nq_max else 0j

    def is_zero(self):
        return not self.an.any()

    def expansion(self, nq_max=None):
        nq = self.nq_max if nq_max is None else min(nq_max, self.nq_max)
        key = ("exp", nq)
        if key not in self._cache:
            self._cache[key] = MixedExpansion.from_q_coefficients(self.an[: nq + 1], nq)
        return self._cache[key]

    def __repr__(self):
        return f"CuspForm(weight={self.weight}, level={self.level}, label={self.label!r})"


def eta_product(factors, nq_max):
    """q-expansion of prod eta(m tau)^e as exact integers.

    eta(tau) = q^{1/24} prod_{n>=1} (1 - q^n).  The total leading power
    sum(m*e)/24 must be integral.
    """
    factors = [(int(m), int(e)) for m, e in factors]
    for m, e in factors:
        if m < 1 or e < 1:
            raise ValueError("multipliers and exponents must be positive")
    total = sum(m * e for m, e in factors)
    if total % 24:
        raise ValueError(f"leading power {total}/24 is fractional")
    lead = total // 24
    length = nq_max - lead
    if length < 0:
        return [0] * (nq_max + 1)
    coeffs = [0] * (length + 1)
    coeffs[0] = 1
    for m, e in factors:
        for nm in range(m, length + 1, m):
            for _ in range(e):
                for k in range(length, nm - 1, -1):
                    coeffs[k] -= coeffs[k - nm]
    out = [0] * (nq_max + 1)
    for k, c in enumerate(coeffs):
        out[k + lead] = c
    return out


def cusp_form_from_eta(factors, level, nq_max, label=""):
    coeffs = eta_product(factors, nq_max)
    if coeffs[0] != 0:
        raise ValueError("eta product is not cuspidal (constant term present)")
    weight = sum(e for _m, e in factors)
    if weight % 2:
        raise ValueError("half-integral weight not supported")
    return CuspForm(weight // 2, level, coeffs[1:], label=label)


def default_cusp_form(nq_max=DEFAULT_NQ):
    return cusp_form_from_eta([(1, 4), (5, 4)], level=5, nq_max=nq_max, label="eta(1)^4 eta(5)^4")


def eisenstein2_level(N, nq_max):
    """E2(tau) - N E2(N tau), holomorphic of weight 2 for Gamma_0(N)."""
    if N < 2:
        raise ValueError("N >= 2 required")
    coeffs = np.zeros(nq_max + 1, dtype=complex)
    coeffs[0] = 1 - N
    for n in range(1, nq_max + 1):
        s1 = _sigma1(n)
        coeffs[n] -= 24 * s1
        if N * n <= nq_max:
            coeffs[N * n] += 24 * N * s1
    return MixedExpansion.from_q_coefficients(coeffs, nq_max)


def _sigma1(n):
    return sum(d for d in range(1, n + 1) if n % d == 0)


# -- Eichler integral and period polynomials --------------------------------


def eichler_integral(h, nq_max=None):
    """ei(tau) = int_tau^{ioo} h(z) (tau - z)^2 dz, expanded as
    tau^2 I0 - 2 tau I1 + I2 with I_j = int h(z) z^j dz."""
    if not isinstance(h, CuspForm):
        raise TypeError("eichler_integral needs a CuspForm (regularisation out of scope)")
    nq = h.nq_max if nq_max is None else nq_max
    key = ("eichler", nq)
    if key in h._cache:
        return h._cache[key]
    base = h.expansion(nq)
    parts = []
    for j in range(3):
        zj = MixedExpansion.from_polynomial([0] * j + [1], nq)
        parts.append(qpoly.integrate_to_cusp(qpoly.multiply(base, zj)))
    tau2 = MixedExpansion.from_polynomial([0, 0, 1], nq)
    tau1 = MixedExpansion.from_polynomial([0, -2], nq)
    out = qpoly.multiply(tau2, parts[0]) + qpoly.multiply(tau1, parts[1]) + parts[2]
    h._cache[key] = out
    return out


def fit_quadratic(taus, values):
    """Least-squares quadratic through (tau, value) pairs.

    Returns (ascending coefficients, max abs residual at the samples)."""
    taus = np.asarray(taus, dtype=complex)
    vm = np.vander(taus, 3, increasing=True)
    sol, *_ = np.linalg.lstsq(vm, np.asarray(values, dtype=complex), rcond=None)
    residual = float(np.max(np.abs(vm @ sol - values)))
    return sol, residual


def fit_samples(gamma, count=8, floor=IM_FLOOR):
    """Deterministic evaluation points, feasible for gamma, spread for fitting."""
    if gamma.c == 0:
        return [complex(-0.25 + 0.07 * k, 0.55 + 0.09 * k) for k in range(count)]
    x = -gamma.d / gamma.c
    window = feasible_y_interval(gamma, x, floor)
    if window is None:
        raise ValueError(f"no feasible evaluation window for {gamma}")
    lo, hi = window
    lo, hi = lo + 0.04 * (hi - lo), hi - 0.08 * (hi - lo)
    return [complex(x, lo + (hi - lo) * k / max(count - 1, 1)) for k in range(count)]


def period_polynomial(h, gamma, tau_samples=None, tol=None, nq_max=None):
    """Quadratic fit of tau -> j(tau)^2 ei(gamma tau) - ei(tau).

    Returns (coefficients ascending, fit residual).  With tol given, a
    residual above it raises (non-polynomial: truncation/precision failure).
    """
    if tau_samples is None:
        tau_samples = fit_samples(gamma)
    if len(tau_samples) < 6:
        raise ValueError("need at least 6 tau samples for a certified quadratic fit")
    ei = eichler_integral(h, nq_max)
    vals = []
    for t in tau_samples:
        gt = gamma.mobius(t)
        if t.imag < IM_FLOOR - 1e-12 or gt.imag < IM_FLOOR - 1e-12:
            raise ValueError(f"sample {t} or its image {gt} below the Im floor")
        vals.append(gamma.j(t) ** 2 * ei.evaluate(gt) - ei.evaluate(t))
    coeffs, residual = fit_quadratic(tau_samples, vals)
    if tol is not None and residual > tol:
        raise ValueError(
            f"period fit residual {residual:.3e} exceeds {tol:.1e}: not a polynomial "
            "at this truncation/precision"
        )
    return coeffs, residual


# -- second-order bilinear combination ---------------------------------------


def rankin_cohen_combination(h, sign=None, nq_max=None):
    """-2 h' ei + sign * 4 h ei' in the coefficient ring.

    sign=None uses the numerically adjudicated value for this form; pass +1
    or -1 explicitly to force a convention.
    """
    if h.weight != 4:
        raise ValueError("combination defined for weight-4 forms")
    if sign is None:
        sign = adjudicate_rc_sign(h, nq_max=nq_max)[0]
    nq = h.nq_max if nq_max is None else nq_max
    base = h.expansion(nq)
    ei = eichler_integral(h, nq)
    return (-2.0) * qpoly.multiply(qpoly.differentiate(base), ei) + (4.0 * sign) * qpoly.multiply(
        base, qpoly.differentiate(ei)
    )


def second_order_integrand_weighted(h, sign, nq_max=None):
    """f_sign(tau) = -int_tau^{ioo} RC_sign(z) (tau-z)^2 dz."""
    nq = h.nq_max if nq_max is None else nq_max
    rc = rankin_cohen_combination(h, sign=sign, nq_max=nq)
    parts = []
    for j in range(3):
        zj = MixedExpansion.from_polynomial([0] * j + [1], nq)
        parts.append(qpoly.integrate_to_cusp(qpoly.multiply(rc, zj)))
    tau2 = MixedExpansion.from_polynomial([0, 0, -1], nq)
    tau1 = MixedExpansion.from_polynomial([0, 2], nq)
    return qpoly.multiply(tau2, parts[0]) + qpoly.multiply(tau1, parts[1]) + (-1.0) * parts[2]


def second_order_polynomial_values(h, f, gamma, taus, nq_max=None):
    """Pointwise values of j^2 f(gamma tau) - f(tau) - 2 (p ei' - p' ei)(tau)."""
    nq = h.nq_max if nq_max is None else nq_max
    ei = eichler_integral(h, nq)
    dei = qpoly.differentiate(ei)
    pc, _ = period_polynomial(h, gamma, nq_max=nq)
    dpc = np.polyder(np.asarray(pc)[::-1])[::-1]
    vals = []
    for t in taus:
        gt = gamma.mobius(t)
        pv = np.polyval(np.asarray(pc)[::-1], t)
        dpv = np.polyval(dpc[::-1], t) if len(dpc) else 0j
        val = (
            gamma.j(t) ** 2 * f.evaluate(gt)
            - f.evaluate(t)
            - 2.0 * (pv * dei.evaluate(t) - dpv * ei.evaluate(t))
        )
        vals.append(val)
    return vals


def adjudicate_rc_sign(h, gammas=None, nq_max=None):
    """Pick the sign in -2 h' ei +- 4 h ei' making the second-order cocycle
    candidate an actual quadratic polynomial.  Returns (sign, fit report)."""
    nq = h.nq_max if nq_max is None else nq_max
    key = ("rc_sign", nq)
    use_cache = gammas is None
    if use_cache and key in h._cache:
        return h._cache[key]
    if gammas is None:
        gammas = [GroupElement(1, 0, h.level, 1), GroupElement(1 + h.level, 1, h.level, 1)]
    report = {}
    for sign in (+1, -1):
        f = second_order_integrand_weighted(h, sign, nq)
        worst = 0.0
        for g in gammas:
            taus = fit_samples(g, count=9)
            vals = second_order_polynomial_values(h, f, g, taus, nq)
            _c, res = fit_quadratic(taus, vals)
            worst = max(worst, res)
        report[sign] = worst
    winner = min(report, key=report.get)
    if not report[winner] < 1e-4 * max(report[-winner], 1e-30):
        raise ValueError(f"sign adjudication inconclusive: residuals {report}")
    out = (winner, report)
    if use_cache:
        h._cache[key] = out
    return out
