"""Truncated q-series with tau-polynomial coefficients.

The coefficient ring: finite sums  sum_n p_n(tau) q^n  with q = exp(2 pi i tau),
n ranging over 0..nq_max and p_n complex polynomials.  Supports ring product,
d/dtau, termwise integration toward i*infinity, and pointwise evaluation on
the upper half plane.

Coefficients are complex128 by default.  An extended-precision mode (mpmath
numbers held in object arrays) exists for cross-checks; it is slower and only
meant for tests.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

TWO_PI_I = 2j * math.pi

# Internal guard: tau-polynomial degrees stay small in this artifact
# (2 + 3*depth with depth <= 4, plus headroom).  Blowing past this means a
# bug upstream, not a legitimate computation.
DEGREE_CAP = 16


class DivergentIntegralError(ValueError):
    pass


class DegreeOverflowError(RuntimeError):
    pass


def _two_pi_i(dps):
    if dps is None:
        return TWO_PI_I
    import mpmath

    with mpmath.workdps(dps):
        return mpmath.mpc(0, 2 * mpmath.pi)


def _trim(arr):
    """Drop exactly-zero trailing coefficients. Never thresholds."""
    n = len(arr)
    while n > 0 and arr[n - 1] == 0:
        n -= 1
    return arr[:n]


def _padd(a, b):
    if len(a) < len(b):
        a, b = b, a
    out = np.array(a, copy=True)
    out[: len(b)] += b
    return out


def _poly_mul_direct(a, b):
    out = np.zeros(len(a) + len(b) - 1, dtype=object)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _poly_der(arr):
    if len(arr) <= 1:
        return arr[:0]
    return arr[1:] * np.arange(1, len(arr))


def _poly_eval(arr, tau):
    # Horner; works for complex and mpmath entries alike
    acc = 0
    for c in arr[::-1]:
        acc = acc * tau + c
    return acc


class MixedExpansion:
    """Element of the truncated ring. terms: {q-exponent: ascending poly coeffs}."""

    __slots__ = ("nq_max", "terms", "dps")

    def __init__(self, nq_max, terms=None, dps=None):
        if nq_max < 0:
            raise ValueError("nq_max must be nonnegative")
        self.nq_max = int(nq_max)
        self.dps = dps
        self.terms = {}
        if terms:
            for n, poly in terms.items():
                n = int(n)
                if n < 0:
                    raise ValueError("negative q-exponents unsupported")
                if n > self.nq_max:
                    continue
                arr = _trim(np.array(poly, dtype=object if dps else complex))
                if len(arr):
                    self.terms[n] = arr
        self._check_degree()

    def _check_degree(self):
        d = self.degree()
        if d > DEGREE_CAP:
            raise DegreeOverflowError(f"tau-degree {d} exceeds cap {DEGREE_CAP}")

    # -- constructors ----------------------------------------------------

    @classmethod
    def zero(cls, nq_max, dps=None):
        return cls(nq_max, {}, dps=dps)

    @classmethod
    def one(cls, nq_max, dps=None):
        return cls(nq_max, {0: [1.0]}, dps=dps)

    @classmethod
    def from_polynomial(cls, coeffs, nq_max, dps=None):
        return cls(nq_max, {0: list(coeffs)}, dps=dps)

    @classmethod
    def from_q_coefficients(cls, seq, nq_max, dps=None):
        terms = {n: [c] for n, c in enumerate(seq) if n <= nq_max and c != 0}
        return cls(nq_max, terms, dps=dps)

    # -- basic queries ---------------------------------------------------

    def degree(self):
        return max((len(p) - 1 for p in self.terms.values()), default=-1)

    def is_zero(self):
        return not self.terms

    def coeff(self, n, j=0):
        """Coefficient of tau^j q^n."""
        p = self.terms.get(n)
        if p is None or j >= len(p):
            return 0j if self.dps is None else 0
        return p[j]

    def q0_polynomial(self):
        p = self.terms.get(0)
        if p is None:
            return np.zeros(0, dtype=complex)
        return np.array(p, copy=True)

    def coeff_norm(self):
        m = 0.0
        for p in self.terms.values():
            for c in p:
                m = max(m, abs(c))
        return float(m)

    def max_abs_diff(self, other):
        return (self - other).coeff_norm()

    def allclose(self, other, tol=1e-12):
        return self.max_abs_diff(other) <= tol

    def copy(self):
        return MixedExpansion(self.nq_max, self.terms, dps=self.dps)

    def __repr__(self):
        return f"MixedExpansion(nq_max={self.nq_max}, {len(self.terms)} q-terms, deg={self.degree()})"

    # -- ring operations -------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, MixedExpansion):
            return NotImplemented
        nq = min(self.nq_max, other.nq_max)
        dps = self.dps or other.dps
        out = {}
        for n in set(self.terms) | set(other.terms):
            if n > nq:
                continue
            a = self.terms.get(n)
            b = other.terms.get(n)
            out[n] = _padd(a, b) if (a is not None and b is not None) else (a if b is None else b)
        return MixedExpansion(nq, out, dps=dps)

    def __neg__(self):
        return MixedExpansion(self.nq_max, {n: -p for n, p in self.terms.items()}, dps=self.dps)

    def __sub__(self, other):
        return self + (-other)

    def __rmul__(self, scalar):
        return MixedExpansion(
            self.nq_max, {n: p * scalar for n, p in self.terms.items()}, dps=self.dps
        )

    def __mul__(self, other):
        if isinstance(other, MixedExpansion):
            return multiply(self, other)
        return self.__rmul__(other)

    # -- calculus --------------------------------------------------------

    def differentiate(self):
        w = _two_pi_i(self.dps)
        out = {}
        for n, p in self.terms.items():
            arr = _poly_der(p)
            if n:
                arr = _padd(arr, (w * n) * p)
            arr = _trim(arr)
            if len(arr):
                out[n] = arr
        return MixedExpansion(self.nq_max, out, dps=self.dps)

    def integrate_to_cusp(self):
        """int_tau^{i oo} of this, termwise.  Divergent when a q^0 part is present."""
        if 0 in self.terms:
            raise DivergentIntegralError("nonzero q^0 coefficient: integral to the cusp diverges")
        w = _two_pi_i(self.dps)
        out = {}
        for n, p in self.terms.items():
            # E_j := int_tau^{ioo} z^j e^{2 pi i n z} dz obeys
            #   E_0 = -q^n/(2 pi i n),  E_j = -tau^j q^n/(2 pi i n) - (j/(2 pi i n)) E_{j-1}
            wn = w * n
            deg = len(p) - 1
            ej = np.zeros(1, dtype=object if self.dps else complex)
            ej[0] = -1 / wn
            acc = p[0] * ej
            for j in range(1, deg + 1):
                nxt = np.zeros(j + 1, dtype=object if self.dps else complex)
                nxt[j] = -1 / wn
                nxt = _padd(nxt, (-j / wn) * ej)
                ej = nxt
                if p[j] != 0:
                    acc = _padd(acc, p[j] * ej)
            acc = _trim(acc)
            if len(acc):
                out[n] = acc
        return MixedExpansion(self.nq_max, out, dps=self.dps)

    # -- evaluation ------------------------------------------------------

    def evaluate(self, tau):
        if _imag(tau) <= 0:
            raise ValueError("evaluation requires Im(tau) > 0")
        if self.dps is not None:
            import mpmath

            with mpmath.workdps(self.dps):
                t = mpmath.mpc(tau)
                q = mpmath.exp(mpmath.mpc(0, 2 * mpmath.pi) * t)
                return sum(_poly_eval(p, t) * q**n for n, p in sorted(self.terms.items()))
        tau = complex(tau)
        q = cmath.exp(TWO_PI_I * tau)
        total = 0j
        for n, p in self.terms.items():
            total += _poly_eval(p, tau) * q**n
        return total

    def truncation_bound(self, tau):
        """|q|^(nq_max+1) times the largest coefficient magnitude."""
        aq = abs(cmath.exp(TWO_PI_I * complex(tau)))
        return aq ** (self.nq_max + 1) * max(self.coeff_norm(), 1.0)

    # -- precision conversion ---------------------------------------------

    def to_mp(self, dps):
        import mpmath

        with mpmath.workdps(dps):
            terms = {
                n: [mpmath.mpc(complex(c)) for c in p] for n, p in self.terms.items()
            }
        return MixedExpansion(self.nq_max, terms, dps=dps)

    def to_float(self):
        terms = {n: [complex(c) for c in p] for n, p in self.terms.items()}
        return MixedExpansion(self.nq_max, terms, dps=None)

    # -- serialization ----------------------------------------------------

    def to_json_dict(self):
        return {
            "nq": self.nq_max,
            "terms": [
                [n, [[float(c.real), float(c.imag)] for c in map(complex, p)]]
                for n, p in sorted(self.terms.items())
            ],
        }

    @classmethod
    def from_json_dict(cls, data):
        terms = {
            int(n): [complex(re, im) for re, im in poly] for n, poly in data["terms"]
        }
        return cls(int(data["nq"]), terms)


def _imag(tau):
    try:
        return tau.imag
    except AttributeError:
        return complex(tau).imag


# -- module-level operations (the public surface) -------------------------


def multiply(F, G):
    """Ring product, truncated to min(nq_max)."""
    nq = min(F.nq_max, G.nq_max)
    dps = F.dps or G.dps
    if not F.terms or not G.terms:
        return MixedExpansion.zero(nq, dps=dps)
    if dps is None:
        return _multiply_dense(F, G, nq)
    out = {}
    for n1, p1 in F.terms.items():
        for n2, p2 in G.terms.items():
            n = n1 + n2
            if n > nq:
                continue
            prod = _poly_mul_direct(p1, p2)
            out[n] = _padd(out[n], prod) if n in out else prod
    return MixedExpansion(nq, out, dps=dps)


def _multiply_dense(F, G, nq):
    # Convolve along q per pair of tau-degrees; np.convolve is direct (no FFT),
    # so zero structure is exact -- integrate_to_cusp relies on that.
    dF, dG = F.degree(), G.degree()
    A = np.zeros((min(F.nq_max, nq) + 1, dF + 1), dtype=complex)
    for n, p in F.terms.items():
        if n <= nq:
            A[n, : len(p)] = p
    B = np.zeros((min(G.nq_max, nq) + 1, dG + 1), dtype=complex)
    for n, p in G.terms.items():
        if n <= nq:
            B[n, : len(p)] = p
    acc = np.zeros((nq + 1, dF + dG + 1), dtype=complex)
    for j1 in range(dF + 1):
        col = A[:, j1]
        if not col.any():
            continue
        for j2 in range(dG + 1):
            colB = B[:, j2]
            if not colB.any():
                continue
            acc[:, j1 + j2] += np.convolve(col, colB)[: nq + 1]
    terms = {}
    for n in range(nq + 1):
        row = _trim(acc[n])
        if len(row):
            terms[n] = row
    return MixedExpansion(nq, terms)


def differentiate(F):
    return F.differentiate()


def integrate_to_cusp(F):
    return F.integrate_to_cusp()


def evaluate(F, tau):
    return F.evaluate(tau)


def monomial(n, poly, nq_max, dps=None):
    """p(tau) * q^n as a MixedExpansion."""
    return MixedExpansion(nq_max, {n: list(poly)}, dps=dps)
