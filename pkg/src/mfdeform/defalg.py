"""Lie algebras of first-order differential operators, the weight-shift map,
truncated rho-series operator algebra with exp/log/BCH, slash actions, the
monoid of letterwise rescalings, and the linear coboundary solver.

Operators act on q-expansions with tau-polynomial coefficients, so every
coefficient below is a MixedExpansion.  The restricted elements ("2p d_tau +
k p'" with p a quadratic polynomial) admit exact polynomial slash formulas;
everything else is handled pointwise.
"""

import itertools
import math

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import qpoly
from .groups import IM_FLOOR
from .qpoly import MixedExpansion

RHO_MAX_SUPPORTED = 4


class LieClosureError(RuntimeError):
    """A series that should have had Lie-valued (first-order) coefficients
    did not, beyond the numerical junk threshold."""


# -- Lie elements -------------------------------------------------------------


class LieElement:
    """f d_tau + g at a fixed weight.  poly_restricted marks the shape
    2p d_tau + k p' with p a quadratic tau-polynomial."""

    __slots__ = ("weight", "coeff_d", "coeff_s", "poly_restricted")

    def __init__(self, weight, coeff_d, coeff_s, poly_restricted=False):
        self.weight = int(weight)
        self.coeff_d = coeff_d
        self.coeff_s = coeff_s
        self.poly_restricted = bool(poly_restricted)
        if self.poly_restricted:
            p = self.quadratic()
            expected = _poly_expansion(self.weight * npoly.polyder(p), coeff_d.nq_max)
            if self.coeff_s.max_abs_diff(expected) > 1e-9 * (1.0 + _norm(p)):
                raise ValueError("poly_restricted element must have scalar part k p'")

    @classmethod
    def restricted(cls, weight, p_coeffs, nq_max):
        p = np.zeros(3, dtype=complex)
        arr = np.asarray(p_coeffs, dtype=complex)
        if arr.size > 3:
            raise ValueError("restricted elements take quadratic polynomials")
        p[: arr.size] = arr
        d = _poly_expansion(2.0 * p, nq_max)
        s = _poly_expansion(weight * npoly.polyder(p), nq_max)
        return cls(weight, d, s, poly_restricted=True)

    def quadratic(self):
        """Ascending coefficients of p for the restricted shape 2p d_tau + k p'."""
        poly = self.coeff_d.q0_polynomial()
        rest = self.coeff_d - _poly_expansion(poly, self.coeff_d.nq_max)
        if not rest.is_zero() or len(poly) > 3:
            raise ValueError("d_tau coefficient is not a quadratic tau-polynomial")
        out = np.zeros(3, dtype=complex)
        out[: len(poly)] = poly / 2.0
        return out

    @property
    def nq_max(self):
        return self.coeff_d.nq_max

    def __add__(self, other):
        if self.weight != other.weight:
            raise ValueError("weight mismatch")
        return LieElement(
            self.weight,
            self.coeff_d + other.coeff_d,
            self.coeff_s + other.coeff_s,
            poly_restricted=self.poly_restricted and other.poly_restricted,
        )

    def __rmul__(self, scalar):
        return LieElement(
            self.weight,
            scalar * self.coeff_d,
            scalar * self.coeff_s,
            poly_restricted=self.poly_restricted,
        )

    def __neg__(self):
        return self.__rmul__(-1.0)

    def __sub__(self, other):
        return self + other.__rmul__(-1.0)

    def max_abs_diff(self, other):
        return max(
            self.coeff_d.max_abs_diff(other.coeff_d),
            self.coeff_s.max_abs_diff(other.coeff_s),
        )

    def as_diffop(self):
        op = DiffOp(self.nq_max)
        op.coeffs = {}
        if not self.coeff_d.is_zero():
            op.coeffs[1] = self.coeff_d
        if not self.coeff_s.is_zero():
            op.coeffs[0] = self.coeff_s
        return op

    def __repr__(self):
        tag = "restricted" if self.poly_restricted else "general"
        return f"LieElement(weight={self.weight}, {tag})"


def _poly_expansion(coeffs, nq_max):
    return MixedExpansion.from_polynomial(np.asarray(coeffs, dtype=complex), nq_max)


def _norm(arr):
    return float(np.max(np.abs(arr))) if len(arr) else 0.0


def bracket(x, y):
    """[f d + g, r d + s] = (f r' - r f') d + (f s' - r g')."""
    if x.weight != y.weight:
        raise ValueError("bracket needs equal weights")
    if x.poly_restricted and y.poly_restricted:
        p, q = x.quadratic(), y.quadratic()
        raw = npoly.polymul(p, npoly.polyder(q)) - npoly.polymul(npoly.polyder(p), q)
        # the cubic term cancels identically for quadratics
        assert _norm(raw[3:]) == 0.0
        return LieElement.restricted(x.weight, 2.0 * raw[:3], x.nq_max)
    d = qpoly.multiply(x.coeff_d, y.coeff_d.differentiate()) - qpoly.multiply(
        y.coeff_d, x.coeff_d.differentiate()
    )
    s = qpoly.multiply(x.coeff_d, y.coeff_s.differentiate()) - qpoly.multiply(
        y.coeff_d, x.coeff_s.differentiate()
    )
    return LieElement(x.weight, d, s)


def slash_poly(a, gamma):
    """Exact right slash action on the restricted shape.  The quadratic
    transforms by p(x) -> p(gamma x) (c x + d)^2 expanded in monomials; the
    scalar part follows as k q'."""
    if not a.poly_restricted:
        raise ValueError("slash_poly needs a poly_restricted element")
    p = a.quadratic()
    q = _slash_quadratic(p, gamma)
    return LieElement.restricted(a.weight, q, a.nq_max)


def _slash_quadratic(p, gamma):
    return slash_matrix_quadratic(gamma) @ np.asarray(p, dtype=complex)


def slash_matrix_quadratic(gamma):
    """Matrix of the right action on ascending quadratic coefficients."""
    a, b, c, d = gamma.a, gamma.b, gamma.c, gamma.d
    return np.array(
        [
            [d * d, b * d, b * b],
            [2 * c * d, a * d + b * c, 2 * a * b],
            [c * c, a * c, a * a],
        ],
        dtype=complex,
    )


def slash_eval(a, gamma, tau, floor=IM_FLOOR):
    """Pointwise slashed operator at tau: returns (d_tau coefficient, scalar).

    Conjugation with the weight cocycle gives j^2 f(gamma tau) on d_tau and
    k c j f(gamma tau) + g(gamma tau) on the scalar part."""
    tau = complex(tau)
    gt = gamma.mobius(tau)
    if tau.imag < floor or gt.imag < floor:
        raise ValueError(f"slash_eval needs Im(tau) and Im(gamma tau) >= {floor}")
    j = gamma.c * tau + gamma.d
    f = a.coeff_d.evaluate(gt)
    g = a.coeff_s.evaluate(gt)
    return (j * j * f, a.weight * gamma.c * j * f + g)


def phi_k(a, k):
    """Weight-shift isomorphism: f d + g  ->  f d + (k/2) f' + g."""
    if a.weight != 0:
        raise ValueError("phi_k is defined on weight-0 elements")
    s = 0.5 * k * a.coeff_d.differentiate() + a.coeff_s
    return LieElement(k, a.coeff_d, s, poly_restricted=a.poly_restricted)


# -- differential operators of finite order -----------------------------------


class DiffOp:
    """sum_j c_j(tau, q) d_tau^j with MixedExpansion coefficients."""

    __slots__ = ("nq_max", "coeffs")

    def __init__(self, nq_max, coeffs=None):
        self.nq_max = nq_max
        self.coeffs = {}
        for j, c in (coeffs or {}).items():
            if not c.is_zero():
                self.coeffs[int(j)] = c

    @classmethod
    def one(cls, nq_max):
        return cls(nq_max, {0: MixedExpansion.one(nq_max)})

    def order(self):
        return max(self.coeffs, default=-1)

    def coefficient(self, j):
        return self.coeffs.get(j, MixedExpansion.zero(self.nq_max))

    def is_zero(self, tol=0.0):
        return all(c.coeff_norm() <= tol for c in self.coeffs.values())

    def max_abs(self):
        return max((c.coeff_norm() for c in self.coeffs.values()), default=0.0)

    def __add__(self, other):
        out = dict(self.coeffs)
        for j, c in other.coeffs.items():
            out[j] = out[j] + c if j in out else c
        return DiffOp(self.nq_max, out)

    def __rmul__(self, scalar):
        return DiffOp(self.nq_max, {j: scalar * c for j, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-1.0) * other

    def scale_expansion(self, F):
        """Left-multiply by the function F (no differentiation)."""
        return DiffOp(self.nq_max, {j: qpoly.multiply(F, c) for j, c in self.coeffs.items()})

    def compose(self, other):
        """Operator composition; d^j passes through a coefficient by Leibniz:
        d^j (e .) = sum_t binom(j,t) e^(t) d^(j-t)."""
        out = {}
        for j, c in self.coeffs.items():
            for i, e in other.coeffs.items():
                der = e
                for t in range(j + 1):
                    term = qpoly.multiply(c, der) if t else qpoly.multiply(c, e)
                    term = math.comb(j, t) * term
                    k = j - t + i
                    out[k] = out[k] + term if k in out else term
                    if t < j:
                        der = der.differentiate()
        return DiffOp(self.nq_max, out)

    def apply(self, F):
        acc = MixedExpansion.zero(self.nq_max)
        der = F
        for j in range(self.order() + 1):
            c = self.coeffs.get(j)
            if c is not None:
                acc = acc + qpoly.multiply(c, der)
            der = der.differentiate()
        return acc

    def max_abs_diff(self, other):
        worst = 0.0
        for j in set(self.coeffs) | set(other.coeffs):
            worst = max(worst, self.coefficient(j).max_abs_diff(other.coefficient(j)))
        return worst

    def __repr__(self):
        return f"DiffOp(order={self.order()})"


# -- rho-graded operator series ------------------------------------------------


def _indices(n_vars, rho_max):
    for total in range(rho_max + 1):
        for m in itertools.product(range(total + 1), repeat=n_vars):
            if sum(m) == total:
                yield m


class RhoSeriesOp:
    """Truncated operator series sum_m A_m rho^m, A_m a DiffOp of order <= |m|.

    Group-flavored values carry the identity at the empty index; algebra
    (Lie) values carry zero there.
    """

    __slots__ = ("n_vars", "rho_max", "weight", "nq_max", "coeffs")

    def __init__(self, n_vars, rho_max, weight, nq_max, coeffs=None):
        if rho_max > RHO_MAX_SUPPORTED:
            raise ValueError(f"rho_max > {RHO_MAX_SUPPORTED} unsupported")
        self.n_vars = int(n_vars)
        self.rho_max = int(rho_max)
        self.weight = int(weight)
        self.nq_max = nq_max
        self.coeffs = {}
        for m, op in (coeffs or {}).items():
            m = tuple(int(t) for t in m)
            if len(m) != self.n_vars or any(t < 0 for t in m) or sum(m) > self.rho_max:
                raise ValueError(f"bad multi-index {m}")
            if op.order() > sum(m):
                raise ValueError(f"coefficient at {m} has order {op.order()} > |m|")
            if not op.is_zero():
                self.coeffs[m] = op

    @classmethod
    def identity(cls, n_vars, rho_max, weight, nq_max):
        zero_m = (0,) * n_vars
        return cls(n_vars, rho_max, weight, nq_max, {zero_m: DiffOp.one(nq_max)})

    @classmethod
    def zero(cls, n_vars, rho_max, weight, nq_max):
        return cls(n_vars, rho_max, weight, nq_max, {})

    @classmethod
    def from_lie(cls, terms, n_vars, rho_max, nq_max):
        """Algebra-flavored series with LieElement coefficients (order <= 1)."""
        coeffs = {}
        weight = None
        for m, lie in terms.items():
            if weight is None:
                weight = lie.weight
            elif lie.weight != weight:
                raise ValueError("mixed weights in Lie series")
            if sum(m) < 1:
                raise ValueError("Lie series live in the augmentation ideal")
            coeffs[m] = lie.as_diffop()
        return cls(n_vars, rho_max, 0 if weight is None else weight, nq_max, coeffs)

    def coefficient(self, m):
        return self.coeffs.get(tuple(m), DiffOp(self.nq_max))

    @property
    def empty_index(self):
        return (0,) * self.n_vars

    def indices(self):
        return list(_indices(self.n_vars, self.rho_max))

    def _like(self, coeffs):
        return RhoSeriesOp(self.n_vars, self.rho_max, self.weight, self.nq_max, coeffs)

    def __add__(self, other):
        _compat(self, other)
        out = dict(self.coeffs)
        for m, op in other.coeffs.items():
            out[m] = out[m] + op if m in out else op
        return self._like(out)

    def __rmul__(self, scalar):
        return self._like({m: scalar * op for m, op in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-1.0) * other

    def apply(self, F):
        """Apply to a q-expansion: returns {multi-index: MixedExpansion}."""
        return {m: self.coefficient(m).apply(F) for m in self.indices()}

    def max_abs(self):
        return max((op.max_abs() for op in self.coeffs.values()), default=0.0)

    def max_abs_diff(self, other):
        _compat(self, other)
        worst = 0.0
        for m in set(self.coeffs) | set(other.coeffs):
            worst = max(worst, self.coefficient(m).max_abs_diff(other.coefficient(m)))
        return worst

    def to_json_dict(self):
        entries = []
        for m in sorted(self.coeffs):
            op = self.coeffs[m]
            entries.append(
                {
                    "index": list(m),
                    "operator": [
                        [j, op.coeffs[j].to_json_dict()] for j in sorted(op.coeffs)
                    ],
                }
            )
        return {
            "n_vars": self.n_vars,
            "rho_max": self.rho_max,
            "weight": self.weight,
            "nq": self.nq_max,
            "coefficients": entries,
        }

    @classmethod
    def from_json_dict(cls, data):
        coeffs = {}
        for entry in data["coefficients"]:
            ops = {
                int(j): MixedExpansion.from_json_dict(blob)
                for j, blob in entry["operator"]
            }
            coeffs[tuple(entry["index"])] = DiffOp(data["nq"], ops)
        return cls(data["n_vars"], data["rho_max"], data["weight"], data["nq"], coeffs)

    def __repr__(self):
        return (
            f"RhoSeriesOp(n_vars={self.n_vars}, rho_max={self.rho_max}, "
            f"weight={self.weight}, {len(self.coeffs)} terms)"
        )


def _compat(A, B):
    if (A.n_vars, A.rho_max, A.weight) != (B.n_vars, B.rho_max, B.weight):
        raise ValueError("incompatible rho-series")


def compose(A, B):
    """rho-graded operator composition, truncated at rho_max."""
    _compat(A, B)
    out = {}
    for m1, op1 in A.coeffs.items():
        for m2, op2 in B.coeffs.items():
            m = tuple(x + y for x, y in zip(m1, m2))
            if sum(m) > A.rho_max:
                continue
            term = op1.compose(op2)
            out[m] = out[m] + term if m in out else term
    for m, op in out.items():
        assert op.order() <= sum(m), "operator order exceeded the rho-degree"
    return A._like(out)


def exp_op(x):
    """Truncated exponential; x must vanish at the empty index."""
    if not x.coefficient(x.empty_index).is_zero(1e-12 * max(x.max_abs(), 1.0)):
        raise ValueError("exp_op needs a vanishing empty-index coefficient")
    acc = RhoSeriesOp.identity(x.n_vars, x.rho_max, x.weight, x.nq_max)
    power = acc
    fact = 1.0
    for j in range(1, x.rho_max + 1):
        power = compose(power, x)
        fact *= j
        acc = acc + (1.0 / fact) * power
    return acc


def log_op(A):
    """Truncated logarithm; A must carry the identity at the empty index."""
    unit = DiffOp.one(A.nq_max)
    if A.coefficient(A.empty_index).max_abs_diff(unit) > 1e-9 * max(A.max_abs(), 1.0):
        raise ValueError("log_op needs the identity at the empty index")
    n = A - RhoSeriesOp.identity(A.n_vars, A.rho_max, A.weight, A.nq_max)
    acc = RhoSeriesOp.zero(A.n_vars, A.rho_max, A.weight, A.nq_max)
    power = RhoSeriesOp.identity(A.n_vars, A.rho_max, A.weight, A.nq_max)
    for j in range(1, A.rho_max + 1):
        power = compose(power, n)
        acc = acc + ((-1.0) ** (j + 1) / j) * power
    return acc


def inverse_op(A):
    """Group inverse in the truncated algebra (geometric series)."""
    unit = DiffOp.one(A.nq_max)
    if A.coefficient(A.empty_index).max_abs_diff(unit) > 1e-9 * max(A.max_abs(), 1.0):
        raise ValueError("inverse_op needs the identity at the empty index")
    one = RhoSeriesOp.identity(A.n_vars, A.rho_max, A.weight, A.nq_max)
    n = one - A
    acc = one
    power = one
    for _ in range(A.rho_max):
        power = compose(power, n)
        acc = acc + power
    return acc


def _is_lie_valued(x, tol):
    scale = max(x.max_abs(), 1e-300)
    for m, op in x.coeffs.items():
        for j, c in op.coeffs.items():
            if j >= 2 and c.coeff_norm() > tol * scale:
                return False
    return True


def _project_lie(x, tol):
    scale = max(x.max_abs(), 1e-300)
    out = {}
    for m, op in x.coeffs.items():
        junk = max(
            (c.coeff_norm() for j, c in op.coeffs.items() if j >= 2), default=0.0
        )
        if junk > tol * scale:
            raise LieClosureError(
                f"coefficient at {m} has second-order content {junk:.3e} "
                f"(relative {junk / scale:.3e})"
            )
        kept = {j: c for j, c in op.coeffs.items() if j <= 1}
        out[m] = DiffOp(x.nq_max, kept)
    return x._like(out)


def bch(x, y, tol=1e-9):
    """log(exp(x) exp(y)) in the truncated algebra.  When both inputs have
    first-order coefficients the result is checked, coefficient by
    coefficient, to be first-order again (Lie closure) and the numerical
    second-order junk is dropped."""
    z = log_op(compose(exp_op(x), exp_op(y)))
    if _is_lie_valued(x, tol) and _is_lie_valued(y, tol):
        z = _project_lie(z, tol)
    return z


# -- group-level slash (through the logarithm) ---------------------------------


def _restricted_from_diffop(op, weight, nq_max):
    """Project a first-order operator onto the restricted shape; returns
    (LieElement, junk norm)."""
    junk = max((c.coeff_norm() for j, c in op.coeffs.items() if j >= 2), default=0.0)
    c1 = op.coefficient(1)
    poly = c1.q0_polynomial()
    tail = c1 - _poly_expansion(poly, nq_max)
    junk = max(junk, tail.coeff_norm(), _norm(poly[3:]))
    p = np.zeros(3, dtype=complex)
    head = poly[:3]
    p[: len(head)] = head / 2.0
    lie = LieElement.restricted(weight, p, nq_max)
    junk = max(junk, op.coefficient(0).max_abs_diff(lie.coeff_s))
    return lie, junk


def slash_group(A, gamma, tol=1e-9):
    """Right slash of a group-flavored series: conjugation is an algebra
    automorphism, so slash the logarithm (restricted Lie coefficients slash
    exactly) and exponentiate back."""
    x = log_op(A)
    scale = max(x.max_abs(), 1e-300)
    out = {}
    for m, op in x.coeffs.items():
        lie, junk = _restricted_from_diffop(op, A.weight, A.nq_max)
        if junk > tol * scale:
            raise LieClosureError(
                f"log coefficient at {m} is not restricted-Lie "
                f"(junk {junk:.3e}, relative {junk / scale:.3e})"
            )
        out[m] = slash_poly(lie, gamma).as_diffop()
    return exp_op(x._like(out))


# -- letterwise rescaling endomorphisms ----------------------------------------


class PhiScaling:
    """Endomorphism substituting rho_i -> sum_m lambda_{i,m} rho_i^m for each
    variable, extended multiplicatively.  scales[i] lists (lambda_{i,1},
    lambda_{i,2}, ...)."""

    def __init__(self, scales):
        self.scales = [list(map(complex, s)) for s in scales]

    @classmethod
    def identity(cls, n_vars):
        return cls([[1.0]] * n_vars)

    def _variable_poly(self, i, power, rho_max):
        """Coefficients over rho_i-powers of (sum_m lam_m rho_i^m)^power."""
        base = np.zeros(rho_max + 1, dtype=complex)
        for m, lam in enumerate(self.scales[i], start=1):
            if m <= rho_max:
                base[m] = lam
        acc = np.zeros(rho_max + 1, dtype=complex)
        acc[0] = 1.0
        for _ in range(power):
            acc = np.convolve(acc, base)[: rho_max + 1]
        return acc

    def apply(self, A):
        if len(self.scales) != A.n_vars:
            raise ValueError("one scaling per variable required")
        out = {}
        for m, op in A.coeffs.items():
            polys = [self._variable_poly(i, m[i], A.rho_max) for i in range(A.n_vars)]
            for target in itertools.product(*(range(A.rho_max + 1),) * A.n_vars):
                if sum(target) > A.rho_max:
                    continue
                factor = 1.0 + 0j
                for i in range(A.n_vars):
                    factor *= polys[i][target[i]]
                if factor == 0:
                    continue
                term = factor * op
                out[target] = out[target] + term if target in out else term
        return A._like(out)

    def compose(self, other):
        """self after other: the result applies like self.apply(other.apply(.)).

        Substituting self's series and then other's amounts to evaluating
        other's polynomial at self's polynomial, per variable."""
        if len(self.scales) != len(other.scales):
            raise ValueError("variable count mismatch")
        depth = RHO_MAX_SUPPORTED
        out = []
        for i in range(len(self.scales)):
            inner = np.zeros(depth + 1, dtype=complex)
            for m, lam in enumerate(self.scales[i], start=1):
                if m <= depth:
                    inner[m] = lam
            total = np.zeros(depth + 1, dtype=complex)
            power = np.zeros(depth + 1, dtype=complex)
            power[0] = 1.0
            for m, lam in enumerate(other.scales[i], start=1):
                power = np.convolve(power, inner)[: depth + 1]
                total += lam * power
            out.append(list(total[1:]))
        return PhiScaling(out)


def monoid_act(C, phi, cocycle_values, gamma, tol=1e-9):
    """((C, Phi) A)_gamma = C||gamma . Phi(A_gamma) . C^(-1)."""
    A_gamma = cocycle_values[gamma] if isinstance(cocycle_values, dict) else cocycle_values(gamma)
    left = slash_group(C, gamma, tol)
    return compose(compose(left, phi.apply(A_gamma)), inverse_op(C))


# -- linear coboundary solver ---------------------------------------------------


def solve_linear_coboundary(values, rank_tol=1e-10):
    """Least-squares c with  a_gamma = c||gamma - c  over quadratics.

    values: dict GroupElement -> ascending quadratic coefficients.  Returns
    (c ascending, max abs residual).  A rank-deficient system means some
    quadratic is invariant under every sampled gamma; that subspace is named
    in the error."""
    gammas = list(values)
    if len(gammas) < 3:
        raise ValueError("need at least 3 sampled group elements")
    rows = []
    rhs = []
    eye = np.eye(3, dtype=complex)
    for g in gammas:
        rows.append(slash_matrix_quadratic(g) - eye)
        a = np.zeros(3, dtype=complex)
        arr = np.asarray(values[g], dtype=complex)
        a[: arr.size] = arr
        rhs.append(a)
    design = np.vstack(rows)
    target = np.concatenate(rhs)
    svals = np.linalg.svd(design, compute_uv=False)
    if svals[-1] < rank_tol * svals[0]:
        _, _, vh = np.linalg.svd(design)
        kernel = vh[np.abs(svals) < rank_tol * svals[0]]
        basis = "; ".join(np.array2string(v, precision=4) for v in kernel)
        raise ValueError(
            "coboundary system is rank deficient: the sampled elements leave "
            f"invariant quadratics (ascending basis {basis})"
        )
    sol, *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.max(np.abs(design @ sol - target)))
    return sol, residual
