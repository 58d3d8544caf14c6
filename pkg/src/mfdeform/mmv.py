"""Multiple modular values, the depth-truncated iterated-integral series,
and the totally holomorphic canonical cocycle.

Conventions used throughout this module:

* A *word* is a tuple of indices into the alphabet (letters are weight-4
  cusp forms), so the empty word is ``()``.
* The coefficient attached to a word of length r is an ``np.ndarray`` of
  shape ``(3,)*r`` (slot dimension 3 = degree-2 polynomials in each
  variable); the empty word carries a 0-d array.  Entries are
  MixedExpansion objects for the series I(tau) and plain complex numbers
  for evaluated series and cocycles.
* Slot index n corresponds to the monomial x^n; the degree-2 kernel
  (x - z)^2 expands as sum_n binom(2,n) (-1)^n x^n z^(2-n), which fixes
  the sign and binomial bookkeeping below (validated against quadrature).
"""

import itertools

import numpy as np

from . import qpoly
from .groups import DEFAULT_TAU_SAMPLES, adjust_samples
from .modforms import CuspForm, DEFAULT_NQ, default_cusp_form, period_polynomial
from .qpoly import MixedExpansion
from .quadrature import vertical_integral

_BINOM2 = (1.0, 2.0, 1.0)
_SLOT = 3  # monomial basis 1, x, x^2 of the degree-2 slot


class PrecisionError(ArithmeticError):
    """A certified numerical invariant (tau-independence, ...) failed."""


class MMVKey:
    """Ordered letters with integer powers; powers may exceed the weight
    bound of the tensor slots (the extended functional values)."""

    __slots__ = ("forms", "powers")

    def __init__(self, forms, powers):
        forms = tuple(forms)
        powers = tuple(int(n) for n in powers)
        if len(forms) != len(powers):
            raise ValueError("forms and powers must have equal length")
        for h in forms:
            if not isinstance(h, CuspForm):
                raise TypeError("letters must be CuspForm instances")
        for n in powers:
            if n < 0:
                raise ValueError("powers must be nonnegative")
        self.forms = forms
        self.powers = powers

    @property
    def depth(self):
        return len(self.forms)

    def __repr__(self):
        letters = ",".join(h.label or f"w{h.weight}" for h in self.forms)
        return f"MMVKey([{letters}]; {list(self.powers)})"


def mmv_functional(key, nq_max=None):
    """Functional multiple modular value Lambda_tau(h_1,..,h_d; n_1,..,n_d)
    as a MixedExpansion, by the recursion
    Lambda_tau = int_tau^{i oo} h_1(z) z^{n_1} Lambda_z(rest) dz."""
    if nq_max is None:
        nq_max = min((h.nq_max for h in key.forms), default=DEFAULT_NQ)
    acc = MixedExpansion.one(nq_max)
    for h, n in zip(reversed(key.forms), reversed(key.powers)):
        base = h.expansion(nq_max)
        assert 0 not in base.terms, "cusp form with a constant term"
        zn = MixedExpansion.from_polynomial([0.0] * n + [1.0], nq_max)
        acc = qpoly.integrate_to_cusp(qpoly.multiply(qpoly.multiply(base, zn), acc))
    return acc


# -- the iterated-integral generating series ---------------------------------


def _all_words(n_letters, depth_max):
    for r in range(depth_max + 1):
        yield from itertools.product(range(n_letters), repeat=r)


def _scalar_array(value):
    arr = np.empty((), dtype=object)
    arr[()] = value
    return arr


class IteratedSeries:
    """Word-indexed tensor coefficients of a depth-truncated series in the
    tensor algebra on degree-2 polynomial slots.

    coefficients: dict word -> ndarray of shape (3,)*len(word).  Entries are
    MixedExpansion (symbolic in tau) or complex (evaluated / cocycle).
    Instances are treated as read-only once built.
    """

    def __init__(self, alphabet, depth_max, coefficients, normalization, nq_max):
        self.alphabet = list(alphabet)
        self.depth_max = int(depth_max)
        self.nq_max = nq_max
        self.normalization = list(normalization)
        self.coefficients = dict(coefficients)
        for w in _all_words(len(self.alphabet), self.depth_max):
            if w not in self.coefficients:
                raise ValueError(f"missing coefficient for word {w}")
            # 0-d arithmetic yields numpy scalars; normalize back to ndarray
            t = np.asarray(self.coefficients[w])
            self.coefficients[w] = t
            if t.shape != (_SLOT,) * len(w):
                raise ValueError(f"word {w}: tensor must have shape {(_SLOT,)*len(w)}")

    @property
    def symbolic(self):
        return self.coefficients[()].dtype == object

    def entry(self, word, index=()):
        return self.coefficients[tuple(word)][tuple(index)]

    def scalar(self):
        return self.coefficients[()][()]

    def words(self):
        return list(_all_words(len(self.alphabet), self.depth_max))

    def evaluate(self, tau):
        """Numeric series at a point of the upper half plane."""
        out = {}
        for w, t in self.coefficients.items():
            arr = np.empty(t.shape, dtype=complex)
            for idx in np.ndindex(t.shape):
                arr[idx] = t[idx].evaluate(tau)
            out[w] = arr
        return IteratedSeries(self.alphabet, self.depth_max, out, self.normalization, self.nq_max)

    def slash(self, gamma):
        out = {w: slash_tensor(t, gamma) for w, t in self.coefficients.items()}
        return IteratedSeries(self.alphabet, self.depth_max, out, self.normalization, self.nq_max)

    def max_abs_diff(self, other):
        _check_compatible(self, other)
        worst = 0.0
        for w, t in self.coefficients.items():
            d = t - other.coefficients[w]
            if d.dtype == object:
                m = max((x.coeff_norm() for x in d.flat), default=0.0)
            else:
                m = float(np.max(np.abs(d))) if d.size else float(abs(d))
            worst = max(worst, m)
        return worst

    def __repr__(self):
        kind = "symbolic" if self.symbolic else "numeric"
        return (
            f"IteratedSeries({len(self.alphabet)} letters, depth<={self.depth_max}, {kind})"
        )


def _norm_list(alphabet, normalization):
    if normalization is None:
        return [complex(2j * np.pi) ** (h.weight - 1) for h in alphabet]
    if np.isscalar(normalization):
        return [complex(normalization)] * len(alphabet)
    norms = [complex(x) for x in normalization]
    if len(norms) != len(alphabet):
        raise ValueError("one normalization constant per letter required")
    return norms


_SERIES_CACHE = {}


def iterated_series(alphabet, depth_max, nq_max=None, normalization=None):
    """The depth-truncated generating series I(tau): word (i_1,..,i_r) gets
    the tensor with entry (n_1,..,n_r) equal to

        prod_j norm_{i_j} * binom(2,n_j) * (-1)^{n_j}
            * Lambda_tau(h_{i_1},..,h_{i_r}; 2-n_1,..,2-n_r).
    """
    depth_max = int(depth_max)
    if depth_max < 0:
        raise ValueError("depth_max must be nonnegative")
    if depth_max > 4:
        raise ValueError("depth_max > 4 rejected (cost guard)")
    alphabet = list(alphabet)
    for h in alphabet:
        if not isinstance(h, CuspForm):
            raise TypeError("letters must be CuspForm instances")
        if h.weight != 4:
            raise ValueError("letters restricted to weight-4 cusp forms")
    if nq_max is None:
        nq_max = min((h.nq_max for h in alphabet), default=DEFAULT_NQ)
    norms = _norm_list(alphabet, normalization)

    cache_key = (tuple(id(h) for h in alphabet), depth_max, nq_max, tuple(norms))
    hit = _SERIES_CACHE.get(cache_key)
    if hit is not None:
        return hit

    lam_memo = {}

    def lam(word, powers):
        if not word:
            return MixedExpansion.one(nq_max)
        k = (word, powers)
        if k not in lam_memo:
            inner = lam(word[1:], powers[1:])
            base = alphabet[word[0]].expansion(nq_max)
            zn = MixedExpansion.from_polynomial([0.0] * powers[0] + [1.0], nq_max)
            lam_memo[k] = qpoly.integrate_to_cusp(
                qpoly.multiply(qpoly.multiply(base, zn), inner)
            )
        return lam_memo[k]

    coeffs = {(): _scalar_array(MixedExpansion.one(nq_max))}
    for w in _all_words(len(alphabet), depth_max):
        if not w:
            continue
        r = len(w)
        norm = np.prod([norms[i] for i in w])
        tensor = np.empty((_SLOT,) * r, dtype=object)
        for m in itertools.product(range(_SLOT), repeat=r):
            powers = tuple(2 - mj for mj in m)
            factor = norm * np.prod([_BINOM2[mj] for mj in m]) * (-1.0) ** sum(m)
            tensor[m] = factor * lam(w, powers)
        coeffs[w] = tensor

    out = IteratedSeries(alphabet, depth_max, coeffs, norms, nq_max)
    _SERIES_CACHE[cache_key] = out
    return out


def tensor_substitute(tensor, nq_max):
    """Substitute tau for every slot variable: sum_m t[m] tau^(m_1+..+m_r),
    as a MixedExpansion (entries must be MixedExpansion)."""
    tensor = np.asarray(tensor)
    acc = MixedExpansion.zero(nq_max)
    for m in np.ndindex(tensor.shape):
        mono = MixedExpansion.from_polynomial([0.0] * sum(m) + [1.0], nq_max)
        acc = acc + qpoly.multiply(tensor[m], mono)
    return acc


# -- concatenation algebra ----------------------------------------------------


def _check_compatible(A, B):
    if len(A.alphabet) != len(B.alphabet) or any(
        x is not y for x, y in zip(A.alphabet, B.alphabet)
    ):
        raise ValueError("series must share the alphabet")
    if A.depth_max != B.depth_max:
        raise ValueError("series must share the truncation depth")


def series_product(A, B):
    """Concatenation product: word coefficient (AB)_w = sum over splittings
    w = uv of the outer product A_u (x) B_v."""
    _check_compatible(A, B)
    coeffs = {}
    for w in _all_words(len(A.alphabet), A.depth_max):
        total = None
        for s in range(len(w) + 1):
            term = np.multiply.outer(A.coefficients[w[:s]], B.coefficients[w[s:]])
            total = term if total is None else total + term
        coeffs[w] = total
    return IteratedSeries(A.alphabet, A.depth_max, coeffs, A.normalization, A.nq_max)


def _unit_like(A):
    coeffs = {}
    for w, t in A.coefficients.items():
        z = 0.0 * t if t.dtype != object else np.array(
            [0.0 * x for x in t.flat], dtype=object
        ).reshape(t.shape)
        coeffs[w] = z
    if A.symbolic:
        coeffs[()] = _scalar_array(MixedExpansion.one(A.nq_max))
    else:
        coeffs[()] = np.array(1.0 + 0j)
    return IteratedSeries(A.alphabet, A.depth_max, coeffs, A.normalization, A.nq_max)


def _series_add(A, B, sign=1.0):
    _check_compatible(A, B)
    coeffs = {w: A.coefficients[w] + sign * B.coefficients[w] for w in A.coefficients}
    return IteratedSeries(A.alphabet, A.depth_max, coeffs, A.normalization, A.nq_max)


def series_inverse(A):
    """Inverse in the truncated tensor algebra (geometric series; requires the
    empty-word coefficient to be 1)."""
    eps = A.scalar()
    dev = eps.max_abs_diff(MixedExpansion.one(A.nq_max)) if A.symbolic else abs(eps - 1.0)
    if dev > 1e-9:
        raise ValueError("series_inverse needs empty-word coefficient 1")
    unit = _unit_like(A)
    nilp = _series_add(unit, A, sign=-1.0)  # 1 - A, vanishing empty word
    inv = unit
    power = unit
    for _ in range(A.depth_max):
        power = series_product(power, nilp)
        inv = _series_add(inv, power)
    return inv


# -- the right slot action ----------------------------------------------------


def _slash_matrix(gamma):
    """S[m, n] = coefficient of x^m in (a x + b)^n (c x + d)^(2-n)."""
    up = np.array([gamma.b, gamma.a], dtype=complex)
    low = np.array([gamma.d, gamma.c], dtype=complex)
    S = np.zeros((_SLOT, _SLOT), dtype=complex)
    for n in range(_SLOT):
        poly = np.array([1.0 + 0j])
        for _ in range(n):
            poly = np.convolve(poly, up)
        for _ in range(2 - n):
            poly = np.convolve(poly, low)
        S[: len(poly), n] = poly
    return S


def slash_tensor(tensor, gamma):
    """Per-slot right action of gamma (monomial x^n -> (ax+b)^n (cx+d)^(2-n))."""
    tensor = np.asarray(tensor)
    if any(s != _SLOT for s in tensor.shape):
        raise ValueError("tensor slots must have dimension 3 (weight-4 letters)")
    if tensor.ndim == 0:
        return tensor.copy()
    S = _slash_matrix(gamma)
    out = tensor
    for _ in range(tensor.ndim):
        # consume the leading slot, append the transformed slot at the end;
        # after ndim steps the axis order is restored
        out = np.tensordot(out, S, axes=([0], [1]))
    return out


# -- canonical cocycle --------------------------------------------------------

_BUNDLED = []


def _bundled_alphabet():
    if not _BUNDLED:
        _BUNDLED.append(default_cusp_form())
    return [_BUNDLED[0]]


def canonical_cocycle(gamma, alphabet=None, depth_max=2, tau_samples=None,
                      nq_max=None, tol=1e-6):
    """C_gamma = (I(gamma tau) || gamma)^(-1) * I(tau), computed at several
    tau samples.  Returns (series with complex entries averaged over samples,
    max pairwise deviation).  The per-entry deviations are attached to the
    returned series as ``.deviations``.

    Deviation above tol raises PrecisionError: the result would not be the
    tau-independent cocycle to the requested accuracy.
    """
    if alphabet is None:
        alphabet = _bundled_alphabet()
    series = iterated_series(alphabet, depth_max, nq_max)
    taus = list(DEFAULT_TAU_SAMPLES if tau_samples is None else tau_samples)
    if len(taus) < 3:
        raise ValueError("need at least 3 tau samples for the independence check")
    taus = adjust_samples(taus, [gamma])

    per_sample = []
    for t in taus:
        image = series.evaluate(gamma.mobius(t)).slash(gamma)
        here = series.evaluate(t)
        per_sample.append(series_product(series_inverse(image), here))

    mean = {}
    deviations = {}
    worst = 0.0
    for w in series.words():
        stack = np.stack([np.asarray(p.coefficients[w], dtype=complex) for p in per_sample])
        mean[w] = stack.mean(axis=0)
        dev = np.zeros(stack.shape[1:], dtype=float)
        for i in range(len(stack)):
            for j in range(i + 1, len(stack)):
                dev = np.maximum(dev, np.abs(stack[i] - stack[j]))
        deviations[w] = dev
        worst = max(worst, float(np.max(dev)) if dev.size else float(dev))
    if worst > tol:
        raise PrecisionError(
            f"canonical cocycle tau-deviation {worst:.3e} exceeds tolerance {tol:.3e}"
        )
    out = IteratedSeries(alphabet, depth_max, mean, series.normalization, series.nq_max)
    out.deviations = deviations
    return out, worst


# -- classical values ---------------------------------------------------------


def _default_tau0(gamma):
    # equalizes Im(tau0) and Im(gamma tau0); both legs of the split path are
    # then equally well-conditioned
    c = abs(gamma.c)
    return complex(-gamma.d / gamma.c, 1.0 / c)


def _depth1_quad(h, n, gamma, tau0, epsabs, nq_max):
    """Lambda_{gamma^(-1) oo}(h; n) by splitting the path at tau0 and mapping
    the cusp leg through gamma."""
    nq = h.nq_max if nq_max is None else nq_max
    hx = h.expansion(nq)
    if tau0 is None:
        tau0 = _default_tau0(gamma)
    ginv = gamma.inverse()

    direct = vertical_integral(lambda z: hx.evaluate(z) * z ** n, tau0, epsabs=epsabs)

    def mapped(w):
        jw = ginv.c * w + ginv.d
        return jw ** 2 * hx.evaluate(w) * ginv.mobius(w) ** n

    cusp_leg = -vertical_integral(mapped, gamma.mobius(tau0), epsabs=epsabs)
    return cusp_leg + direct


def _depth2_quad(key, gamma, tau0, epsabs, nq_max):
    """Depth-2 classical value by the same path split; the inner functional
    value on the mapped leg is recovered from the slot action plus the
    depth-1 cusp constants (themselves from the quadrature route, so this
    stays free of fitted quantities)."""
    h1, h2 = key.forms
    n1, n2 = key.powers
    if not (0 <= n1 <= 2 and 0 <= n2 <= 2):
        raise ValueError("depth-2 classical values support powers 0..2 only")
    nq = min(h1.nq_max, h2.nq_max) if nq_max is None else nq_max
    if tau0 is None:
        tau0 = _default_tau0(gamma)
    h1x = h1.expansion(nq)
    inner = [mmv_functional(MMVKey([h2], [j]), nq) for j in range(3)]
    cusp = [_depth1_quad(h2, j, gamma, tau0, max(epsabs * 0.1, 1e-13), nq) for j in range(3)]

    direct = mmv_functional(key, nq).evaluate(tau0)

    a, b, c, d = gamma.a, gamma.b, gamma.c, gamma.d
    ginv = gamma.inverse()

    def lam_inner(w):
        # P(g^(-1)w, x) = j_g(x)^2 P(w, g x) + (x^2 c0 - 2x c1 + c2)
        L0, L1, L2 = (s.evaluate(w) for s in inner)
        A2 = L0 * a * a - 2 * L1 * a * c + L2 * c * c + cusp[0]
        A1 = 2 * L0 * a * b - 2 * L1 * (a * d + b * c) + 2 * L2 * c * d - 2 * cusp[1]
        A0 = L0 * b * b - 2 * L1 * b * d + L2 * d * d + cusp[2]
        return (A2, -0.5 * A1, A0)[n2]

    def mapped(w):
        jw = ginv.c * w + ginv.d
        return jw ** 2 * h1x.evaluate(w) * ginv.mobius(w) ** n1 * lam_inner(w)

    cusp_leg = -vertical_integral(mapped, gamma.mobius(tau0), epsabs=epsabs)
    return cusp_leg + direct


def mmv_classical(key, gamma, route="auto", tau0=None, epsabs=1e-11, nq_max=None):
    """Classical multiple modular value Lambda_gamma := Lambda_{gamma^(-1) oo}.

    Depth-1 values with power <= 2 come from the period-polynomial route
    (p_{h,gamma}(x) = -(x^2 L0 - 2x L1 + L2)); route="quadrature" forces the
    split-path integral instead.  Depth 2 always uses the split path.
    """
    if route not in ("auto", "period", "quadrature"):
        raise ValueError("route must be auto, period or quadrature")
    d = key.depth
    if d > 2:
        raise ValueError("classical values of depth > 2 are unsupported")
    if d == 0:
        return 1.0 + 0j
    if gamma.c == 0:
        # gamma fixes the cusp at infinity: empty path
        return 0j
    if d == 1:
        h, n = key.forms[0], key.powers[0]
        if route == "period" or (route == "auto" and n <= 2):
            if n > 2:
                raise ValueError("period route only reaches powers 0..2")
            coeffs, _res = period_polynomial(h, gamma, nq_max=nq_max)
            return (-coeffs[2], 0.5 * coeffs[1], -coeffs[0])[n]
        return _depth1_quad(h, n, gamma, tau0, epsabs, nq_max)
    if route == "period":
        raise ValueError("period route is depth-1 only")
    return _depth2_quad(key, gamma, tau0, epsabs, nq_max)
