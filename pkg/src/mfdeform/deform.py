"""The deformation pipeline: first- and second-order packages built from a
weight-4 cusp form, deformation of forms through the universal family, the
transformation-law verifier, the canonical deformation operator, and the
order-2 cocycle matcher.

All weight-k data are images of weight-0 data under the weight-shift map, so
everything here is assembled at weight 0 and shifted on demand.
"""

import numpy as np

from . import qpoly
from .defalg import (
    DiffOp,
    LieElement,
    PhiScaling,
    RhoSeriesOp,
    _restricted_from_diffop,
    bracket,
    exp_op,
    log_op,
    monoid_act,
    phi_k,
    slash_eval,
    slash_matrix_quadratic,
    slash_poly,
)
from .groups import (
    DEFAULT_TAU_SAMPLES,
    adjust_samples,
    default_context,
    is_feasible,
    sample_feasible_pairs,
)
from .mmv import MMVKey, canonical_cocycle, mmv_functional
from .modforms import (
    CuspForm,
    adjudicate_rc_sign,
    eichler_integral,
    fit_quadratic,
    fit_samples,
    period_polynomial,
    second_order_integrand_weighted,
    second_order_polynomial_values,
)
from .qpoly import MixedExpansion

DEFAULT_TOLERANCES = {
    "period_fit": 1e-8,
    "first_order_coboundary": 1e-8,
    "first_order_cocycle": 1e-8,
    "second_order_two_path": 1e-8,
    "second_order_polynomiality": 1e-6,
    "second_order_cocycle": 1e-6,
    "second_order_section": 1e-6,
}


class DeformationPackage:
    """First- and second-order logarithmic deformation data of a weight-4
    cusp form, together with the residuals of every defining equation."""

    def __init__(self, form, order, first_order_cocycle, first_order_section,
                 second_order_cocycle=None, second_order_section=None,
                 residuals=None, tolerances=None, pairs=None, rc_sign=None):
        self.form = form
        self.order = order
        self.first_order_cocycle = dict(first_order_cocycle)
        self.first_order_section = first_order_section
        self.second_order_cocycle = dict(second_order_cocycle or {})
        self.second_order_section = second_order_section
        self.residuals = dict(residuals or {})
        self.tolerances = dict(DEFAULT_TOLERANCES)
        self.tolerances.update(tolerances or {})
        self.pairs = list(pairs or [])
        self.rc_sign = rc_sign

    @property
    def verified(self):
        return all(
            self.residuals[name] <= self.tolerances.get(name, np.inf)
            for name in self.residuals
        )

    def gammas(self):
        return list(self.first_order_cocycle)

    def report(self):
        return {
            "order": self.order,
            "residuals": dict(self.residuals),
            "tolerances": {k: self.tolerances[k] for k in self.residuals},
            "verified": self.verified,
        }

    def __repr__(self):
        state = "verified" if self.verified else "UNVERIFIED"
        return f"DeformationPackage(order={self.order}, {len(self.first_order_cocycle)} gammas, {state})"


# -- first order ---------------------------------------------------------------


def first_order_data(h, gammas, pairs=None, tau_samples=None, nq_max=None,
                     tolerances=None):
    """a1_gamma = 2 p_{h,gamma} d_tau and b1 = 2 h~ d_tau, with the coboundary
    residual  a1_gamma - (b1||gamma - b1)  evaluated pointwise and the linear
    cocycle relation checked exactly on feasible products of the sampled
    elements (or the given pairs)."""
    if not isinstance(h, CuspForm) or h.weight != 4:
        raise ValueError("first_order_data needs a weight-4 cusp form")
    nq = h.nq_max if nq_max is None else nq_max
    gammas = list(gammas)
    base_taus = list(DEFAULT_TAU_SAMPLES if tau_samples is None else tau_samples)
    if pairs is None:
        pairs = []
        for i, g in enumerate(gammas):
            d = gammas[(i + 1) % len(gammas)]
            if is_feasible([g, d, g * d]):
                pairs.append((g, d))

    ei = eichler_integral(h, nq)
    b1 = LieElement(0, 2.0 * ei, MixedExpansion.zero(nq))

    a1 = {}
    fit_worst = 0.0
    for g in gammas:
        coeffs, res = period_polynomial(h, g, nq_max=nq)
        fit_worst = max(fit_worst, res)
        a1[g] = LieElement.restricted(0, coeffs, nq)

    cob_worst = 0.0
    for g in gammas:
        taus = adjust_samples(base_taus, [g])
        for t in taus:
            d_slash, s_slash = slash_eval(b1, g, t)
            lhs = a1[g].coeff_d.evaluate(t)
            rhs = d_slash - b1.coeff_d.evaluate(t)
            cob_worst = max(cob_worst, abs(lhs - rhs), abs(s_slash))

    coc_worst = 0.0
    for g, d in pairs:
        gd = g * d
        if gd not in a1:
            coeffs, res = period_polynomial(h, gd, nq_max=nq)
            fit_worst = max(fit_worst, res)
            a1[gd] = LieElement.restricted(0, coeffs, nq)
        lhs = a1[gd]
        rhs = slash_poly(a1[g], d) + a1[d]
        coc_worst = max(coc_worst, lhs.max_abs_diff(rhs))

    residuals = {
        "period_fit": float(fit_worst),
        "first_order_coboundary": float(cob_worst),
        "first_order_cocycle": float(coc_worst),
    }
    return DeformationPackage(h, 1, a1, b1, residuals=residuals, tolerances=tolerances)


# -- second order ----------------------------------------------------------------


def lambda_combination(h, nq_max=None):
    """The quadratic-weighted depth-2 combination solving the second-order
    section equation:

        f = 4 tau^2 (L10 - L01) - 4 tau (L20 - L02) + 4 (L21 - L12),

    L_ab = Lambda_tau(h, h; a, b)."""
    nq = h.nq_max if nq_max is None else nq_max

    def lam(n1, n2):
        return mmv_functional(MMVKey([h, h], [n1, n2]), nq)

    def mono(k, c):
        return MixedExpansion.from_polynomial([0.0] * k + [complex(c)], nq)

    out = qpoly.multiply(mono(2, 4.0), lam(1, 0) - lam(0, 1))
    out = out + qpoly.multiply(mono(1, -4.0), lam(2, 0) - lam(0, 2))
    return out + 4.0 * (lam(2, 1) - lam(1, 2))


def second_order_data(h, pairs=None, pair_count=20, seed=101, tau_samples=None,
                      nq_max=None, tolerances=None, max_word_length=6):
    """Extends first-order data by the explicit order-2 solution: the section
    coefficient f is computed along two independent routes (iterated integral
    of the degree-2 Rankin-Cohen combination, and the depth-2 functional-MMV
    combination), a2_gamma is fitted from the quadratic combination

        p2_gamma = j^2 f(gamma tau) - f - 2 (p_gamma h~' - p'_gamma h~),

    and the order-2 logarithmic cocycle and section equations are verified."""
    nq = h.nq_max if nq_max is None else nq_max
    if pairs is None:
        pairs = sample_feasible_pairs(default_context(), pair_count, max_word_length, seed)
    pairs = list(pairs)
    gammas = []
    for g, d in pairs:
        for x in (g, d, g * d):
            if x not in gammas:
                gammas.append(x)

    pkg = first_order_data(h, gammas, pairs=pairs, tau_samples=tau_samples,
                           nq_max=nq, tolerances=tolerances)
    a1, b1 = pkg.first_order_cocycle, pkg.first_order_section

    if h.is_zero():
        sign = -1
        f = MixedExpansion.zero(nq)
        two_path = 0.0
    else:
        sign, _report = adjudicate_rc_sign(h, nq_max=nq)
        f = second_order_integrand_weighted(h, sign, nq)
        f_lambda = lambda_combination(h, nq)
        two_path = f.max_abs_diff(f_lambda)
    pkg.rc_sign = sign
    pkg.residuals["second_order_two_path"] = float(two_path)
    tol_two_path = pkg.tolerances["second_order_two_path"]
    if two_path > tol_two_path:
        raise ArithmeticError(
            f"the two routes to the order-2 section coefficient disagree by "
            f"{two_path:.3e}; the degree-2 Rankin-Cohen sign adjudication "
            f"(sign={sign}) and the functional-MMV combination cannot both hold"
        )

    b2 = LieElement(0, f, MixedExpansion.zero(nq))

    a2 = {}
    poly_worst = 0.0
    for g in gammas:
        if g.c == 0 and abs(g.a) == 1:
            # translations fix f (q-expansion in q = e^{2 pi i tau})
            a2[g] = LieElement.restricted(0, [0.0, 0.0, 0.0], nq)
            continue
        taus = fit_samples(g)
        vals = second_order_polynomial_values(h, f, g, taus, nq_max=nq)
        coeffs, res = fit_quadratic(taus, vals)
        poly_worst = max(poly_worst, res)
        a2[g] = LieElement.restricted(0, coeffs / 2.0, nq)
    pkg.residuals["second_order_polynomiality"] = float(poly_worst)

    coc_worst = 0.0
    for g, d in pairs:
        lhs = a2[g * d]
        rhs = slash_poly(a2[g], d) + a2[d] + 0.5 * bracket(slash_poly(a1[g], d), a1[d])
        coc_worst = max(coc_worst, lhs.max_abs_diff(rhs))
    pkg.residuals["second_order_cocycle"] = float(coc_worst)

    pkg.order = 2
    pkg.second_order_cocycle = a2
    pkg.second_order_section = b2
    pkg.pairs = pairs
    pkg.residuals["second_order_section"] = second_order_section_residual(
        pkg, tau_samples=tau_samples
    )
    return pkg


def second_order_section_residual(pkg, section=None, tau_samples=None):
    """Pointwise residual of the order-2 section equation for a candidate b2.

    Checks, at adjusted tau samples for every non-translation gamma in the
    package, that a2_gamma matches (b2||gamma - b2) - (1/2)[b1||gamma, b1]
    on the d_tau coefficient.  Defaults to the stored section; passing a
    perturbed candidate shows how tightly the equation pins b2 down."""
    if pkg.second_order_cocycle is None:
        raise ValueError("package has no order-2 cocycle")
    b2 = pkg.second_order_section if section is None else section
    f = b2.coeff_d
    nq = f.nq_max
    ei = eichler_integral(pkg.form, nq)
    ei_d = ei.differentiate()
    a2 = pkg.second_order_cocycle
    base_taus = list(DEFAULT_TAU_SAMPLES if tau_samples is None else tau_samples)
    sec_worst = 0.0
    for g in pkg.gammas():
        if g.c == 0 and abs(g.a) == 1:
            continue
        taus = adjust_samples(base_taus, [g])
        for t in taus:
            gt = g.mobius(t)
            j = g.c * t + g.d
            # b2||gamma - b2 on the d_tau coefficient
            lead = j * j * f.evaluate(gt) - f.evaluate(t)
            # [b1||gamma, b1] evaluated honestly: F = 2 j^2 h~(gamma tau),
            # G = 2 h~(tau); F' = 4 c j h~(gamma tau) + 2 h~'(gamma tau)
            F = 2.0 * j * j * ei.evaluate(gt)
            G = 2.0 * ei.evaluate(t)
            Fp = 4.0 * g.c * j * ei.evaluate(gt) + 2.0 * ei_d.evaluate(gt)
            Gp = 2.0 * ei_d.evaluate(t)
            rhs_val = lead - 0.5 * (F * Gp - G * Fp)
            lhs_val = a2[g].coeff_d.evaluate(t)
            sec_worst = max(sec_worst, abs(lhs_val - rhs_val))
    return float(sec_worst)


# -- the universal family ---------------------------------------------------------


def family_operator(pkg, weight):
    """B^(weight) = exp(phi_weight(b1) rho + phi_weight(b2) rho^2)."""
    if not pkg.verified:
        raise ValueError("deformation package failed verification; refusing to deform")
    if pkg.order < 2 or pkg.second_order_section is None:
        raise ValueError("second-order package required")
    nq = pkg.first_order_section.nq_max
    terms = {
        (1,): phi_k(pkg.first_order_section, weight),
        (2,): phi_k(pkg.second_order_section, weight),
    }
    return exp_op(RhoSeriesOp.from_lie(terms, 1, 2, nq))


def deform_form(f, pkg, weight=None):
    """Deform a weight-k form through the universal family; returns the map
    multi-index -> MixedExpansion with

        rho^0: f,   rho^1: 2 h~ f' + k h~' f,
        rho^2: (phi_k(b1)^2/2 + phi_k(b2))(f).
    """
    if isinstance(f, CuspForm):
        weight = f.weight if weight is None else weight
        f = f.expansion(pkg.first_order_section.nq_max)
    if weight is None:
        raise ValueError("weight required when deforming a bare expansion")
    B = family_operator(pkg, weight)
    return B.apply(f)


def ensure_cocycle_entries(pkg, gamma):
    """Extend the package's cocycle maps to a new group element by the same
    fits used at construction time."""
    h = pkg.form
    nq = pkg.first_order_section.nq_max
    if gamma not in pkg.first_order_cocycle:
        coeffs, res = period_polynomial(h, gamma, nq_max=nq)
        pkg.residuals["period_fit"] = max(pkg.residuals.get("period_fit", 0.0), float(res))
        pkg.first_order_cocycle[gamma] = LieElement.restricted(0, coeffs, nq)
    if pkg.order >= 2 and gamma not in pkg.second_order_cocycle:
        if gamma.c == 0 and abs(gamma.a) == 1:
            pkg.second_order_cocycle[gamma] = LieElement.restricted(0, [0.0, 0.0, 0.0], nq)
        else:
            f = pkg.second_order_section.coeff_d
            taus = fit_samples(gamma)
            vals = second_order_polynomial_values(h, f, gamma, taus, nq_max=nq)
            coeffs, res = fit_quadratic(taus, vals)
            pkg.residuals["second_order_polynomiality"] = max(
                pkg.residuals.get("second_order_polynomiality", 0.0), float(res)
            )
            pkg.second_order_cocycle[gamma] = LieElement.restricted(0, coeffs / 2.0, nq)


def cocycle_operator(pkg, gamma, weight):
    """A_gamma = exp(phi_k(a1_gamma) rho + phi_k(a2_gamma) rho^2)."""
    ensure_cocycle_entries(pkg, gamma)
    nq = pkg.first_order_section.nq_max
    terms = {
        (1,): phi_k(pkg.first_order_cocycle[gamma], weight),
        (2,): phi_k(pkg.second_order_cocycle[gamma], weight),
    }
    return exp_op(RhoSeriesOp.from_lie(terms, 1, 2, nq))


def verify_transformation(f, weight, pkg, gamma, tau_samples=None,
                          modularity_tol=1e-6):
    """Residuals, per rho-order and sample, of

        (B f)(gamma tau) = j^k [A_gamma (B f)](tau).

    The input must itself be weight-k modular (checked first)."""
    if isinstance(f, CuspForm):
        weight = f.weight
        f = f.expansion(pkg.first_order_section.nq_max)
    base_taus = list(DEFAULT_TAU_SAMPLES if tau_samples is None else tau_samples)
    taus = adjust_samples(base_taus, [gamma])

    for t in taus:
        gt = gamma.mobius(t)
        j = gamma.c * t + gamma.d
        if abs(f.evaluate(gt) - j ** weight * f.evaluate(t)) > modularity_tol * max(
            1.0, abs(f.evaluate(t))
        ):
            raise ValueError("input expansion is not weight-%d modular" % weight)

    deformed = deform_form(f, pkg, weight)
    A = cocycle_operator(pkg, gamma, weight)
    acted = {
        m: sum(
            (A.coefficient((m1,)).apply(deformed[(m - m1,)]) for m1 in range(m + 1)),
            MixedExpansion.zero(f.nq_max),
        )
        for m in range(3)
    }
    report = {}
    for m in range(3):
        worst = 0.0
        witness = None
        for t in taus:
            gt = gamma.mobius(t)
            j = gamma.c * t + gamma.d
            r = abs(deformed[(m,)].evaluate(gt) - j ** weight * acted[m].evaluate(t))
            if r > worst:
                worst, witness = r, t
        report[f"rho{m}"] = (worst, witness)
    return report


# -- canonical deformation --------------------------------------------------------


def canonical_deformation(gamma, basis=None, tau_samples=None, depth_max=2,
                          nq_max=None, tol=1e-6, shape_tol=1e-8):
    """Apply the letter-to-variable projection to the canonical cocycle: the
    word (i_1,..,i_r) with tensor t contributes
    sum_m t[m] (tau^{m_1} d) ... (tau^{m_r} d) at the multi-index counting the
    letters.  The result is verified to be group-like with restricted-Lie
    logarithm and re-exponentiated in that clean shape."""
    if depth_max > 2:
        raise ValueError("canonical deformations implemented to depth 2")
    series, _dev = canonical_cocycle(gamma, basis, depth_max, tau_samples, nq_max, tol)
    n_vars = len(series.alphabet)
    nq = series.nq_max

    coeffs = {(0,) * n_vars: DiffOp.one(nq)}
    for word, tensor in series.coefficients.items():
        r = len(word)
        if r == 0:
            continue
        idx = tuple(word.count(i) for i in range(n_vars))
        if r == 1:
            poly1 = np.zeros(4, dtype=complex)
            for (m,) in np.ndindex(tensor.shape):
                poly1[m] += tensor[m]
            op = DiffOp(nq, {1: MixedExpansion.from_polynomial(poly1, nq)})
        else:
            poly2 = np.zeros(6, dtype=complex)
            poly1 = np.zeros(6, dtype=complex)
            for m, n in np.ndindex(tensor.shape):
                t = tensor[m, n]
                poly2[m + n] += t
                if n:
                    poly1[m + n - 1] += t * n
            op = DiffOp(
                nq,
                {
                    2: MixedExpansion.from_polynomial(poly2, nq),
                    1: MixedExpansion.from_polynomial(poly1, nq),
                },
            )
        coeffs[idx] = coeffs[idx] + op if idx in coeffs else op

    raw = RhoSeriesOp(n_vars, depth_max, 0, nq, coeffs)
    x = log_op(raw)
    # floor the scale: a near-trivial cocycle (translations) is all noise
    scale = max(x.max_abs(), 1.0)
    clean = {}
    for m, op in x.coeffs.items():
        lie, junk = _restricted_from_diffop(op, 0, nq)
        if junk > shape_tol * scale:
            raise ArithmeticError(
                f"canonical deformation log coefficient at {m} leaves the "
                f"restricted shape (junk {junk:.3e}, scale {scale:.3e})"
            )
        clean[m] = lie.as_diffop()
    return exp_op(x._like(clean))


# -- order-2 matching ---------------------------------------------------------------


def _log_quadratics(op):
    """Quadratics of the restricted log coefficients at rho and rho^2."""
    x = log_op(op)
    out = []
    for m in ((1,), (2,)):
        lie, junk = _restricted_from_diffop(x.coefficient(m), op.weight, op.nq_max)
        if junk > 1e-6 * max(x.max_abs(), 1.0):
            raise ValueError(f"cocycle value is not group-like over the restricted algebra at {m}")
        out.append(lie.quadratic())
    return out


def match_cocycles_order2(target, canonical, gammas=None):
    """Solve ((C, Phi) canonical)_gamma = target_gamma at rho-orders 1 and 2
    for a letterwise scaling Phi = (lambda1, lambda2) and a group element
    C = exp(c1 rho + c2 rho^2) with quadratic coefficients.

    Returns (C, Phi, report).  Large order-1 residual means the first-order
    classes differ (basis mismatch) and is reported rather than raised."""
    if gammas is None:
        gammas = list(target)
    gammas = list(gammas)
    if len(gammas) < 3:
        raise ValueError("need at least 3 sampled elements to match")
    sample = canonical[gammas[0]]
    nq = sample.nq_max

    t1, t2, k1, k2 = {}, {}, {}, {}
    for g in gammas:
        t1[g], t2[g] = _log_quadratics(target[g])
        k1[g], k2[g] = _log_quadratics(canonical[g])

    eye = np.eye(3, dtype=complex)

    # order 1:  t1 = lambda1 k1 + (c1||gamma - c1)
    rows, rhs = [], []
    for g in gammas:
        block = np.zeros((3, 4), dtype=complex)
        block[:, 0] = k1[g]
        block[:, 1:] = slash_matrix_quadratic(g) - eye
        rows.append(block)
        rhs.append(t1[g])
    sol1, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    lam1, c1 = sol1[0], sol1[1:]
    fit1 = float(
        np.max(np.abs(np.vstack(rows) @ sol1 - np.concatenate(rhs)))
    )

    c1_lie = LieElement.restricted(0, c1, nq)

    # order 2:  t2 - lam1^2 k2 - (bracket corrections) = lambda2 k1 + (c2||gamma - c2)
    rows, rhs = [], []
    for g in gammas:
        k1_lie = LieElement.restricted(0, lam1 * k1[g], nq)
        c1_slash = slash_poly(c1_lie, g)
        corr = (
            0.5 * bracket(c1_slash, k1_lie)
            + 0.5 * bracket(c1_slash, -1.0 * c1_lie)
            + 0.5 * bracket(k1_lie, -1.0 * c1_lie)
        )
        lhs = t2[g] - lam1 ** 2 * k2[g] - corr.quadratic()
        block = np.zeros((3, 4), dtype=complex)
        block[:, 0] = k1[g]
        block[:, 1:] = slash_matrix_quadratic(g) - eye
        rows.append(block)
        rhs.append(lhs)
    sol2, *_ = np.linalg.lstsq(np.vstack(rows), np.concatenate(rhs), rcond=None)
    lam2, c2 = sol2[0], sol2[1:]
    fit2 = float(np.max(np.abs(np.vstack(rows) @ sol2 - np.concatenate(rhs))))

    C = exp_op(
        RhoSeriesOp.from_lie(
            {(1,): c1_lie, (2,): LieElement.restricted(0, c2, nq)}, 1, 2, nq
        )
    )
    phi = PhiScaling([[lam1, lam2]])

    verif = 0.0
    for g in gammas:
        image = monoid_act(C, phi, canonical, g)
        verif = max(verif, image.max_abs_diff(target[g]))

    report = {
        "order1_fit": fit1,
        "order2_fit": fit2,
        "verification": float(verif),
        "lambda1": lam1,
        "lambda2": lam2,
    }
    return C, phi, report
