import numpy as np
import pytest

from mfdeform import qpoly
from mfdeform.groups import GroupElement, adjust_tau
from mfdeform.mmv import (
    MMVKey,
    PrecisionError,
    canonical_cocycle,
    iterated_series,
    mmv_classical,
    mmv_functional,
    series_inverse,
    series_product,
    tensor_substitute,
)
from mfdeform.modforms import default_cusp_form, eichler_integral, period_polynomial
from mfdeform.qpoly import MixedExpansion

T = GroupElement(1, 1, 0, 1)
U = GroupElement(2, -1, 5, -2)
NORM = (2j * np.pi) ** 3

# classical integrals against U, frozen from the split-path quadrature route
# (period-extraction route agrees to 1e-16; shuffle identity to 6e-17)
L_U = {
    0: -0.20865138644297654 - 0.2054630920271974j,
    1: -0.052162846610744065 - 0.11557298926529845j,
    2: -0.05136577300679923j,
}


def test_key_validation(h):
    with pytest.raises(ValueError):
        MMVKey([h, h], [0])
    with pytest.raises(ValueError):
        MMVKey([h], [-1])
    with pytest.raises(TypeError):
        MMVKey([1.5], [0])
    # powers beyond the slot bound are the extended functionals, allowed
    assert MMVKey([h], [3]).depth == 1
    assert MMVKey([h, h], [1, 2]).depth == 2


def test_functional_depth_zero_is_one(h):
    one = mmv_functional(MMVKey([], []))
    assert one.max_abs_diff(MixedExpansion.one(one.nq_max)) == 0


def test_functional_fundamental_theorem(h):
    # d/dtau of the tail integral is -h(tau) tau^n
    nq = h.nq_max
    hq = h.expansion()
    for n in range(3):
        lam = mmv_functional(MMVKey([h], [n]), nq)
        mono = MixedExpansion.from_polynomial([0.0] * n + [1.0], nq)
        rhs = -1.0 * qpoly.multiply(hq, mono)
        assert lam.differentiate().max_abs_diff(rhs) < 1e-12 * rhs.coeff_norm()


def test_functional_combination_is_double_primitive(h):
    # tau^2 L0 - 2 tau L1 + L2 reproduces the double Eichler primitive
    nq = h.nq_max
    ei = eichler_integral(h)

    def mono(k):
        return MixedExpansion.from_polynomial([0.0] * k + [1.0], nq)

    combo = (
        qpoly.multiply(mono(2), mmv_functional(MMVKey([h], [0]), nq))
        - 2.0 * qpoly.multiply(mono(1), mmv_functional(MMVKey([h], [1]), nq))
        + mmv_functional(MMVKey([h], [2]), nq)
    )
    assert combo.max_abs_diff(ei) < 1e-12 * ei.coeff_norm()


def test_functional_shuffle(h):
    nq = h.nq_max
    tau = 0.1 + 0.9j
    worst = 0.0
    for m in range(3):
        for n in range(3):
            prod = mmv_functional(MMVKey([h], [m]), nq).evaluate(tau) * mmv_functional(
                MMVKey([h], [n]), nq
            ).evaluate(tau)
            two = mmv_functional(MMVKey([h, h], [m, n]), nq).evaluate(tau) + mmv_functional(
                MMVKey([h, h], [n, m]), nq
            ).evaluate(tau)
            worst = max(worst, abs(prod - two))
    assert worst < 1e-12


def test_classical_frozen_values(h):
    for n, expected in L_U.items():
        got = mmv_classical(MMVKey([h], [n]), U)
        assert abs(got - expected) < 1e-12


def test_classical_two_routes_agree(h):
    for n in range(3):
        a = mmv_classical(MMVKey([h], [n]), U, route="period")
        b = mmv_classical(MMVKey([h], [n]), U, route="quadrature")
        assert abs(a - b) < 1e-9


def test_classical_translation_vanishes(h):
    assert mmv_classical(MMVKey([h], [1]), T) == 0j
    assert mmv_classical(MMVKey([h, h], [1, 2]), T) == 0j


def test_classical_depth2_shuffle(h):
    vals = {}
    for m in range(2):
        for n in range(2):
            vals[(m, n)] = mmv_classical(MMVKey([h, h], [m, n]), U)
    for m in range(2):
        for n in range(2):
            lhs = L_U[m] * L_U[n]
            assert abs(lhs - vals[(m, n)] - vals[(n, m)]) < 1e-9


def test_classical_depth_guard(h):
    with pytest.raises(ValueError):
        mmv_classical(MMVKey([h, h, h], [0, 0, 0]), U)
    with pytest.raises(ValueError):
        mmv_classical(MMVKey([h, h], [0, 0]), U, route="period")


def test_series_depth1_contraction(h):
    # substituting tau into the depth-1 tensor recovers the normalized
    # double primitive exactly
    A = iterated_series([h], 2)
    ei = eichler_integral(h)
    contracted = tensor_substitute(A.coefficients[(0,)], A.nq_max)
    assert contracted.max_abs_diff(NORM * ei) == 0.0


def test_series_product_inverse(h):
    A = iterated_series([h], 2)
    tau = adjust_tau(0.1 + 0.9j, [U])
    An = A.evaluate(tau)
    prod = series_product(An, series_inverse(An))
    assert abs(prod.scalar() - 1.0) < 1e-14
    for w in prod.words():
        if w:
            assert np.max(np.abs(prod.coefficients[w])) < 1e-9 * np.max(
                np.abs(An.coefficients[w]) + 1.0
            )


def test_series_slash_composition(h):
    A = iterated_series([h], 2).evaluate(0.2 + 1.1j)
    g, d = U, GroupElement(3, -1, 10, -3)
    lhs = A.slash(g * d)
    rhs = A.slash(g).slash(d)
    assert lhs.max_abs_diff(rhs) < 1e-12 * max(
        np.max(np.abs(A.coefficients[(0, 0)])), 1.0
    )


def test_series_depth_cap(h):
    with pytest.raises(ValueError):
        iterated_series([h], 5)


def test_cocycle_translation_trivial(h):
    C, dev = canonical_cocycle(T)
    assert abs(C.scalar() - 1.0) < 1e-12
    for w in C.words():
        if w:
            assert np.max(np.abs(C.coefficients[w])) < 1e-9
    assert dev < 1e-9


def test_cocycle_depth1_is_period_polynomial(h):
    # depth-1 slots are the ascending coefficients of -(2 pi i)^3 p_{h,U}(x)
    C, _dev = canonical_cocycle(U)
    t = C.coefficients[(0,)]
    p, _res = period_polynomial(h, U)
    expected = -NORM * np.asarray(p)
    assert np.max(np.abs(t - expected)) < 1e-10 * np.max(np.abs(expected))


def test_cocycle_tau_independence_reported(h):
    C, dev = canonical_cocycle(U)
    assert dev < 1e-6


def test_cocycle_relation(h):
    g, d = U, GroupElement(3, -1, 10, -3)
    Cg, _ = canonical_cocycle(g)
    Cd, _ = canonical_cocycle(d)
    Cgd, _ = canonical_cocycle(g * d)
    rhs = series_product(Cg.slash(d), Cd)
    scale = max(np.max(np.abs(Cgd.coefficients[(0, 0)])), 1.0)
    assert Cgd.max_abs_diff(rhs) < 1e-9 * scale


def test_cocycle_precision_gate(h):
    with pytest.raises(PrecisionError):
        canonical_cocycle(U, tol=1e-30)
