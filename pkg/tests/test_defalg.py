import numpy as np
import pytest

from mfdeform.defalg import (
    DiffOp,
    LieClosureError,
    LieElement,
    PhiScaling,
    RhoSeriesOp,
    bch,
    bracket,
    compose,
    exp_op,
    inverse_op,
    log_op,
    monoid_act,
    phi_k,
    slash_eval,
    slash_group,
    slash_matrix_quadratic,
    slash_poly,
    solve_linear_coboundary,
)
from mfdeform.groups import GroupElement, adjust_samples
from mfdeform.qpoly import MixedExpansion

T = GroupElement(1, 1, 0, 1)
U = GroupElement(2, -1, 5, -2)
V = GroupElement(3, -1, 10, -3)
NQ = 24


def _rand_expansion(rng, nq=NQ):
    poly = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    out = MixedExpansion.from_polynomial(poly, nq)
    for n in range(1, 5):
        c = complex(rng.standard_normal(), rng.standard_normal())
        out = out + MixedExpansion(nq, {n: np.array([c])})
    return out


def _rand_general(rng, weight=0):
    return LieElement(weight, _rand_expansion(rng), _rand_expansion(rng))


def _rand_restricted(rng, weight=0, nq=NQ):
    p = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    return LieElement.restricted(weight, p, nq)


def _rand_lie_series(rng, rho_max, nq=NQ):
    terms = {}
    for m in range(1, rho_max + 1):
        terms[(m,)] = _rand_general(rng)
    return RhoSeriesOp.from_lie(terms, 1, rho_max, nq)


def test_bracket_antisymmetry_and_jacobi_general():
    rng = np.random.default_rng(7)
    x, y, z = (_rand_general(rng) for _ in range(3))
    anti = bracket(x, y) + bracket(y, x)
    assert anti.max_abs_diff(0.0 * anti) < 1e-12
    jac = (
        bracket(x, bracket(y, z))
        + bracket(y, bracket(z, x))
        + bracket(z, bracket(x, y))
    )
    scale = max(x.coeff_d.coeff_norm(), y.coeff_d.coeff_norm(), z.coeff_d.coeff_norm())
    assert jac.max_abs_diff(0.0 * jac) < 1e-12 * scale**3


def test_bracket_restricted_closure():
    rng = np.random.default_rng(8)
    x, y = _rand_restricted(rng, 4), _rand_restricted(rng, 4)
    z = bracket(x, y)
    assert z.poly_restricted
    # exact: closure drops no cubic remainder, so the two evaluation routes agree
    general = bracket(
        LieElement(4, x.coeff_d, x.coeff_s), LieElement(4, y.coeff_d, y.coeff_s)
    )
    assert z.max_abs_diff(general) < 1e-12


def test_slash_matrix_rows():
    a, b, c, d = U.a, U.b, U.c, U.d
    expected = np.array(
        [
            [d * d, b * d, b * b],
            [2 * c * d, a * d + b * c, 2 * a * b],
            [c * c, a * c, a * a],
        ],
        dtype=complex,
    )
    assert np.array_equal(slash_matrix_quadratic(U), expected)


def test_slash_right_action_law():
    rng = np.random.default_rng(9)
    x = _rand_restricted(rng, 4)
    for g, dd in [(T, U), (U, V), (U, T)]:
        two_step = slash_poly(slash_poly(x, g), dd)
        one_step = slash_poly(x, g * dd)
        assert two_step.max_abs_diff(one_step) < 1e-9 * max(
            np.abs(x.quadratic()).max(), 1.0
        )


def test_slash_matrix_contravariant():
    lhs = slash_matrix_quadratic(V) @ slash_matrix_quadratic(U)
    assert np.array_equal(lhs, slash_matrix_quadratic(U * V))


def test_slash_eval_matches_slash_poly():
    rng = np.random.default_rng(10)
    x = _rand_restricted(rng, 4)
    taus = adjust_samples([0.1 + 0.9j, -0.2 + 1.1j], [U])
    slashed = slash_poly(x, U)
    for tau in taus:
        f, s = slash_eval(x, U, tau)
        assert abs(f - slashed.coeff_d.evaluate(tau)) < 1e-9
        assert abs(s - slashed.coeff_s.evaluate(tau)) < 1e-9


def test_slash_eval_floor():
    rng = np.random.default_rng(11)
    x = _rand_restricted(rng, 4)
    with pytest.raises(ValueError):
        slash_eval(x, U, 2.0 + 0.3j)  # the image under U dips below the floor


def test_phi_weight_shift():
    # tau^2 d_tau gains the scalar 4 tau at weight 4
    x = LieElement.restricted(0, [0.0, 0.0, 0.5], NQ)
    y = phi_k(x, 4)
    assert y.weight == 4
    assert y.coeff_d.max_abs_diff(x.coeff_d) == 0.0
    four_tau = MixedExpansion.from_polynomial(np.array([0.0, 4.0]), NQ)
    assert y.coeff_s.max_abs_diff(four_tau) < 1e-14


def test_phi_zero_is_identity():
    rng = np.random.default_rng(12)
    x = _rand_general(rng)
    y = phi_k(x, 0)
    assert y.max_abs_diff(x) == 0.0


def test_phi_is_lie_homomorphism():
    rng = np.random.default_rng(13)
    x, y = _rand_general(rng), _rand_general(rng)
    lhs = phi_k(bracket(x, y), 6)
    rhs = bracket(phi_k(x, 6), phi_k(y, 6))
    scale = max(lhs.coeff_d.coeff_norm(), 1.0)
    assert lhs.max_abs_diff(rhs) < 1e-10 * scale


def test_phi_commutes_with_slash():
    rng = np.random.default_rng(14)
    x = _rand_restricted(rng, 0)
    lhs = slash_poly(phi_k(x, 4), U)
    rhs = phi_k(slash_poly(x, U), 4)
    assert lhs.max_abs_diff(rhs) < 1e-10


def test_phi_rejects_nonzero_weight():
    rng = np.random.default_rng(15)
    with pytest.raises(ValueError):
        phi_k(_rand_restricted(rng, 4), 6)


def test_diffop_leibniz():
    d = DiffOp(NQ, {1: MixedExpansion.one(NQ)})
    tau = MixedExpansion.from_polynomial(np.array([0.0, 1.0]), NQ)
    mult = DiffOp(NQ, {0: tau})
    comp = d.compose(mult)
    assert comp.coefficient(0).max_abs_diff(MixedExpansion.one(NQ)) == 0.0
    assert comp.coefficient(1).max_abs_diff(tau) == 0.0
    d2 = DiffOp(NQ, {2: MixedExpansion.one(NQ)})
    comp2 = d2.compose(mult)
    two = MixedExpansion.from_polynomial(np.array([2.0]), NQ)
    assert comp2.coefficient(1).max_abs_diff(two) == 0.0
    assert comp2.coefficient(2).max_abs_diff(tau) == 0.0


def test_diffop_compose_apply_consistency():
    rng = np.random.default_rng(16)
    A = DiffOp(NQ, {0: _rand_expansion(rng), 1: _rand_expansion(rng)})
    B = DiffOp(NQ, {0: _rand_expansion(rng), 1: _rand_expansion(rng)})
    F = _rand_expansion(rng)
    lhs = A.compose(B).apply(F)
    rhs = A.apply(B.apply(F))
    assert lhs.max_abs_diff(rhs) < 1e-9 * max(lhs.coeff_norm(), 1.0)


@pytest.mark.parametrize("rho_max", [2, 3, 4])
def test_exp_log_roundtrip(rho_max):
    rng = np.random.default_rng(17 + rho_max)
    x = _rand_lie_series(rng, rho_max)
    back = log_op(exp_op(x))
    assert back.max_abs_diff(x) < 1e-9 * max(x.max_abs(), 1.0)


def test_log_exp_roundtrip_group_side():
    rng = np.random.default_rng(21)
    A = exp_op(_rand_lie_series(rng, 3))
    again = exp_op(log_op(A))
    assert again.max_abs_diff(A) < 1e-9 * max(A.max_abs(), 1.0)


def test_compose_associative():
    rng = np.random.default_rng(22)
    A, B, C = (exp_op(_rand_lie_series(rng, 2)) for _ in range(3))
    lhs = compose(compose(A, B), C)
    rhs = compose(A, compose(B, C))
    assert lhs.max_abs_diff(rhs) < 1e-10 * max(lhs.max_abs(), 1.0)


def test_inverse_op():
    rng = np.random.default_rng(23)
    A = exp_op(_rand_lie_series(rng, 2))
    one = RhoSeriesOp.identity(1, 2, 0, NQ)
    assert compose(A, inverse_op(A)).max_abs_diff(one) < 1e-10 * max(A.max_abs(), 1.0)
    assert compose(inverse_op(A), A).max_abs_diff(one) < 1e-10 * max(A.max_abs(), 1.0)


def test_bch_second_order_term():
    rng = np.random.default_rng(24)
    X, Y = _rand_general(rng).as_diffop(), _rand_general(rng).as_diffop()
    x = RhoSeriesOp(1, 2, 0, NQ, {(1,): X})
    y = RhoSeriesOp(1, 2, 0, NQ, {(1,): Y})
    z = bch(x, y)
    assert z.coefficient((1,)).max_abs_diff(X + Y) < 1e-12 * max(X.max_abs(), 1.0)
    comm = 0.5 * (X.compose(Y) - Y.compose(X))
    assert z.coefficient((2,)).max_abs_diff(comm) < 1e-10 * max(comm.max_abs(), 1.0)


def test_bch_inverse_pair_cancels():
    rng = np.random.default_rng(25)
    x = _rand_lie_series(rng, 2)
    z = bch(x, -1.0 * x)
    assert z.max_abs_diff(RhoSeriesOp.zero(1, 2, 0, NQ)) < 1e-10 * max(x.max_abs(), 1.0)


def test_lie_closure_never_fires_on_lie_inputs():
    # the commutator of first-order operators is first-order; the projection
    # inside bch must stay silent on honest inputs
    rng = np.random.default_rng(26)
    for _ in range(20):
        x = _rand_lie_series(rng, 2)
        y = _rand_lie_series(rng, 2)
        z = bch(x, y)
        for m, op in z.coeffs.items():
            assert op.order() <= 1


def test_lie_closure_fires_on_corrupted_log():
    junk = DiffOp(NQ, {2: MixedExpansion.one(NQ)})
    lead = LieElement.restricted(0, [0.3, 0.1, 0.2], NQ).as_diffop()
    x = RhoSeriesOp(1, 2, 0, NQ, {(1,): lead, (2,): junk})
    A = exp_op(x)
    with pytest.raises(LieClosureError):
        slash_group(A, U)


def test_slash_group_matches_restricted_slash():
    rng = np.random.default_rng(27)
    terms = {(1,): _rand_restricted(rng, 4), (2,): _rand_restricted(rng, 4)}
    x = RhoSeriesOp.from_lie(terms, 1, 2, NQ)
    lhs = slash_group(exp_op(x), U)
    slashed = {m: slash_poly(lie, U) for m, lie in terms.items()}
    rhs = exp_op(RhoSeriesOp.from_lie(slashed, 1, 2, NQ))
    assert lhs.max_abs_diff(rhs) < 1e-9 * max(rhs.max_abs(), 1.0)


def test_slash_group_right_action_law():
    rng = np.random.default_rng(28)
    terms = {(1,): _rand_restricted(rng, 4), (2,): _rand_restricted(rng, 4)}
    A = exp_op(RhoSeriesOp.from_lie(terms, 1, 2, NQ))
    lhs = slash_group(slash_group(A, U), V)
    rhs = slash_group(A, U * V)
    assert lhs.max_abs_diff(rhs) < 1e-8 * max(rhs.max_abs(), 1.0)


def test_from_lie_validation():
    rng = np.random.default_rng(29)
    with pytest.raises(ValueError):
        RhoSeriesOp.from_lie({(0,): _rand_restricted(rng, 4)}, 1, 2, NQ)
    with pytest.raises(ValueError):
        RhoSeriesOp.from_lie(
            {(1,): _rand_restricted(rng, 4), (2,): _rand_restricted(rng, 0)}, 1, 2, NQ
        )


def test_series_constructor_guards():
    with pytest.raises(ValueError):
        RhoSeriesOp(1, 5, 0, NQ)
    with pytest.raises(ValueError):
        RhoSeriesOp(1, 2, 0, NQ, {(1, 0): DiffOp.one(NQ)})
    with pytest.raises(ValueError):
        RhoSeriesOp(1, 2, 0, NQ, {(1,): DiffOp(NQ, {2: MixedExpansion.one(NQ)})})


def test_exp_log_guards():
    with pytest.raises(ValueError):
        exp_op(RhoSeriesOp.identity(1, 2, 0, NQ))
    with pytest.raises(ValueError):
        log_op(RhoSeriesOp.zero(1, 2, 0, NQ))


def test_phi_scaling_powers():
    rng = np.random.default_rng(30)
    x = _rand_lie_series(rng, 2)
    A = exp_op(x)
    lam = 2.0 - 1.0j
    scaled = PhiScaling([[lam]]).apply(A)
    for m in A.indices():
        expect = lam ** sum(m) * A.coefficient(m)
        assert scaled.coefficient(m).max_abs_diff(expect) < 1e-12 * max(
            A.max_abs(), 1.0
        )
    ident = PhiScaling.identity(1).apply(A)
    assert ident.max_abs_diff(A) == 0.0


def test_phi_scaling_compose():
    rng = np.random.default_rng(31)
    A = exp_op(_rand_lie_series(rng, 4))
    first = PhiScaling([[0.5 + 0.2j, -0.3j]])
    second = PhiScaling([[1.5, 0.25 - 0.1j]])
    lhs = second.compose(first).apply(A)
    rhs = second.apply(first.apply(A))
    assert lhs.max_abs_diff(rhs) < 1e-10 * max(rhs.max_abs(), 1.0)


def test_monoid_action_product_law():
    rng = np.random.default_rng(32)
    weight = 4
    A_g = exp_op(
        RhoSeriesOp.from_lie(
            {(1,): _rand_restricted(rng, weight), (2,): _rand_restricted(rng, weight)},
            1,
            2,
            NQ,
        )
    )
    values = {U: A_g}
    C1 = exp_op(
        RhoSeriesOp.from_lie({(1,): _rand_restricted(rng, weight)}, 1, 2, NQ)
    )
    C2 = exp_op(
        RhoSeriesOp.from_lie({(1,): _rand_restricted(rng, weight)}, 1, 2, NQ)
    )
    phi1 = PhiScaling([[1.2 - 0.4j, 0.1j]])
    phi2 = PhiScaling([[0.8 + 0.3j, -0.2]])
    inner = monoid_act(C2, phi2, values, U)
    lhs = monoid_act(C1, phi1, {U: inner}, U)
    C12 = compose(C1, phi1.apply(C2))
    phi12 = phi1.compose(phi2)
    rhs = monoid_act(C12, phi12, values, U)
    assert lhs.max_abs_diff(rhs) < 1e-9 * max(rhs.max_abs(), 1.0)


def test_coboundary_recovery():
    rng = np.random.default_rng(33)
    c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    eye = np.eye(3)
    values = {
        g: (slash_matrix_quadratic(g) - eye) @ c for g in (T, U, T * U, U * T)
    }
    sol, res = solve_linear_coboundary(values)
    assert res < 1e-9
    assert np.max(np.abs(sol - c)) < 1e-9


def test_coboundary_zero():
    values = {g: np.zeros(3, dtype=complex) for g in (T, U, T * U)}
    sol, res = solve_linear_coboundary(values)
    assert res == 0.0
    assert np.max(np.abs(sol)) < 1e-12


def test_coboundary_rank_deficiency_names_invariants():
    # translations fix the constants, so the system cannot see them
    values = {
        T: np.array([0.0, 1.0, 2.0], dtype=complex),
        T * T: np.array([0.0, 2.0, 4.0], dtype=complex),
        T * T * T: np.array([0.0, 3.0, 6.0], dtype=complex),
    }
    with pytest.raises(ValueError, match="invariant"):
        solve_linear_coboundary(values)


def test_coboundary_needs_three():
    with pytest.raises(ValueError):
        solve_linear_coboundary({U: np.zeros(3, dtype=complex)})
