import pytest

from mfdeform.groups import (
    DEFAULT_TAU_SAMPLES,
    GroupContext,
    GroupElement,
    IDENTITY,
    IM_FLOOR,
    InfeasibleSampleError,
    adjust_samples,
    adjust_tau,
    default_context,
    feasible_y_interval,
    imag_after,
    is_feasible,
    is_member,
    sample_feasible_pairs,
    sample_feasible_words,
)

T = GroupElement(1, 1, 0, 1)
U = GroupElement(2, -1, 5, -2)


def test_determinant_enforced():
    with pytest.raises(ValueError):
        GroupElement(1, 0, 0, 2)


def test_product_and_inverse():
    g = T * U
    assert g.entries() == (7, -3, 5, -2)
    assert (g * g.inverse()).entries() == IDENTITY.entries()


def test_membership():
    assert is_member(U, 5)
    assert not is_member(GroupElement(1, 0, 1, 1), 5)


def test_mobius_and_j():
    tau = 0.3 + 0.7j
    g = U
    expected = (2 * tau - 1) / (5 * tau - 2)
    assert abs(g.mobius(tau) - expected) < 1e-15
    assert g.j(tau) == 5 * tau - 2


def test_mobius_preserves_upper_half_plane():
    tau = 0.1 + 0.9j
    assert U.mobius(tau).imag > 0
    assert abs(U.mobius(tau).imag - imag_after(U, tau)) < 1e-15


def test_context_validates_seeds():
    with pytest.raises(ValueError):
        GroupContext(5, (GroupElement(1, 0, 1, 1),))


def test_feasibility_c_window():
    # floor 0.05: image height maxes at 1/(2|c| y ...) so |c| <= 20 is the cutoff
    assert is_feasible([U])
    assert is_feasible([GroupElement(-4, 1, -25, 6)]) is False


def test_known_joint_infeasibility():
    # U and TUT pull tau toward different poles; no single tau clears both
    tut = T * U * T
    assert is_feasible([U]) and is_feasible([tut])
    assert not is_feasible([U, tut])


def test_adjust_tau_feasible_result():
    t = adjust_tau(0.4 + 0.21j, [U])
    assert t.imag >= IM_FLOOR
    assert imag_after(U, t) >= IM_FLOOR


def test_adjust_tau_raises_naming_element():
    tut = T * U * T
    with pytest.raises(InfeasibleSampleError) as exc:
        adjust_tau(0.1 + 0.9j, [U, tut])
    assert "[[" in str(exc.value)


def test_adjust_samples_distinct():
    out = adjust_samples(list(DEFAULT_TAU_SAMPLES), [U])
    assert len({round(t.real, 9) + 1j * round(t.imag, 9) for t in out}) == 3
    for t in out:
        assert imag_after(U, t) >= IM_FLOOR


def test_feasible_y_interval_contains_witness():
    w = feasible_y_interval(U, -(-2) / 5)
    assert w is not None
    lo, hi = w
    assert lo < hi


def test_sample_words_deterministic_and_feasible(ctx):
    a = sample_feasible_words(ctx, 12, 6, 31)
    b = sample_feasible_words(ctx, 12, 6, 31)
    assert [g.entries() for g in a] == [g.entries() for g in b]
    for g in a:
        assert is_member(g, 5)
        assert is_feasible([g])


def test_sample_pairs_joint_feasibility(ctx):
    for g, d in sample_feasible_pairs(ctx, 8, 6, 7):
        assert is_feasible([g]) and is_feasible([d]) and is_feasible([g * d])
        assert is_feasible([d, g * d])


def test_sampler_stall_names_offender():
    wild = GroupContext(5, (GroupElement(3, -1, 25, -8),))
    with pytest.raises(InfeasibleSampleError) as exc:
        # length-1 words are all |c| = 25, never feasible
        sample_feasible_words(wild, 3, 1, 0)
    assert "25" in str(exc.value)
