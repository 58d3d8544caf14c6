"""Integer 2x2 matrices of determinant one, congruence-subgroup membership,
Moebius action, automorphy factors, and deterministic word sampling.

Also houses the feasibility logic for the Im >= 0.05 evaluation-point
contract: every series evaluation point tau (and its gamma-images) must stay
above the floor so that q-truncation error is negligible.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

IM_FLOOR = 0.05
MAX_WORD_LENGTH = 12

DEFAULT_TAU_SAMPLES = (0.1 + 0.9j, -0.2 + 1.1j, 0.05 + 0.75j)


class InfeasibleSampleError(ValueError):
    pass


class GroupElement:
    """Row-major integer matrix (a b; c d) with ad - bc = 1."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a, b, c, d):
        a, b, c, d = int(a), int(b), int(c), int(d)
        if a * d - b * c != 1:
            raise ValueError(f"determinant is {a * d - b * c}, must be 1")
        self.a, self.b, self.c, self.d = a, b, c, d

    @classmethod
    def from_matrix(cls, m):
        (a, b), (c, d) = m
        return cls(a, b, c, d)

    def __mul__(self, other):
        return GroupElement(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self):
        return GroupElement(self.d, -self.b, -self.c, self.a)

    def mobius(self, tau):
        if tau.imag <= 0:
            raise ValueError("Moebius action needs Im(tau) > 0")
        return (self.a * tau + self.b) / (self.c * tau + self.d)

    def j(self, tau):
        return self.c * tau + self.d

    def entries(self):
        return (self.a, self.b, self.c, self.d)

    def __eq__(self, other):
        return isinstance(other, GroupElement) and self.entries() == other.entries()

    def __hash__(self):
        return hash(self.entries())

    def __repr__(self):
        return f"[[{self.a},{self.b}],[{self.c},{self.d}]]"


IDENTITY = GroupElement(1, 0, 0, 1)


def mobius(gamma, tau):
    return gamma.mobius(tau)


def automorphy_j(gamma, tau):
    return gamma.j(tau)


def is_member(gamma, level):
    return gamma.a * gamma.d - gamma.b * gamma.c == 1 and gamma.c % level == 0


@dataclass(frozen=True)
class GroupContext:
    level: int
    seed_elements: tuple
    label: str = ""

    def __post_init__(self):
        if self.level < 1:
            raise ValueError("level must be positive")
        if not self.seed_elements:
            raise ValueError("seed element set must be nonempty")
        for g in self.seed_elements:
            if not is_member(g, self.level):
                raise ValueError(f"seed {g} is not in Gamma_0({self.level})")
        object.__setattr__(self, "seed_elements", tuple(self.seed_elements))


def default_context():
    t = GroupElement(1, 1, 0, 1)
    u = GroupElement(2, -1, 5, -2)
    return GroupContext(level=5, seed_elements=(t, u), label="Gamma0(5)")


def sample_words(ctx, count, max_length, seed):
    """Deterministic products of seed elements and inverses, word length <= max_length."""
    if count < 1 or max_length < 1:
        raise ValueError("count and max_length must be >= 1")
    if max_length > MAX_WORD_LENGTH:
        raise ValueError(f"max_length capped at {MAX_WORD_LENGTH} (entry growth)")
    rng = random.Random(seed)
    letters = list(ctx.seed_elements) + [g.inverse() for g in ctx.seed_elements]
    out = []
    for _ in range(count):
        length = rng.randint(1, max_length)
        g = IDENTITY
        for _ in range(length):
            g = g * rng.choice(letters)
        assert is_member(g, ctx.level)
        assert max(abs(e) for e in g.entries()) < 2**62
        out.append(g)
    return out


# -- evaluation-point feasibility -----------------------------------------


def imag_after(gamma, tau):
    return tau.imag / abs(gamma.j(tau)) ** 2


def feasible_y_interval(gamma, x, floor=IM_FLOOR):
    """y-window such that tau = x + iy has Im(tau) >= floor and
    Im(gamma tau) >= floor.  None when empty."""
    c, d = gamma.c, gamma.d
    if c == 0:
        return (floor, math.inf)
    abs_cxd2 = (c * x + d) ** 2
    disc = 1.0 - 4.0 * floor * floor * c * c * abs_cxd2
    if disc < 0:
        return None
    root = math.sqrt(disc)
    ylo = (1.0 - root) / (2.0 * floor * c * c)
    yhi = (1.0 + root) / (2.0 * floor * c * c)
    lo = max(ylo, floor)
    if lo > yhi:
        return None
    return (lo, yhi)


def _joint_interval(gammas, x, floor):
    lo, hi = floor, math.inf
    for g in gammas:
        w = feasible_y_interval(g, x, floor)
        if w is None:
            return None
        lo, hi = max(lo, w[0]), min(hi, w[1])
        if lo > hi:
            return None
    return (lo, hi)


def _clamp_interior(y, window):
    lo, hi = window
    if not math.isfinite(hi):
        return max(y, lo)
    pad = 0.05 * (hi - lo)
    return min(max(y, lo + pad), hi - pad)


def adjust_tau(tau, gammas, floor=IM_FLOOR):
    """Move tau so that it and all its gamma-images clear the floor.

    Moves along the imaginary direction at fixed real part when possible;
    otherwise falls back to anchor real parts -d/c of the constraining
    elements (several bundled sample points are infeasible at their own real
    part for the default seeds).
    """
    gammas = list(gammas)
    if tau.imag >= floor and all(imag_after(g, tau) >= floor for g in gammas):
        return tau
    w = _joint_interval(gammas, tau.real, floor)
    if w is not None:
        return complex(tau.real, _clamp_interior(tau.imag, w))
    best = None
    for x in [-g.d / g.c for g in gammas if g.c != 0] + [0.0]:
        w = _joint_interval(gammas, x, floor)
        if w is None:
            continue
        lo, hi = w
        width = (hi - lo) if math.isfinite(hi) else 1e9
        if best is None or width > best[0]:
            y = math.sqrt(lo * hi) if math.isfinite(hi) else max(2.0 * lo, 0.75)
            best = (width, complex(x, y))
    if best is None:
        worst = max(gammas, key=lambda g: abs(g.c))
        raise InfeasibleSampleError(
            f"no tau with Im >= {floor} for itself and its image under {worst}"
        )
    return best[1]


def adjust_samples(taus, gammas, floor=IM_FLOOR):
    """Adjust every sample and keep them distinct (spread inside the window)."""
    out = []
    for t in taus:
        t2 = adjust_tau(t, gammas, floor)
        if any(abs(t2 - s) < 1e-9 for s in out):
            w = _joint_interval(list(gammas), t2.real, floor)
            lo, hi = w
            if not math.isfinite(hi):
                hi = lo + 1.0
            for k in range(1, 64):
                frac = (0.618 * k) % 1.0
                cand = complex(t2.real, lo + (0.08 + 0.84 * frac) * (hi - lo))
                if not any(abs(cand - s) < 1e-9 for s in out):
                    t2 = cand
                    break
            else:
                raise InfeasibleSampleError("cannot spread distinct samples in window")
        out.append(t2)
    return out


def is_feasible(gammas, floor=IM_FLOOR):
    """True when some tau clears the floor for every element of gammas jointly."""
    xs = [0.0] + [-g.d / g.c for g in gammas if g.c != 0]
    return any(_joint_interval(gammas, x, floor) is not None for x in xs)


def sample_feasible_words(ctx, count, max_length, seed, floor=IM_FLOOR):
    """Like sample_words but rejects elements with no feasible evaluation point."""
    rng = random.Random(seed)
    letters = list(ctx.seed_elements) + [g.inverse() for g in ctx.seed_elements]
    out = []
    attempts = 0
    last_rejected = None
    while len(out) < count:
        attempts += 1
        if attempts > 200 * count:
            raise InfeasibleSampleError(
                f"rejection sampling stalled; no tau with Im >= {floor} for "
                f"elements like {last_rejected}"
            )
        length = rng.randint(1, max_length)
        g = IDENTITY
        for _ in range(length):
            g = g * rng.choice(letters)
        if is_feasible([g], floor):
            out.append(g)
        else:
            last_rejected = g
    return out


def sample_feasible_pairs(ctx, count, max_length, seed, floor=IM_FLOOR):
    """Pairs (gamma, delta) such that gamma, delta, gamma*delta each admit
    evaluation points, and {delta, gamma*delta} admit a joint one (needed for
    composite-action checks at a shared tau)."""
    rng = random.Random(seed)
    letters = list(ctx.seed_elements) + [g.inverse() for g in ctx.seed_elements]

    def rand_word():
        g = IDENTITY
        for _ in range(rng.randint(1, max_length)):
            g = g * rng.choice(letters)
        return g

    out = []
    attempts = 0
    last_rejected = None
    while len(out) < count:
        attempts += 1
        if attempts > 2000 * count:
            raise InfeasibleSampleError(
                f"pair rejection sampling stalled; no tau with Im >= {floor} "
                f"for elements like {last_rejected}"
            )
        g, h = rand_word(), rand_word()
        gh = g * h
        if not is_feasible([g], floor):
            last_rejected = g
            continue
        if not is_feasible([h], floor):
            last_rejected = h
            continue
        if not (is_feasible([gh], floor) and is_feasible([h, gh], floor)):
            last_rejected = gh
            continue
        out.append((g, h))
    return out
