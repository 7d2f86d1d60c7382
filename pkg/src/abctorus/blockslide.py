"""Exact measure-preserving torus maps built from horizontal and vertical
slides over rational step functions, the swap gadgets assembled from them,
and the decomposition of any block-respecting grid permutation into slides.

All coordinates are exact rationals; every application normalizes into
[0,1).  Vectorized evaluation runs on integer lattices so it stays exact.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .towers import GridPermutation


class SlideError(ValueError):
    """Raised for ill-formed slides or non-realizable requests."""


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous piecewise-constant function on [0,1): value ``i``
    holds on [breakpoints[i], breakpoints[i+1]) and the last piece wraps to
    1.  ``period_divisor`` = N records exact 1/N-periodicity."""

    breakpoints: tuple[Fraction, ...]
    values: tuple[Fraction, ...]
    period_divisor: int = 1

    def __post_init__(self) -> None:
        if len(self.breakpoints) != len(self.values) or not self.breakpoints:
            raise SlideError("need one value per breakpoint")
        if self.breakpoints[0] != 0:
            raise SlideError("first breakpoint must be 0")
        for a, b in zip(self.breakpoints, self.breakpoints[1:]):
            if not (0 <= a < b < 1):
                raise SlideError("breakpoints must increase inside [0,1)")
        n = self.period_divisor
        if n < 1:
            raise SlideError("period divisor must be >= 1")
        if n > 1:
            period = Fraction(1, n)
            for x, v in zip(self.breakpoints, self.values):
                shifted = (x + period) % 1
                if self.eval(shifted) != v:
                    raise SlideError("declared period does not hold")

    def eval(self, x: Fraction) -> Fraction:
        x = x % 1
        lo, hi = 0, len(self.breakpoints) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.breakpoints[mid] <= x:
                lo = mid
            else:
                hi = mid - 1
        return self.values[lo]

    def negated(self) -> "StepFunction":
        return StepFunction(self.breakpoints, tuple(-v for v in self.values),
                            self.period_divisor)

    def value_denominator(self) -> int:
        d = 1
        for v in self.values:
            d = _lcm(d, v.denominator)
        return d

    def break_denominator(self) -> int:
        d = 1
        for b in self.breakpoints:
            d = _lcm(d, b.denominator)
        return d


def constant_step(value: Fraction | int) -> StepFunction:
    return StepFunction((Fraction(0),), (Fraction(value),), 1)


def periodic_step(within_breaks: Sequence[Fraction], within_values: Sequence[Fraction],
                  n: int) -> StepFunction:
    """Tile a pattern given on [0, 1/n) to all of [0,1)."""
    period = Fraction(1, n)
    pairs = [(Fraction(b), Fraction(v)) for b, v in zip(within_breaks, within_values)
             if Fraction(b) < period]
    if not pairs or pairs[0][0] != 0:
        raise SlideError("pattern must start at 0 inside its period")
    breaks: list[Fraction] = []
    values: list[Fraction] = []
    for m in range(n):
        for b, v in pairs:
            breaks.append(b + m * period)
            values.append(v)
    # merge equal neighbours for a canonical form
    cb, cv = [breaks[0]], [values[0]]
    for b, v in zip(breaks[1:], values[1:]):
        if v == cv[-1]:
            continue
        cb.append(b)
        cv.append(v)
    return StepFunction(tuple(cb), tuple(cv), n)


@dataclass(frozen=True)
class Slide:
    """One slide: axis "h" moves x1 by step(x2); axis "v" moves x2 by
    step(x1)."""

    axis: str
    step: StepFunction

    def __post_init__(self) -> None:
        if self.axis not in ("h", "v"):
            raise SlideError(f"axis must be 'h' or 'v', got {self.axis!r}")

    def inverse(self) -> "Slide":
        return Slide(self.axis, self.step.negated())


@dataclass(frozen=True)
class BlockSlideMap:
    """Finite composition of slides, applied first to last."""

    steps: tuple[Slide, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def then(self, other: "BlockSlideMap") -> "BlockSlideMap":
        return BlockSlideMap(self.steps + other.steps)

    def inverse(self) -> "BlockSlideMap":
        return BlockSlideMap(tuple(s.inverse() for s in reversed(self.steps)))

    def apply(self, pt: tuple[Fraction, Fraction]) -> tuple[Fraction, Fraction]:
        x, y = Fraction(pt[0]) % 1, Fraction(pt[1]) % 1
        for sl in self.steps:
            if sl.axis == "h":
                x = (x + sl.step.eval(y)) % 1
            else:
                y = (y + sl.step.eval(x)) % 1
        return x, y

    # -- exact vectorized evaluation on an integer lattice ------------------

    def lattice_denominators(self) -> tuple[int, int]:
        """(col, row) denominators every slide of this map respects."""
        dc, dr = 1, 1
        for sl in self.steps:
            if sl.axis == "h":
                dc = _lcm(dc, sl.step.value_denominator())
                dr = _lcm(dr, sl.step.break_denominator())
            else:
                dr = _lcm(dr, sl.step.value_denominator())
                dc = _lcm(dc, sl.step.break_denominator())
        return dc, dr

    def apply_lattice(self, xi: np.ndarray, yi: np.ndarray, dx: int, dy: int
                      ) -> tuple[np.ndarray, np.ndarray]:
        """Exact action on points (xi/dx, yi/dy); dx, dy must absorb every
        slide's denominators."""
        dc, dr = self.lattice_denominators()
        if dx % dc or dy % dr:
            raise SlideError(f"lattice {dx}x{dy} too coarse for {dc}x{dr}")
        xi = np.asarray(xi, dtype=np.int64) % dx
        yi = np.asarray(yi, dtype=np.int64) % dy
        for sl in self.steps:
            if sl.axis == "h":
                cuts = np.array([int(b * dy) for b in sl.step.breakpoints])
                vals = np.array([int(v * dx) for v in sl.step.values])
                piece = np.searchsorted(cuts, yi, side="right") - 1
                xi = (xi + vals[piece]) % dx
            else:
                cuts = np.array([int(b * dx) for b in sl.step.breakpoints])
                vals = np.array([int(v * dy) for v in sl.step.values])
                piece = np.searchsorted(cuts, xi, side="right") - 1
                yi = (yi + vals[piece]) % dy
        return xi, yi

    def atom_action(self, cols: int, rows: int) -> dict:
        """Exact action on the cols x rows atom grid, provided every atom
        maps onto a single atom; raises otherwise."""
        dc, dr = self.lattice_denominators()
        lc, lr = _lcm(dc, cols), _lcm(dr, rows)
        fc, fr = lc // cols, lr // rows
        xi, yi = np.meshgrid(np.arange(lc), np.arange(lr), indexing="ij")
        xo, yo = self.apply_lattice(xi.ravel(), yi.ravel(), lc, lr)
        src = (xi.ravel() // fc) * rows + (yi.ravel() // fr)
        dst = (xo // fc) * rows + (yo // fr)
        action: dict = {}
        for s, d in zip(src, dst):
            if s in action:
                if action[s] != d:
                    raise SlideError("an atom is cut across several atoms")
            else:
                action[s] = d
        out = {}
        for s, d in action.items():
            out[(int(s) // rows, int(s) % rows)] = (int(d) // rows, int(d) % rows)
        if len(set(out.values())) != cols * rows:
            raise SlideError("atom action is not a bijection")
        return out

    def to_json_list(self) -> list:
        return [
            {
                "axis": sl.axis,
                "breakpoints": [str(b) for b in sl.step.breakpoints],
                "values": [str(v) for v in sl.step.values],
                "period_divisor": sl.step.period_divisor,
            }
            for sl in self.steps
        ]

    @classmethod
    def from_json_list(cls, data: list) -> "BlockSlideMap":
        steps = []
        for d in data:
            steps.append(Slide(d["axis"], StepFunction(
                tuple(Fraction(b) for b in d["breakpoints"]),
                tuple(Fraction(v) for v in d["values"]),
                int(d.get("period_divisor", 1)))))
        return cls(tuple(steps))


IDENTITY = BlockSlideMap(())


def rotation_slide(amount: Fraction) -> BlockSlideMap:
    """Horizontal rotation as a one-slide map (empty when trivial)."""
    amount = Fraction(amount) % 1
    if amount == 0:
        return IDENTITY
    return BlockSlideMap((Slide("h", constant_step(amount)),))


# ---------------------------------------------------------------------------
# swap gadgets

def _deck_step(k: int, q: int, upper: bool) -> StepFunction:
    """1/(kq) horizontal move of one half-torus deck (x2-driven)."""
    amount = Fraction(1, k * q)
    if upper:
        return StepFunction((Fraction(0), Fraction(1, 2)), (Fraction(0), amount), 1)
    return StepFunction((Fraction(0), Fraction(1, 2)), (amount, Fraction(0)), 1)


def _lift_step(k: int, q: int, first_skipped: int) -> StepFunction:
    """Half-torus vertical lift of every column class >= first_skipped in
    each 1/q block (x1-driven, 1/q-periodic)."""
    cut = Fraction(first_skipped, k * q)
    if cut >= Fraction(1, q):
        return constant_step(0)
    return periodic_step((Fraction(0), cut), (Fraction(0), Fraction(1, 2)), q)


def column_interchange(i: int, k: int, q: int) -> BlockSlideMap:
    """Eight-slide map exchanging the column classes i and i+1 (mod k) of
    every 1/q block and fixing the other classes setwise.

    Degenerate at k = 1 (single class per block): the composition is still
    a valid slide map but makes no swap claim.
    """
    if not (0 <= i < k):
        raise SlideError(f"need 0 <= i < k, got i={i}, k={k}")
    s1 = _deck_step(k, q, upper=True)
    s2 = _deck_step(k, q, upper=False)
    s3 = _lift_step(k, q, 1)
    s4 = _lift_step(k, q, 2)
    base = BlockSlideMap((
        Slide("h", s1.negated()),
        Slide("v", s3),
        Slide("h", s2),
        Slide("v", constant_step(Fraction(1, 2))),
        Slide("h", s2.negated()),
        Slide("v", s3),
        Slide("h", s1),
        Slide("v", s4),
    ))
    if i == 0:
        return base
    # conjugate by the single-column rotation so classes (i, i+1) swap in
    # every block; a 1/k rotation would shift the pattern by q classes
    shift = Fraction(i, k * q)
    return rotation_slide(-shift).then(base).then(rotation_slide(shift))


def double_two_cycle(k: int, q: int, s: int) -> BlockSlideMap:
    """Swap the top-row cells of column classes (0,1) and (2,3) in every
    1/q block of the kq x s grid, identity on every other cell class."""
    if k < 4:
        raise SlideError(f"the double 2-cycle gadget needs k >= 4, got {k}")
    if s < 1:
        raise SlideError("s must be >= 1")
    f0 = column_interchange(0, k, q)
    ferry = StepFunction((Fraction(0), Fraction(s - 1, s)),
                         (Fraction(0), Fraction(2, k * q)), 1) if s > 1 else \
        constant_step(Fraction(2, k * q))
    g1 = Slide("h", ferry.negated())
    g2 = Slide("h", ferry)
    return BlockSlideMap(f0.steps + (g1,) + f0.steps + (g2,))


def _transposition_base(k: int, q: int, s: int) -> BlockSlideMap:
    """Swap cells (0, s-1) and (1, s-1) of every 1/q block, identity on the
    rest: the halves of both cells are ferried into the top micro-row of
    the doubled grid, swapped there pairwise, and ferried back."""
    if k < 4:
        raise SlideError("the transposition gadget needs k >= 4")
    s2 = 2 * s
    sigma6 = StepFunction(
        (Fraction(0), Fraction(s2 - 2, s2), Fraction(s2 - 1, s2)),
        (Fraction(0), Fraction(2, k * q), Fraction(0)), 1) if s2 > 2 else \
        StepFunction((Fraction(0), Fraction(1, 2)),
                     (Fraction(2, k * q), Fraction(0)), 1)
    cut2 = Fraction(2, k * q)
    cut4 = Fraction(4, k * q)
    if cut4 >= Fraction(1, q):
        sigma7 = periodic_step((Fraction(0), cut2), (Fraction(0), Fraction(1, s2)), q)
    else:
        sigma7 = periodic_step((Fraction(0), cut2, cut4),
                               (Fraction(0), Fraction(1, s2), Fraction(0)), q)
    ferry_in = (Slide("h", sigma6), Slide("v", sigma7))
    ferry_out = (Slide("v", sigma7.negated()), Slide("h", sigma6.negated()))
    middle = double_two_cycle(k, q, s2)
    return BlockSlideMap(ferry_in + middle.steps + ferry_out)


def _class_rotation(cls_index: int, d_rows: int, k: int, q: int, s: int) -> BlockSlideMap:
    """Vertical rotation of one column class by d_rows rows."""
    d_rows %= s
    if d_rows == 0:
        return IDENTITY
    lo = Fraction(cls_index, k * q)
    hi = Fraction(cls_index + 1, k * q)
    breaks = [Fraction(0), lo, hi] if lo > 0 else [Fraction(0), hi]
    vals = [Fraction(0), Fraction(d_rows, s), Fraction(0)] if lo > 0 else \
        [Fraction(d_rows, s), Fraction(0)]
    if hi >= Fraction(1, q):
        breaks, vals = breaks[:-1], vals[:-1]
    return BlockSlideMap((Slide("v", periodic_step(breaks, vals, q)),))


def _column_chain(start: int, target: int, k: int, q: int
                  ) -> tuple[BlockSlideMap, list[int]]:
    """Product of adjacent-class interchanges carrying class ``start`` up to
    ``target`` (start <= target; never wraps a block edge, so blocks stay
    aligned).  Returns the map and the class permutation as an image list.
    """
    if not (0 <= start <= target < k):
        raise SlideError(f"bad ascending chain {start}->{target} in {k} classes")
    perm = list(range(k))
    out = IDENTITY
    for i in range(start, target):
        out = out.then(column_interchange(i, k, q))
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
    return out, perm


def _pair_transposition(a: tuple[int, int], b: tuple[int, int], k: int, q: int,
                        s: int) -> BlockSlideMap:
    """Swap the cell classes a = (col, row) and b of every 1/q block on the
    (k*q) x s grid, identity on every other class; needs k >= 4."""
    if a == b:
        return IDENTITY
    if {a, b} == {(0, s - 1), (1, s - 1)}:
        return _transposition_base(k, q, s)
    if a[0] == b[0]:
        mid = ((a[0] + 1) % k, b[1])
        t1 = _pair_transposition(a, mid, k, q, s)
        t2 = _pair_transposition(b, mid, k, q, s)
        return t1.then(t2).then(t1)
    if a[0] < b[0]:  # route the base pair so both chains run wrap-free
        a, b = b, a
    # position the base pair (0, s-1), (1, s-1) onto (a, b)
    w = _class_rotation(0, a[1] - (s - 1), k, q, s)
    w = w.then(_class_rotation(1, b[1] - (s - 1), k, q, s))
    chain0, perm0 = _column_chain(0, a[0], k, q)
    pos1 = perm0.index(1)
    if pos1 > b[0]:
        raise SlideError("chain routing failed")  # unreachable: pos1 <= 1 <= a[0]
    chain1, _ = _column_chain(pos1, b[0], k, q)
    w = w.then(chain0).then(chain1)
    return w.inverse().then(_transposition_base(k, q, s)).then(w)


def transposition(i: int, j: int, k: int, q: int, s: int) -> BlockSlideMap:
    """Swap the grid cells (0, s-1) and (i, j) of every 1/q block, identity
    on all other cells of the kq x s grid."""
    if (i, j) == (0, s - 1):
        raise SlideError("the pair (0, s-1) with itself is not a transposition")
    if not (0 <= i < k and 0 <= j < s):
        raise SlideError(f"cell ({i},{j}) outside the {k}x{s} block")
    factor = 1 if k >= 4 else (2 if k >= 2 else 4)
    kk = factor * k
    out = IDENTITY
    for o in range(factor):
        out = out.then(_pair_transposition((o, s - 1), (factor * i + o, j),
                                           kk, q, s))
    return out


def permutation_to_blockslide(perm: GridPermutation) -> BlockSlideMap:
    """Realize a block-respecting, rotation-commuting grid permutation as a
    composition of slides, exactly on every atom.

    Column-preserving rotational patterns collapse to a single vertical
    slide; everything else goes through products of cell transpositions
    (with the column classes refined in half or quarters when the block
    holds fewer than four of them).
    """
    k, q, s = perm.k, perm.q, perm.s
    shifts = perm.rotational_shifts()
    if shifts is not None:
        if all(d == 0 for d in shifts):
            return IDENTITY
        breaks, vals = [], []
        for t in range(k):
            breaks.append(Fraction(t, k * q))
            vals.append(Fraction(shifts[t], s))
        # merge equal neighbours inside the period
        cb, cv = [breaks[0]], [vals[0]]
        for bb, vv in zip(breaks[1:], vals[1:]):
            if vv == cv[-1]:
                continue
            cb.append(bb)
            cv.append(vv)
        return BlockSlideMap((Slide("v", periodic_step(cb, cv, q)),))
    factor = 1 if k >= 4 else (2 if k >= 2 else 4)
    kk = factor * k
    # refined pattern, moving both column slivers of a cell rigidly
    image = {}
    for r in range(s):
        for i in range(k):
            i2, r2 = perm.pattern_image(i, r)
            for o in range(factor):
                image[(factor * i + o, r)] = (factor * i2 + o, r2)
    # cycle decomposition into transpositions, applied first to last
    pairs = []
    seen = set()
    for start in sorted(image):
        if start in seen or image[start] == start:
            seen.add(start)
            continue
        cycle = [start]
        cur = image[start]
        while cur != start:
            cycle.append(cur)
            cur = image[cur]
        seen.update(cycle)
        for nxt in cycle[1:]:
            pairs.append((cycle[0], nxt))
    out = IDENTITY
    for a, b in pairs:
        out = out.then(_pair_transposition(a, b, kk, q, s))
    return out


def verify_permutation_realization(perm: GridPermutation,
                                   bs: BlockSlideMap) -> bool:
    """Exhaustive atom-level equality of the slide map with the permutation."""
    cols, rows = perm.k * perm.q, perm.s
    action = bs.atom_action(cols, rows)
    for c in range(cols):
        for r in range(rows):
            if action[(c, r)] != perm.atom_image(c, r):
                return False
    return True
