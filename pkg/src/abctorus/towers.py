"""Abstract combinatorics of the untwisted conjugation scheme: grid
partitions of the torus, tower permutations built from letter tuples,
periodic processes, and the driver that turns a construction sequence into
stage data whose tower names reproduce the word families.

Everything here is exact integer combinatorics; the geometric realization
lives in :mod:`abctorus.blockslide` and :mod:`abctorus.analytic`.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .params import StageParams
from .words import ConstructionSequence, Word, circular_word


class GridError(ValueError):
    """Raised for ill-formed grids, permutations, or processes."""


@dataclass(frozen=True)
class Grid:
    """The kq x s rectangle partition of the torus; atom (i, j) is
    [i/(kq), (i+1)/(kq)) x [j/s, (j+1)/s)."""

    cols: int
    rows: int

    def __post_init__(self) -> None:
        if self.cols < 1 or self.rows < 1:
            raise GridError(f"bad grid {self.cols}x{self.rows}")

    @property
    def atom_area(self) -> Fraction:
        return Fraction(1, self.cols * self.rows)


@dataclass(frozen=True)
class GridPermutation:
    """Permutation of the kq x s atoms that commutes with rotation by 1/q
    and keeps every width-1/q column block fixed setwise.

    Such a permutation is determined by its pattern on the k x s
    fundamental block, repeated in every block; atoms move rigidly by
    translation.  ``pattern[r*k + i]`` is the image (i', r') of cell
    (i, r) with 0 <= i, i' < k.
    """

    k: int
    q: int
    s: int
    pattern: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if self.k < 1 or self.q < 1 or self.s < 1:
            raise GridError("k, q, s must be positive")
        if len(self.pattern) != self.k * self.s:
            raise GridError("pattern size mismatch")
        seen = set()
        for (i2, r2) in self.pattern:
            if not (0 <= i2 < self.k and 0 <= r2 < self.s):
                raise GridError("pattern target out of the fundamental block")
            seen.add((i2, r2))
        if len(seen) != self.k * self.s:
            raise GridError("pattern is not a bijection")

    @property
    def grid(self) -> Grid:
        return Grid(self.k * self.q, self.s)

    @classmethod
    def identity(cls, k: int, q: int, s: int) -> "GridPermutation":
        return cls(k, q, s, tuple((i, r) for r in range(s) for i in range(k)))

    @classmethod
    def from_mapping(cls, k: int, q: int, s: int,
                     mapping: dict) -> "GridPermutation":
        """Build from a full kq x s atom mapping, verifying commutation with
        the 1/q rotation and untwistedness."""
        cols = k * q
        if len(mapping) != cols * s:
            raise GridError("mapping must cover every atom")
        for (c, r), (c2, r2) in mapping.items():
            if c // k != c2 // k:
                raise GridError(f"atom ({c},{r}) leaves its column block")
            cc, rr = mapping[((c + k) % cols, r)]
            if cc != (c2 + k) % cols or rr != r2:
                raise GridError("mapping does not commute with the 1/q rotation")
        pattern = tuple(mapping[(i, r)] for r in range(s) for i in range(k))
        return cls(k, q, s, pattern)

    def pattern_image(self, i: int, r: int) -> tuple[int, int]:
        return self.pattern[r * self.k + i]

    def atom_image(self, c: int, r: int) -> tuple[int, int]:
        block, i = divmod(c, self.k)
        i2, r2 = self.pattern_image(i, r)
        return block * self.k + i2, r2

    def inverse(self) -> "GridPermutation":
        inv = [None] * (self.k * self.s)
        for r in range(self.s):
            for i in range(self.k):
                i2, r2 = self.pattern_image(i, r)
                inv[r2 * self.k + i2] = (i, r)
        return GridPermutation(self.k, self.q, self.s, tuple(inv))

    def rotational_shifts(self) -> tuple[int, ...] | None:
        """Per-column-class row shifts d_i when the pattern is
        (i, r) -> (i, r + d_i mod s); None otherwise."""
        shifts = []
        for i in range(self.k):
            i2, r2 = self.pattern_image(i, 0)
            if i2 != i:
                return None
            d = r2 % self.s
            for r in range(self.s):
                if self.pattern_image(i, r) != (i, (r + d) % self.s):
                    return None
            shifts.append(d)
        return tuple(shifts)

    def micro_image(self, c: int, r: int, micro_cols: int, micro_rows: int) -> tuple[int, int]:
        """Rigid-translation action on a finer grid refining kq x s."""
        cols = self.k * self.q
        if micro_cols % cols or micro_rows % self.s:
            raise GridError("microgrid must refine the permutation grid")
        fc = micro_cols // cols
        fr = micro_rows // self.s
        ac, ar = c // fc, r // fr
        ac2, ar2 = self.atom_image(ac, ar)
        return (c + (ac2 - ac) * fc) % micro_cols, (r + (ar2 - ar) * fr) % micro_rows


def _band_of(row: int, band_rows: int) -> int:
    return row // band_rows


def h_from_words(tuples: Sequence[Sequence[int]], prev: StageParams,
                 s_next: int) -> GridPermutation:
    """Tower permutation of the (k_n q_n) x s_{n+1} grid sending, for each
    row r, the cell in column class t into the row band named by letter t
    of the r-th tuple.

    Prefers the column-preserving assignment (each class rotated by a fixed
    row shift) when the tuples allow it; otherwise falls back to a
    deterministic order-based assignment within each band.
    """
    k, s_prev = prev.k, prev.s
    if s_next % s_prev:
        raise GridError(f"s_prev={s_prev} must divide s_next={s_next}")
    if s_next > s_prev ** k:
        raise GridError(f"s_next={s_next} exceeds growth cap {s_prev}^{k}")
    tuples = [tuple(t) for t in tuples]
    if len(tuples) != s_next:
        raise GridError(f"need {s_next} tuples, got {len(tuples)}")
    need = k // s_prev
    if need * s_prev != k:
        raise GridError(f"s_prev={s_prev} does not divide k={k}")
    for t in tuples:
        if len(t) != k:
            raise GridError(f"tuple length {len(t)} != k={k}")
        for sym in range(s_prev):
            cnt = sum(1 for x in t if x == sym)
            if cnt != need:
                raise GridError(
                    f"symbol {sym} occurs {cnt} times, expected {need}, in {t}")
    band_rows = s_next // s_prev

    # column-preserving attempt: one row shift per column class
    shifts: list[int] | None = []
    for t in range(k):
        found = None
        for d in range(s_next):
            if all(_band_of((r + d) % s_next, band_rows) == tuples[r][t]
                   for r in range(s_next)):
                found = d
                break
        if found is None:
            shifts = None
            break
        shifts.append(found)
    pattern: list[tuple[int, int]] = [None] * (k * s_next)
    if shifts is not None:
        for r in range(s_next):
            for t in range(k):
                pattern[r * k + t] = (t, (r + shifts[t]) % s_next)
    else:
        # deterministic fill: sources in (row, class) order, band targets in
        # (row, column) order
        for sym in range(s_prev):
            sources = [(r, t) for r in range(s_next) for t in range(k)
                       if tuples[r][t] == sym]
            targets = [(c, row) for row in range(sym * band_rows, (sym + 1) * band_rows)
                       for c in range(k)]
            if len(sources) != len(targets):
                raise GridError("band capacity mismatch")  # unreachable
            for (r, t), (c, row) in zip(sources, targets):
                pattern[r * k + t] = (c, row)
    return GridPermutation(k, prev.q, s_next, tuple(pattern))


def tuples_of_permutation(h: GridPermutation, s_prev: int) -> list[tuple[int, ...]]:
    """Read back, for every row, the band tuple the permutation encodes."""
    if h.s % s_prev:
        raise GridError("s_prev must divide the permutation's row count")
    band_rows = h.s // s_prev
    out = []
    for r in range(h.s):
        letters = []
        for t in range(h.k):
            _, r2 = h.pattern_image(t, r)
            letters.append(_band_of(r2, band_rows))
        out.append(tuple(letters))
    return out


@dataclass(frozen=True)
class AbcStage:
    """One stage of the driven construction: parameters, the tower
    permutation that produced it (None at stage 0), and the symbolic names
    of its towers, indexed by row."""

    params: StageParams
    h: GridPermutation | None
    tower_words: tuple[Word, ...]


def tower_names(prev_names: Sequence[Word], h: GridPermutation,
                prev: StageParams) -> tuple[Word, ...]:
    """Names of the next stage's towers, read off the permutation by band
    membership and interleaved with the previous names."""
    if len(prev_names) != prev.s:
        raise GridError(f"need {prev.s} previous names, got {len(prev_names)}")
    tuples = tuples_of_permutation(h, prev.s)
    return tuple(
        circular_word([prev_names[sym] for sym in t], prev.p, prev.q, prev.l)
        for t in tuples)


def drive_from_construction_sequence(seq: ConstructionSequence) -> list[AbcStage]:
    """Build the stage data straight from a construction sequence; the
    round-trip identity (tower names == word families) is left to callers
    and tests so the extraction stays independent."""
    for par in seq.stage_params[:-1]:
        if par.k % par.s:
            raise GridError(f"s_{par.n}={par.s} does not divide k_{par.n}={par.k}")
    stages = [AbcStage(seq.stage_params[0], None, seq.families[0].words)]
    for n in range(seq.depth):
        prev_par = seq.stage_params[n]
        nxt_par = seq.stage_params[n + 1]
        h = h_from_words(seq.prescriptions[n], prev_par, nxt_par.s)
        names = tower_names(stages[n].tower_words, h, prev_par)
        stages.append(AbcStage(nxt_par, h, names))
    return stages


def requirements_check(stages: Sequence[AbcStage]) -> dict:
    """Finite-stage checks of the scheme's standing requirements.

    R1: the row-count schedule never decreases and divides along the chain
        (the strictly-increasing trend toward infinity is reported as a
        separate flag, since bounded desk-scale schedules stall).
    R2: every row band receives exactly k_n/s_n column classes per row.
    R3: distinct rows encode distinct band tuples.
    """
    if len(stages) < 2:
        raise GridError("need at least two stages")
    s_sched = [st.params.s for st in stages]
    r1_nondecreasing = all(b >= a for a, b in zip(s_sched, s_sched[1:]))
    r1_divides = all(b % a == 0 for a, b in zip(s_sched, s_sched[1:]))
    r1_strict = all(b > a for a, b in zip(s_sched, s_sched[1:]))
    r2_violations = []
    r3_violations = []
    for n in range(1, len(stages)):
        prev = stages[n - 1].params
        h = stages[n].h
        if h is None:
            continue
        need = prev.k // prev.s
        band_rows = h.s // prev.s
        for r in range(h.s):
            counts = [0] * prev.s
            for t in range(h.k):
                _, r2 = h.pattern_image(t, r)
                counts[_band_of(r2, band_rows)] += 1
            for sym, cnt in enumerate(counts):
                if cnt != need:
                    r2_violations.append((n, r, sym, cnt, need))
        tuples = tuples_of_permutation(h, prev.s)
        seen: dict = {}
        for r, t in enumerate(tuples):
            if t in seen:
                r3_violations.append((n, seen[t], r, t))
            else:
                seen[t] = r
    return {
        "r1_pass": r1_nondecreasing and r1_divides,
        "r1_strictly_increasing": r1_strict,
        "r2_pass": not r2_violations,
        "r2_violations": r2_violations,
        "r3_pass": not r3_violations,
        "r3_violations": r3_violations,
        "all_pass": (r1_nondecreasing and r1_divides and not r2_violations
                     and not r3_violations),
    }


# ---------------------------------------------------------------------------
# periodic processes and their comparison


@dataclass(frozen=True)
class PeriodicProcess:
    """A partition of a microgrid into equal-size atoms together with a
    permutation of the atoms all of whose cycles share one length."""

    cols: int
    rows: int
    atoms: tuple[frozenset, ...]
    tau: tuple[int, ...]
    bases: tuple[int, ...]

    def __post_init__(self) -> None:
        total = self.cols * self.rows
        sizes = {len(a) for a in self.atoms}
        if len(sizes) != 1:
            raise GridError("atoms must have equal size")
        if sum(len(a) for a in self.atoms) != total:
            raise GridError("atoms must cover the microgrid")
        union = set()
        for a in self.atoms:
            union |= a
        if len(union) != total:
            raise GridError("atoms must be disjoint")
        if sorted(self.tau) != list(range(len(self.atoms))):
            raise GridError("tau must be a permutation of the atoms")
        lengths = set()
        seen = set()
        for start in range(len(self.atoms)):
            if start in seen:
                continue
            n, cur = 0, start
            while True:
                seen.add(cur)
                cur = self.tau[cur]
                n += 1
                if cur == start:
                    break
            lengths.add(n)
        if len(lengths) != 1:
            raise GridError(f"cycle lengths differ: {sorted(lengths)}")
        object.__setattr__(self, "_height", lengths.pop())
        covered: set = set()
        for b in self.bases:
            if b in covered:
                raise GridError("bases must pick one atom per cycle")
            cur = b
            for _ in range(self._height):
                covered.add(cur)
                cur = self.tau[cur]
        if len(covered) != len(self.atoms):
            raise GridError("bases must pick one atom per cycle")

    @property
    def height(self) -> int:
        return self._height

    @property
    def atom_mass(self) -> Fraction:
        return Fraction(len(self.atoms[0]), self.cols * self.rows)

    def positions(self) -> list[tuple[int, int]]:
        """(tower index, level) of every atom."""
        pos = [None] * len(self.atoms)
        for tower, b in enumerate(self.bases):
            cur = b
            for lvl in range(self.height):
                pos[cur] = (tower, lvl)
                cur = self.tau[cur]
        return pos


def rotation_process(p: int, q: int, s: int, micro_cols: int,
                     micro_rows: int) -> PeriodicProcess:
    """The q x s grid permuted by the rotation with numerator p."""
    if micro_cols % q or micro_rows % s:
        raise GridError("microgrid must refine the q x s grid")
    fc, fr = micro_cols // q, micro_rows // s
    atoms = []
    index = {}
    for i in range(q):
        for j in range(s):
            index[(i, j)] = len(atoms)
            atoms.append(frozenset(
                (i * fc + a, j * fr + b) for a in range(fc) for b in range(fr)))
    tau = [0] * len(atoms)
    for (i, j), idx in index.items():
        tau[idx] = index[((i + p) % q, j)]
    bases = tuple(index[(0, j)] for j in range(s))
    return PeriodicProcess(micro_cols, micro_rows, tuple(atoms), tuple(tau), bases)


def stage_process(stages: Sequence[AbcStage], n: int, micro_cols: int,
                  micro_rows: int) -> PeriodicProcess:
    """Periodic process of stage n: the stage grid pushed through the
    composed tower permutations, cycled by the stage rotation."""
    par = stages[n].params
    q, s = par.q, par.s
    if micro_cols % q or micro_rows % s:
        raise GridError("microgrid must refine the stage grid")
    fc, fr = micro_cols // q, micro_rows // s
    hs = [stages[m].h for m in range(1, n + 1)]
    atoms = []
    index = {}
    for i in range(q):
        for j in range(s):
            cells = [(i * fc + a, j * fr + b) for a in range(fc) for b in range(fr)]
            for h in reversed(hs):  # h_n acts first in h_1 ∘ ... ∘ h_n
                cells = [h.micro_image(c, r, micro_cols, micro_rows) for c, r in cells]
            index[(i, j)] = len(atoms)
            atoms.append(frozenset(cells))
    tau = [0] * len(atoms)
    for (i, j), idx in index.items():
        tau[idx] = index[((i + par.p) % q, j)]
    bases = tuple(index[(0, j)] for j in range(s))
    return PeriodicProcess(micro_cols, micro_rows, tuple(atoms), tuple(tau), bases)


@dataclass(frozen=True)
class EpsApproxResult:
    ok: bool
    mass: Fraction
    exceptional_atoms: tuple[int, ...]
    reason: str


def epsilon_approximation_check(coarse: PeriodicProcess, fine: PeriodicProcess,
                                eps: Fraction | float) -> EpsApproxResult:
    """Decide whether the fine process approximates the coarse one with an
    explicitly constructed exceptional set of mass below ``eps``.

    The exceptional set is a union of whole fine atoms, grown greedily:
    first the fine atoms straddling coarse atoms, then the successors that
    break level-to-level tracking.  Levels wholly inside the exceptional
    set are exempt from the equal-remaining-mass condition.
    """
    if (coarse.cols, coarse.rows) != (fine.cols, fine.rows):
        raise GridError("processes must share one microgrid")
    cell_owner = {}
    for idx, a in enumerate(coarse.atoms):
        for cell in a:
            cell_owner[cell] = idx
    host = []
    exceptional = set()
    for b_idx, b in enumerate(fine.atoms):
        owners = {cell_owner[cell] for cell in b}
        if len(owners) == 1:
            host.append(owners.pop())
        else:
            host.append(None)
            exceptional.add(b_idx)
    coarse_pos = coarse.positions()
    top = coarse.height - 1
    while True:
        new = set()
        for b_idx in range(len(fine.atoms)):
            if b_idx in exceptional or host[b_idx] is None:
                continue
            a_idx = host[b_idx]
            if coarse_pos[a_idx][1] == top:
                continue
            succ = fine.tau[b_idx]
            if succ in exceptional:
                continue
            if host[succ] != coarse.tau[a_idx]:
                new.add(succ)
        if not new:
            break
        exceptional |= new
    # equal remaining mass on surviving levels (whole-atom exceptional set
    # keeps the remaining masses in {0, atom mass})
    masses = set()
    for b_idx in range(len(fine.atoms)):
        if b_idx not in exceptional:
            masses.add(len(fine.atoms[b_idx]))
    if len(masses) > 1:
        return EpsApproxResult(False, Fraction(1), tuple(sorted(exceptional)),
                               "surviving levels have unequal mass")
    mass = fine.atom_mass * len(exceptional)
    ok = mass < Fraction(eps).limit_denominator(10 ** 12) if isinstance(eps, float) \
        else mass < eps
    return EpsApproxResult(ok, mass, tuple(sorted(exceptional)),
                           "" if ok else f"exceptional mass {mass} >= {eps}")
