"""Words over a base alphabet plus the two boundary letters, and the
block-interleaving operator that builds each stage's word family from
tuples of the previous stage's words.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .params import ParameterError, StageParams, check_chain, j_table

BOUNDARY_B = "b"
BOUNDARY_E = "e"
STAR = "*"

Word = tuple[str, ...]


class WordError(ValueError):
    """Raised for malformed words or families."""


def word_text(w: Sequence[str]) -> str:
    """Compact rendering: joined when all letters are single chars."""
    if all(len(c) == 1 for c in w):
        return "".join(w)
    return " ".join(w)


def as_word(w: Iterable[str] | str) -> Word:
    if isinstance(w, str):
        return tuple(w)
    return tuple(w)


@dataclass(frozen=True)
class Alphabet:
    """Base letters; the boundary pair is reserved and excluded."""

    letters: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.letters)) != len(self.letters):
            raise WordError("alphabet letters must be distinct")
        if BOUNDARY_B in self.letters or BOUNDARY_E in self.letters:
            raise WordError(f"letters {BOUNDARY_B!r}/{BOUNDARY_E!r} are reserved")
        if not self.letters:
            raise WordError("alphabet must be nonempty")

    @property
    def size(self) -> int:
        return len(self.letters)

    @classmethod
    def default(cls, size: int) -> "Alphabet":
        pool = [c for c in "0123456789acdfghijkmnopqrstuvwxyz" if c not in (BOUNDARY_B, BOUNDARY_E)]
        if size <= len(pool):
            return cls(tuple(pool[:size]))
        return cls(tuple(f"a{i}" for i in range(size)))


@dataclass(frozen=True)
class WordFamily:
    stage: int
    q: int
    words: tuple[Word, ...]

    def __post_init__(self) -> None:
        for w in self.words:
            if len(w) != self.q:
                raise WordError(
                    f"stage {self.stage}: word of length {len(w)} != q={self.q}")

    def __len__(self) -> int:
        return len(self.words)

    def __iter__(self):
        return iter(self.words)


def circular_word(words: Sequence[Word], p: int, q: int, l: int) -> Word:
    """Interleave ``l-1`` copies of each input word with boundary runs whose
    lengths are driven by the modular table of (p, q).

    Block (i, j) is  b^(q - j_i) . w_j^(l-1) . e^(j_i); output length is
    k*l*q^2 for k input words of length q.
    """
    k = len(words)
    if k < 1:
        raise WordError("need at least one input word")
    if l < 2:
        raise WordError(f"l must be >= 2, got {l}")
    for w in words:
        if len(w) != q:
            raise WordError(f"input word of length {len(w)} != q={q}")
    jt = j_table(p, q)
    out: list[str] = []
    for i in range(q):
        b_run = (BOUNDARY_B,) * (q - jt[i])
        e_run = (BOUNDARY_E,) * jt[i]
        for w in words:
            out.extend(b_run)
            out.extend(w * (l - 1))
            out.extend(e_run)
    result = tuple(out)
    assert len(result) == k * l * q * q
    return result


def boundary_count(w: Word) -> int:
    return sum(1 for c in w if c in (BOUNDARY_B, BOUNDARY_E))


class _LetterCodec:
    """Bijective letter -> single-codepoint encoding so word scans can use
    C-speed string search regardless of letter spelling."""

    def __init__(self) -> None:
        self._table: dict[str, str] = {}

    def encode(self, w: Sequence[str]) -> str:
        table = self._table
        out = []
        for c in w:
            enc = table.get(c)
            if enc is None:
                enc = chr(0x100 + len(table))
                table[c] = enc
            out.append(enc)
        return "".join(out)


def unique_readability_check(words: Sequence[Word]) -> tuple[bool, tuple | None]:
    """Brute force over all concatenations uv and interior offsets.

    Returns (True, None) when no family word occurs at a nontrivial offset
    of any concatenation, else (False, (u, v, w, offset)).
    """
    fam = list(words)
    if not fam:
        raise WordError("empty family")
    q = len(fam[0])
    for w in fam:
        if len(w) != q:
            raise WordError("family words must share one length")
    codec = _LetterCodec()
    enc = [codec.encode(w) for w in fam]
    for iu, u in enumerate(enc):
        for iv, v in enumerate(enc):
            uv = u + v
            for iw, w in enumerate(enc):
                pos = uv.find(w, 1)
                if 0 < pos < q:
                    return False, (fam[iu], fam[iv], fam[iw], pos)
    return True, None


def occurrences(needle: Word, haystack: Word) -> int:
    """Number of (overlapping) occurrences of ``needle`` in ``haystack``."""
    n, m = len(haystack), len(needle)
    if m == 0 or m > n:
        return 0
    codec = _LetterCodec()
    hay = codec.encode(haystack)
    ndl = codec.encode(needle)
    count = 0
    pos = hay.find(ndl)
    while pos != -1:
        count += 1
        pos = hay.find(ndl, pos + 1)
    return count


def empirical_cylinder_frequency(w: Word, host: Word) -> Fraction:
    if len(w) > len(host):
        raise WordError("pattern longer than host")
    return Fraction(occurrences(w, host), len(host))


def canonical_factor(w: Word) -> Word:
    """Keep the boundary letters, collapse everything else to '*'."""
    return tuple(c if c in (BOUNDARY_B, BOUNDARY_E) else STAR for c in w)


@dataclass(frozen=True)
class UniformityReport:
    stage: int
    k: int
    s_prev: int
    counts: tuple[tuple[int, ...], ...]  # counts[tuple_index][word_index]
    f_slots: int | None                  # common slot count when strongly uniform
    d_values: tuple[Fraction, ...]       # per stage-n word, parse-count based
    max_deviation: Fraction
    strongly_uniform: bool
    uniform: bool

    def to_json_dict(self) -> dict:
        return {
            "stage": self.stage,
            "k": self.k,
            "s_prev": self.s_prev,
            "counts": [list(row) for row in self.counts],
            "f_slots": self.f_slots,
            "d_values": [str(d) for d in self.d_values],
            "max_deviation": str(self.max_deviation),
            "strongly_uniform": self.strongly_uniform,
            "uniform": self.uniform,
        }


@dataclass(frozen=True)
class ConstructionSequence:
    """Nested word families with the prescriptions that produced them.

    ``prescriptions[n]`` lists, for the step n -> n+1, the index tuples
    (into stage n's word list) whose interleavings form stage n+1;
    its length equals s_{n+1} and tuple length equals k_n.
    """

    alphabet: Alphabet
    stage_params: tuple[StageParams, ...]
    families: tuple[WordFamily, ...]
    prescriptions: tuple[tuple[tuple[int, ...], ...], ...]

    @property
    def depth(self) -> int:
        return len(self.families) - 1

    @classmethod
    def build(cls, alphabet: Alphabet, stage_params: Sequence[StageParams],
              prescriptions: Sequence[Sequence[Sequence[int]]]) -> "ConstructionSequence":
        stage_params = list(stage_params)
        check_chain(stage_params)
        if len(prescriptions) != len(stage_params) - 1:
            raise WordError("need one prescription list per advancement step")
        if stage_params[0].q != 1:
            raise ParameterError("stage 0 must have q_0 = 1")
        if stage_params[0].s != alphabet.size:
            raise ParameterError(
                f"s_0={stage_params[0].s} must equal alphabet size {alphabet.size}")
        families = [WordFamily(0, 1, tuple((c,) for c in alphabet.letters))]
        prescr: list[tuple[tuple[int, ...], ...]] = []
        for n, tuples in enumerate(prescriptions):
            par = stage_params[n]
            nxt = stage_params[n + 1]
            tuples = tuple(tuple(t) for t in tuples)
            if len(tuples) != nxt.s:
                raise WordError(
                    f"step {n}: {len(tuples)} prescriptions but s_{n+1}={nxt.s}")
            prev = families[n]
            for t in tuples:
                if len(t) != par.k:
                    raise WordError(f"step {n}: tuple length {len(t)} != k={par.k}")
                if any(i < 0 or i >= len(prev.words) for i in t):
                    raise WordError(f"step {n}: tuple index out of range")
            new_words = tuple(
                circular_word([prev.words[i] for i in t], par.p, par.q, par.l)
                for t in tuples)
            families.append(WordFamily(n + 1, nxt.q, new_words))
            prescr.append(tuples)
        return cls(alphabet, tuple(stage_params), tuple(families), tuple(prescr))


def uniformity_check(seq: ConstructionSequence, stage: int) -> UniformityReport:
    """Count slot occurrences of each stage-n word in each prescription tuple
    of stage n+1; strong uniformity means all counts equal k_n / s_n.
    """
    if stage < 0 or stage >= seq.depth:
        raise WordError(f"stages {stage} and {stage + 1} must both be present")
    par = seq.stage_params[stage]
    nxt = seq.stage_params[stage + 1]
    n_words = len(seq.families[stage].words)
    tuples = seq.prescriptions[stage]
    counts = tuple(
        tuple(sum(1 for i in t if i == w) for w in range(n_words))
        for t in tuples)
    flat = [c for row in counts for c in row]
    strongly = (par.s * (par.k // par.s) == par.k and
                all(c == par.k // par.s for c in flat))
    f_slots = par.k // par.s if strongly else None
    # parse-count based densities: each slot occurrence contributes (l-1)*q_n
    # occurrences of the word in the parsed stage-(n+1) word
    ratio = Fraction(par.q, nxt.q)
    parse = [[Fraction(c * (par.l - 1) * par.q) for c in row] for row in counts]
    d_values = []
    for w in range(n_words):
        col = [parse[t][w] * ratio for t in range(len(tuples))]
        d_values.append(sum(col, Fraction(0)) / len(col))
    max_dev = Fraction(0)
    for t in range(len(tuples)):
        for w in range(n_words):
            dev = abs(parse[t][w] * ratio - d_values[w])
            if dev > max_dev:
                max_dev = dev
    # uniform here = every stage-n word occurs in every tuple (construction
    # axiom) and the per-tuple deviations vanish
    uniform = all(all(c >= 1 for c in row) for row in counts) and max_dev == 0
    return UniformityReport(stage=stage, k=par.k, s_prev=par.s, counts=counts,
                            f_slots=f_slots, d_values=tuple(d_values),
                            max_deviation=max_dev, strongly_uniform=strongly,
                            uniform=uniform)


class Membership(enum.Enum):
    YES = "yes"
    NO = "no"
    INDETERMINATE = "indeterminate"


def subshift_member(window: Word, seq: ConstructionSequence) -> Membership:
    """Three-valued membership of a finite window in the shift space cut out
    by the construction sequence, decided at built depth.

    Searches the smallest stage n with q_n >= |window| + q_{n-1}, then all
    built stages above it.  NO means "absent from every searched stage";
    membership is a limit notion, so windows too long for the built depth
    come back INDETERMINATE.
    """
    window = tuple(window)
    if not window:
        return Membership.YES
    qs = [fam.q for fam in seq.families]
    for n in range(len(qs)):
        if qs[n] < len(window):
            continue
        for w in seq.families[n].words:
            if occurrences(window, w) > 0:
                return Membership.YES
    # absence is conclusive only once some searched stage leaves a full
    # previous-stage margin around the window
    decisive = any(qs[n] >= len(window) + (qs[n - 1] if n else 0)
                   for n in range(len(qs)))
    return Membership.NO if decisive else Membership.INDETERMINATE


# ---------------------------------------------------------------------------
# word family file format: one word per line, letters space-separated,
# header line "# stage <n> q=<q_n>"

def write_family(path, family: WordFamily) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# stage {family.stage} q={family.q}\n")
        for w in family.words:
            fh.write(" ".join(w) + "\n")


def read_family(path) -> WordFamily:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise WordError(f"{path}: missing header line")
    header = lines[0].lstrip("#").split()
    try:
        stage = int(header[1])
        q = int(header[2].split("=")[1])
    except (IndexError, ValueError) as exc:
        raise WordError(f"{path}: malformed header {lines[0]!r}") from exc
    words = []
    for idx, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        w = tuple(line.split())
        if len(w) != q:
            raise WordError(f"{path}:{idx}: word length {len(w)} != q={q}")
        words.append(w)
    if not words:
        raise WordError(f"{path}: no words")
    return WordFamily(stage, q, tuple(words))
