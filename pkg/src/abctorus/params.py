"""Exact integer/rational bookkeeping for the conjugation parameter sequences.

All arithmetic in this module is exact (Python big integers and
``fractions.Fraction``); no floating point anywhere.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction


class ParameterError(ValueError):
    """Raised for malformed or inconsistent stage parameters."""


@dataclass(frozen=True)
class StageParams:
    """Parameters attached to one stage of the inductive construction.

    ``k`` and ``l`` are the cutting/repetition counts consumed by the step
    that carries this stage to the next one; ``s`` is the number of word
    slots (= grid rows) of this stage; ``alpha = p/q`` is the rotation
    number of this stage.
    """

    n: int
    k: int
    l: int
    s: int
    p: int
    q: int

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ParameterError(f"stage index must be >= 0, got {self.n}")
        if self.k < 2 or self.l < 2:
            raise ParameterError(f"k,l below minimum 2 (k={self.k}, l={self.l})")
        if self.s < 1:
            raise ParameterError(f"s must be >= 1, got {self.s}")
        if self.q < 1:
            raise ParameterError(f"q must be >= 1, got {self.q}")
        if math.gcd(self.p, self.q) != 1:
            raise ParameterError(f"p={self.p} and q={self.q} are not coprime")

    @property
    def alpha(self) -> Fraction:
        return Fraction(self.p, self.q)

    def to_json_dict(self) -> dict:
        # big integers go out as decimal strings so round trips are bit exact
        return {
            "n": self.n,
            "k": self.k,
            "l": self.l,
            "s": self.s,
            "p": str(self.p),
            "q": str(self.q),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "StageParams":
        return cls(n=int(d["n"]), k=int(d["k"]), l=int(d["l"]), s=int(d["s"]),
                   p=int(d["p"]), q=int(d["q"]))


def initial_stage(k: int, l: int, s: int) -> StageParams:
    """Stage 0 record: p_0 = 1, q_0 = 1 (stored for definiteness)."""
    return StageParams(n=0, k=k, l=l, s=s, p=1, q=1)


def advance(prev: StageParams, k: int = 2, l: int = 2, s_next: int | None = None) -> StageParams:
    """Next stage record from ``prev``.

    The recursion consumes ``prev.k`` and ``prev.l``; the arguments ``k``
    and ``l`` become the outgoing parameters of the *returned* record
    (defaulting to the minimum 2 when the follow-up step is not yet
    decided).  Coprimality of the new pair is re-verified, never assumed.
    """
    if s_next is None:
        s_next = prev.s
    if s_next % prev.s != 0:
        raise ParameterError(
            f"s_next={s_next} is not a multiple of s={prev.s}")
    p_next = prev.p * prev.q * prev.k * prev.l + 1
    q_next = prev.k * prev.l * prev.q * prev.q
    if math.gcd(p_next, q_next) != 1:  # cannot happen; guards implementation bugs
        raise ParameterError(
            f"internal error: gcd({p_next},{q_next}) != 1 after advance")
    return StageParams(n=prev.n + 1, k=k, l=l, s=s_next, p=p_next, q=q_next)


def check_chain(stages: list[StageParams]) -> None:
    """Validate the recursion between consecutive records."""
    for a, b in zip(stages, stages[1:]):
        if b.n != a.n + 1:
            raise ParameterError(f"stage indices not consecutive: {a.n} -> {b.n}")
        if b.p != a.p * a.q * a.k * a.l + 1 or b.q != a.k * a.l * a.q * a.q:
            raise ParameterError(
                f"recursion violated between stages {a.n} and {b.n}")
        if b.s % a.s != 0:
            raise ParameterError(f"s_{a.n}={a.s} does not divide s_{b.n}={b.s}")


def j_table(p: int, q: int) -> list[int]:
    """The table j_i = p^(-1) * i mod q, for i = 0..q-1.

    Computed with the extended-Euclid inverse and then re-verified by
    multiplication; never trusted unverified.
    """
    if q < 1:
        raise ParameterError(f"q must be >= 1, got {q}")
    if math.gcd(p, q) != 1:
        raise ParameterError(f"p={p} and q={q} are not coprime")
    if q == 1:
        return [0]
    inv = pow(p, -1, q)
    table = [(inv * i) % q for i in range(q)]
    for i, j in enumerate(table):
        if (p * j) % q != i:
            raise ParameterError(
                f"internal error: modular inverse check failed at i={i}")
    return table


def dump_params(stages: list[StageParams]) -> str:
    return json.dumps([st.to_json_dict() for st in stages], indent=2, sort_keys=True)


def load_params(text: str) -> list[StageParams]:
    return [StageParams.from_json_dict(d) for d in json.loads(text)]
