"""Independent oracle: simulate the fine rotation on the refined circle grid
and read the symbolic name of the base interval straight off the orbit.

Everything here is pure modular arithmetic on interval indices; nothing is
shared with the word-building code, which is the point of the cross-check.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

from .params import ParameterError, j_table
from .words import BOUNDARY_B, BOUNDARY_E, Word


@dataclass(frozen=True)
class TransectTrace:
    """Orbit of the leftmost fine interval J = [0, 1/q') under the fine
    rotation, tracked against the coarse grids.

    positions[t] is the geometric index of the fine interval visited at
    step t (= t*p' mod q'); coarse[t] the containing interval of the
    k*q-grid; boundary[t] is "b"/"e" when the step sits in the leading or
    trailing sliver of its coarse interval, "" otherwise.
    """

    p: int
    q: int
    k: int
    l: int
    p_fine: int
    q_fine: int
    positions: tuple[int, ...]
    coarse: tuple[int, ...]
    boundary: tuple[str, ...]

    def segment(self, t: int) -> str:
        """Per-chunk tag: each chunk of k*l*q steps opens with q - j_m
        'begin' steps and closes with j_m 'end' steps."""
        klq = self.k * self.l * self.q
        m = t // klq
        r = t % klq
        jm = j_table(self.p, self.q)[m % self.q]
        if r < self.q - jm:
            return "begin"
        if r >= klq - jm:
            return "end"
        return "middle"


def simulate_transect(p: int, q: int, k: int, l: int) -> TransectTrace:
    if math.gcd(p, q) != 1:
        raise ParameterError(f"p={p}, q={q} not coprime")
    if k < 1 or l < 2 or q < 1:
        raise ParameterError(f"bad parameters k={k}, l={l}, q={q}")
    q_fine = k * l * q * q
    p_fine = p * q * k * l + 1
    jt = j_table(p, q)
    lq = l * q
    positions = []
    coarse = []
    boundary = []
    pos = 0
    for t in range(q_fine):
        positions.append(pos)
        coarse.append(pos * (k * q) // q_fine)
        m = (t // (k * lq)) % q
        v = pos % lq
        if v < q - jt[m]:
            boundary.append(BOUNDARY_B)
        elif v >= lq - jt[m]:
            boundary.append(BOUNDARY_E)
        else:
            boundary.append("")
        pos = (pos + p_fine) % q_fine
    return TransectTrace(p=p, q=q, k=k, l=l, p_fine=p_fine, q_fine=q_fine,
                         positions=tuple(positions), coarse=tuple(coarse),
                         boundary=tuple(boundary))


def transect_name(trace: TransectTrace, letters: Sequence[Word]) -> Word:
    """Name of the base interval: boundary letters on the leading/trailing
    slivers, otherwise the label of the coarse interval currently visited.

    ``letters[j]`` is the length-q word labelling the orbit of the j-th
    coarse interval; coarse interval c = j + t*k carries letter
    letters[j][d] where d is the dynamical position of the q-grid interval
    containing c.
    """
    if len(letters) != trace.k:
        raise ParameterError(f"need {trace.k} label words, got {len(letters)}")
    for w in letters:
        if len(w) != trace.q:
            raise ParameterError("label words must have length q")
    p_inv = pow(trace.p, -1, trace.q) if trace.q > 1 else 0
    lq = trace.l * trace.q
    out = []
    for t in range(trace.q_fine):
        tag = trace.boundary[t]
        if tag:
            out.append(tag)
            continue
        c = trace.positions[t] // lq
        j = c % trace.k
        g = c // trace.k
        d = (p_inv * g) % trace.q
        out.append(letters[j][d])
    return tuple(out)


def write_trace_csv(path, trace: TransectTrace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "position", "coarse_index", "segment_tag"])
        for t in range(trace.q_fine):
            writer.writerow([t, trace.positions[t], trace.coarse[t],
                             trace.segment(t)])
