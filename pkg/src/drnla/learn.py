"""Candidate linear invariants from sampled states.

Two classes are learned: affine equalities (null space of the sample
matrix) and octagonal bounds on ``x`` and ``x +/- y``.  Bounds already
entailed by what has been kept are dropped.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

from .polylib import LinAtom, LinTerm, Rel, implies, nullspace_int


class EmptySampleSet(ValueError):
    pass


@dataclass(frozen=True)
class SampleSet:
    variables: tuple[str, ...]
    states: tuple[Mapping[str, int], ...]

    @classmethod
    def of(cls, variables: Sequence[str], states) -> "SampleSet":
        variables = tuple(variables)
        seen: dict[tuple, None] = {}
        for s in states:
            seen[tuple(s[v] for v in variables)] = None
        return cls(variables, tuple(dict(zip(variables, k)) for k in seen))

    def __len__(self) -> int:
        return len(self.states)


def _require(samples: SampleSet) -> None:
    if not samples.states:
        raise EmptySampleSet("cannot learn from an empty sample set")


def learn_equalities(samples: SampleSet) -> list[LinAtom]:
    _require(samples)
    return [LinAtom.make(t, Rel.EQ) for t in nullspace_int(samples.states, samples.variables)]


def octagon_terms(variables: Sequence[str]) -> list[LinTerm]:
    """``x`` for each variable, then ``x + y`` and ``x - y`` for each pair."""
    out = [LinTerm.var(v) for v in variables]
    for x, y in itertools.combinations(variables, 2):
        out.append(LinTerm.of({x: 1, y: 1}))
        out.append(LinTerm.of({x: 1, y: -1}))
    return out


def learn_octagons(samples: SampleSet) -> list[LinAtom]:
    """Tight upper and lower bounds of every octagonal term over the samples."""
    _require(samples)
    out = []
    for t in octagon_terms(samples.variables):
        values = [t.eval_int(s) for s in samples.states]
        hi, lo = max(values), min(values)
        out.append(LinAtom.make(t.shift(-hi), Rel.LE))       # t <= hi
        out.append(LinAtom.make((-t).shift(lo), Rel.LE))     # -t <= -lo
    return out


def learn(samples: SampleSet) -> list[LinAtom]:
    """Equalities followed by the octagonal bounds they do not already entail.

    Octagonal atoms are visited single-variable bounds first; each one is
    kept only when the equalities and the previously kept bounds do not
    already entail it over the rationals.
    """
    eqs = learn_equalities(samples)
    kept: list[LinAtom] = []
    seen = set(eqs)
    for a in learn_octagons(samples):
        if a in seen:
            continue
        seen.add(a)
        if implies(eqs + kept, a):
            continue
        kept.append(a)
    return eqs + kept
