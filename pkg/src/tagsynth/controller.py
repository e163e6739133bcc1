"""Finite-memory region controllers.

A controller observes enlarged regions (region + history predicates) and
keeps a small memory. Each table row maps a (memory, observation) pair to
the next memory value, a delay target on the observation's time-successor
chain, and the action to play there (None = the player-1 stutter). The
prescriptions are region-level; turning a row into a concrete timed move is
the synthesis concretize step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .enlarged import EnlargedRegion, PredicateState
from .errors import ModelError
from .regions import Region


def observation_key(er: EnlargedRegion):
    r = er.region
    p = er.preds
    return (r.loc, r.h, tuple(tuple(sorted(b)) for b in r.blocks),
            p.bl1, tuple(sorted(p.gt0)), tuple(sorted(p.ge1)),
            tuple(sorted(p.star)))


@dataclass(frozen=True)
class Prescription:
    next_mem: int
    target: Region
    action: object  # action name or None for the stutter


@dataclass
class Controller:
    name: str
    objective: str
    policy: str
    memory_states: int
    observations: tuple  # of EnlargedRegion; index is the observation id
    rows: dict           # (mem, obs index) -> Prescription
    initial_memory: int = 0

    def __post_init__(self):
        self._index = {observation_key(o): i for i, o in enumerate(self.observations)}
        self._row_cache = {}

    def obs_index(self, er: EnlargedRegion):
        return self._index.get(observation_key(er))

    def lookup(self, mem: int, er: EnlargedRegion):
        """The row for the pair, or None when the observation (or the pair)
        is outside the controller's winning domain."""
        key = (mem, er)
        try:
            return self._row_cache[key]
        except KeyError:
            i = self._index.get(observation_key(er))
            row = None if i is None else self.rows.get((mem, i))
            self._row_cache[key] = row
            return row

    def memory_used(self) -> int:
        mems = {self.initial_memory}
        for (m, _), row in self.rows.items():
            mems.add(m)
            mems.add(row.next_mem)
        return len(mems)

    def validate(self):
        errors = []
        if not 0 <= self.initial_memory < self.memory_states:
            errors.append("initial memory out of range")
        for (m, o), row in self.rows.items():
            if not 0 <= m < self.memory_states or not 0 <= row.next_mem < self.memory_states:
                errors.append(f"memory out of range in row ({m}, {o})")
            if not 0 <= o < len(self.observations):
                errors.append(f"unknown observation index {o}")
            elif row.target.loc != self.observations[o].loc:
                errors.append(f"row ({m}, {o}) targets a different location")
        return errors
