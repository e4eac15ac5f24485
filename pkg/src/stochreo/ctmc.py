"""Translation of a fully composed stochastic automaton into a CTMC.

Structural states pair an automaton configuration with the set of
boundary nodes holding a pending request.  Requests arrive one at a time
at their exponential rates.  When the pending set enables a transition,
its flow tuples complete one by one in an order allowed by their delay
poset; partially completed transitions are micro states.

With ``merge=True`` a micro state whose completed tuples form whole
independent groups of the poset is identified with the structural state
those tuples lead to.  The structural state then keeps its own
behaviour, and the micro state's remaining steps are dropped.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Union

from . import delay as D
from . import guards as G
from .automaton import StateId, names_label, state_label
from .errors import ReoError
from .stochastic import FlowTuple, STransition, StochasticReoAutomaton, apply_effects


class UnsynchronizedAlphabet(ReoError):
    """A guard still depends on a node that has no arrival rate."""


class NoInitialState(ReoError):
    pass


@dataclass(frozen=True)
class Structural:
    config: StateId
    pending: frozenset[str]

    @property
    def label(self) -> str:
        return f"({state_label(self.config)},{names_label(self.pending)})"


@dataclass(frozen=True)
class Micro:
    """Part-way through one transition: ``fired`` of its ``flows`` have completed.

    Transitions that differ only in their guards lead to the same micro
    states, so redundant guards never double a rate.
    """

    config: StateId
    target: StateId
    flows: frozenset[FlowTuple]
    fired: frozenset[FlowTuple]
    pending: frozenset[str]

    @property
    def label(self) -> str:
        done = ",".join(t.rate_name for t in sorted(self.fired, key=FlowTuple.sort_key))
        return f"({state_label(self.config)}[{done}],{names_label(self.pending)})"


CtmcState = Union[Structural, Micro]


@dataclass(frozen=True)
class Arrival:
    node: str
    rate_name: str


@dataclass(frozen=True)
class Flow:
    tuple: FlowTuple

    @property
    def rate_name(self) -> str:
        return self.tuple.rate_name


Provenance = Union[Arrival, Flow]


@dataclass(frozen=True)
class CtmcTransition:
    source: CtmcState
    target: CtmcState
    rate: float
    provenance: Provenance

    @property
    def rate_name(self) -> str:
        return self.provenance.rate_name

    @property
    def is_arrival(self) -> bool:
        return isinstance(self.provenance, Arrival)


@dataclass(frozen=True)
class MergeNote:
    """A merged micro state whose own continuation differs from its stand-in."""

    micro: Micro
    merged_into: Structural
    only_micro: frozenset[str]
    only_structural: frozenset[str]

    def __str__(self):
        return (f"{self.micro.label} merged into {self.merged_into.label}: "
                f"micro-only events {names_label(self.only_micro)}, "
                f"structural-only events {names_label(self.only_structural)}")


@dataclass(frozen=True, eq=False)
class Ctmc:
    states: tuple[CtmcState, ...]
    transitions: tuple[CtmcTransition, ...]
    merge_notes: tuple[MergeNote, ...] = ()
    meta: dict = field(default_factory=dict)

    @property
    def initial(self) -> CtmcState:
        return self.states[0]

    @cached_property
    def index(self) -> dict[CtmcState, int]:
        return {s: i for i, s in enumerate(self.states)}

    def __len__(self):
        return len(self.states)

    def labels(self) -> list[str]:
        return [s.label for s in self.states]

    def rate_names(self) -> frozenset[str]:
        return frozenset(t.rate_name for t in self.transitions)

    def edges(self) -> list[tuple[int, int, float, str]]:
        """``(src, dst, rate, rate_name)`` in emission order."""
        ix = self.index
        return [(ix[t.source], ix[t.target], t.rate, t.rate_name) for t in self.transitions]


@dataclass(frozen=True)
class MacroTransition:
    source: Structural
    step: STransition
    poset: D.DelayPoset
    target: Structural


def _atom_holds(guard: G.Guard, pending: frozenset[str]) -> bool:
    return G.evaluate(guard, G.Atom(frozenset(guard.vars), frozenset(guard.vars & pending)))


def check_composed(S: StochasticReoAutomaton):
    if S.initial is None:
        raise NoInitialState("the automaton has no initial state")
    boundary = S.arrival_rates.keys()
    for s in S.transitions:
        stray = s.transition.guard.vars - boundary
        if stray:
            raise UnsynchronizedAlphabet(
                f"guard of {s.transition} mentions {names_label(stray)}, which have no arrival rate")


def structural_states(S: StochasticReoAutomaton) -> list[Structural]:
    """Every configuration paired with every pending set."""
    import itertools
    names = sorted(S.arrival_rates)
    subsets = [frozenset(c) for k in range(len(names) + 1)
               for c in itertools.combinations(names, k)]
    return [Structural(q, R) for q in sorted(S.states, key=state_label) for R in subsets]


def arrivals_from(S: StochasticReoAutomaton, state: CtmcState) -> list[CtmcTransition]:
    out = []
    for c in sorted(S.arrival_rates.keys() - state.pending):
        if isinstance(state, Structural):
            target = Structural(state.config, state.pending | {c})
        else:
            target = Micro(state.config, state.target, state.flows, state.fired, state.pending | {c})
        out.append(CtmcTransition(state, target, S.arrival_rates[c],
                                  Arrival(c, S.arrival_names[c])))
    return out


def arrival_transitions_pre(S: StochasticReoAutomaton,
                            states: Iterable[Structural]) -> list[CtmcTransition]:
    return [t for s in states for t in arrivals_from(S, s)]


def macros_from(S: StochasticReoAutomaton, state: Structural) -> list[MacroTransition]:
    """Enabled macro steps; steps differing only in guard are listed once."""
    out: dict[tuple, MacroTransition] = {}
    for s in S.outgoing(state.config):
        t = s.transition
        if _atom_holds(t.guard, state.pending):
            target = Structural(t.target, state.pending - t.firing)
            out.setdefault((s.tuple_set, target),
                           MacroTransition(state, s, D.ext(s.tuples), target))
    return list(out.values())


def macro_transitions(S: StochasticReoAutomaton) -> list[MacroTransition]:
    check_composed(S)
    return [m for st in structural_states(S) for m in macros_from(S, st)]


def divide(m: MacroTransition) -> tuple[list[CtmcState], list[CtmcTransition]]:
    """Split a macro transition into single-tuple steps.

    One state per downward-closed set of completed tuples; the empty set
    is the macro source and the full set its target.
    """
    p = m.poset
    everything = frozenset(p.tuples)

    def state_of(fired: frozenset) -> CtmcState:
        if not fired:
            return m.source
        if fired == everything:
            return m.target
        return Micro(m.source.config, m.target.config, everything, fired,
                     m.source.pending - D.nodes_of(p.restrict(fired)))

    states, edges = [], []
    for fired in D.downsets(p):
        src = state_of(fired)
        states.append(src)
        for t in p.enabled(fired):
            edges.append(CtmcTransition(src, state_of(fired | {t}), t.rate, Flow(t)))
    return states, edges


def merge_target(S: StochasticReoAutomaton, m: Micro) -> Structural | None:
    """The structural stand-in for ``m``, if its fired set is whole groups."""
    p = D.ext(sorted(m.flows, key=FlowTuple.sort_key))
    for comp in p.components():
        if comp & m.fired and not comp <= m.fired:
            return None
    ordered = [t for t in p.tuples if t in m.fired]
    return Structural(apply_effects(S, m.config, ordered), m.pending)


def micro_arrivals(S: StochasticReoAutomaton, micros: Iterable[Micro]) -> list[CtmcTransition]:
    """Arrivals between micro states that both exist."""
    present = set(micros)
    return [t for m in present for t in arrivals_from(S, m) if t.target in present]


def _event_labels(ts: Iterable[CtmcTransition]) -> frozenset[str]:
    return frozenset(t.rate_name for t in ts)


def build_ctmc(S: StochasticReoAutomaton, merge: bool = False,
               reachable_only: bool = True) -> Ctmc:
    """Build the CTMC of a fully composed connector.

    States are numbered in breadth-first discovery order from the initial
    configuration with nothing pending.  With ``reachable_only=False``
    every structural state is seeded, reachable or not.
    """
    check_composed(S)
    start = Structural(S.initial, frozenset())
    order: dict[CtmcState, None] = {start: None}
    queue = deque([start])
    if not reachable_only:
        for st in structural_states(S):
            if st not in order:
                order[st] = None
                queue.append(st)
    edges: dict[tuple, CtmcTransition] = {}
    merged: dict[Micro, Structural] = {}

    def visit(state):
        if state not in order:
            order[state] = None
            if isinstance(state, Structural):
                queue.append(state)

    def emit(t: CtmcTransition):
        edges.setdefault((t.source, t.target, t.provenance), t)

    while queue:
        st = queue.popleft()
        for t in arrivals_from(S, st):
            visit(t.target)
            emit(t)
        for m in macros_from(S, st):
            _, steps = divide(m)
            for t in steps:
                src, dst = t.source, t.target
                if merge and isinstance(src, Micro) and _standin(S, src, merged) is not None:
                    continue
                if src not in order:
                    continue
                if merge and isinstance(dst, Micro):
                    stand = _standin(S, dst, merged)
                    if stand is not None:
                        t = CtmcTransition(src, stand, t.rate, t.provenance)
                        dst = stand
                visit(dst)
                emit(t)

    micros = [s for s in order if isinstance(s, Micro)]
    for t in micro_arrivals(S, micros):
        emit(t)
    transitions = tuple(edges.values())

    notes = []
    if merge:
        # compare each merged micro state with its behaviour in the unmerged chain
        plain = build_ctmc(S, merge=False, reachable_only=reachable_only)
        before = _outgoing(plain.transitions)
        after = _outgoing(transitions)
        for m, stand in merged.items():
            if stand is None or m not in before:
                continue
            mine, theirs = _event_labels(before[m]), _event_labels(after.get(stand, []))
            if mine != theirs:
                notes.append(MergeNote(m, stand, mine - theirs, theirs - mine))
    known = frozenset(S.tuple_rates) | frozenset(S.arrival_names.values())
    return Ctmc(tuple(order), transitions, tuple(notes), {"merge": merge, "rate_names": known})


def _outgoing(ts) -> dict:
    out: dict[CtmcState, list[CtmcTransition]] = {}
    for t in ts:
        out.setdefault(t.source, []).append(t)
    return out


def _standin(S, m: Micro, cache: dict) -> Structural | None:
    if m not in cache:
        cache[m] = merge_target(S, m)
    return cache[m]


__all__ = [
    "Structural", "Micro", "CtmcState", "Arrival", "Flow", "CtmcTransition", "Ctmc",
    "MacroTransition", "MergeNote", "structural_states", "arrival_transitions_pre",
    "macro_transitions", "macros_from", "divide", "merge_target", "micro_arrivals",
    "build_ctmc", "check_composed", "UnsynchronizedAlphabet", "NoInitialState",
]
