"""Stochastic Reo automata: Reo automata whose transitions carry flow tuples.

A flow tuple ``(I, O, rate)`` is one primitive data-flow step.  Every
transition carries the tuples of all primitive flows it synchronizes, and
every boundary node carries an exponential arrival rate for its requests.

Composite states are nested pairs mirroring the order in which primitives
were multiplied.  Each primitive gets a channel id, and ``layout`` records
where that channel's local state sits inside the nesting, so tuple effects
(buffer fills and drains) can be applied to a composite configuration.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Hashable, Iterable, Mapping, NamedTuple

from . import automaton as RA
from . import guards as G
from .automaton import (ReoAutomaton, StateId, Transition, ValidationReport, Violation,
                        names_label, state_label)
from .errors import ReoError
from .guards import Var

ChannelId = Hashable


class BadArity(ReoError):
    pass


class MissingRate(ReoError):
    pass


class UnknownKind(ReoError):
    pass


class ChannelClash(ReoError):
    pass


class StructureWarning(UserWarning):
    """A join whose sides do not look like a sink plugged into a source."""


class Rate(NamedTuple):
    name: str
    value: float


def _set_label(names: Iterable[str]) -> str:
    names = sorted(names)
    return "{" + ",".join(names) + "}" if names else "∅"


@dataclass(frozen=True)
class FlowTuple:
    """One primitive data-flow: inputs, outputs and its processing rate.

    ``effect`` lists ``(channel, from_state, to_state)`` for every channel
    whose local state the flow changes (or confirms, for stateless ones).
    """

    inputs: frozenset[str]
    outputs: frozenset[str]
    rate: float
    rate_name: str
    effect: tuple[tuple[ChannelId, StateId, StateId], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", frozenset(self.inputs))
        object.__setattr__(self, "outputs", frozenset(self.outputs))
        object.__setattr__(self, "effect", tuple(self.effect))

    @property
    def nodes(self) -> frozenset[str]:
        return self.inputs | self.outputs

    @property
    def triple(self) -> tuple[frozenset[str], frozenset[str], str]:
        """The tuple as ``(I, O, rate_name)``, ignoring rate value and effect."""
        return self.inputs, self.outputs, self.rate_name

    def __str__(self):
        return f"({_set_label(self.inputs)},{_set_label(self.outputs)},{self.rate_name})"

    def sort_key(self):
        return (sorted(self.inputs), sorted(self.outputs), self.rate_name, self.rate)


def _dedup(items: Iterable) -> tuple:
    return tuple(dict.fromkeys(items))


@dataclass(frozen=True, eq=False)
class STransition:
    """A Reo transition and the flow tuples it fires.

    Tuples keep their construction order (used when printing delay
    sequences) but compare as a set.
    """

    transition: Transition
    tuples: tuple[FlowTuple, ...]

    def __post_init__(self):
        object.__setattr__(self, "tuples", _dedup(self.tuples))

    @cached_property
    def tuple_set(self) -> frozenset[FlowTuple]:
        return frozenset(self.tuples)

    def __eq__(self, other):
        if not isinstance(other, STransition):
            return NotImplemented
        return self.transition == other.transition and self.tuple_set == other.tuple_set

    def __hash__(self):
        return hash((self.transition, self.tuple_set))

    def __str__(self):
        return f"{self.transition}, {tuples_label(self.tuples)}"

    def sort_key(self):
        return self.transition.sort_key() + (sorted(t.sort_key() for t in self.tuples),)


def tuples_label(tuples: Iterable[FlowTuple]) -> str:
    return "{" + ",".join(str(t) for t in sorted(tuples, key=FlowTuple.sort_key)) + "}"


@dataclass(frozen=True, eq=False)
class StochasticReoAutomaton:
    alphabet: frozenset[str]
    states: frozenset[StateId]
    transitions: tuple[STransition, ...]
    initial: StateId | None
    arrival_rates: Mapping[str, float]
    arrival_names: Mapping[str, str] = field(default_factory=dict)
    layout: Mapping[ChannelId, tuple[int, ...]] = field(default_factory=dict)
    joined: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "alphabet", frozenset(self.alphabet))
        object.__setattr__(self, "states", frozenset(self.states))
        object.__setattr__(self, "transitions",
                           tuple(sorted(set(self.transitions), key=STransition.sort_key)))
        object.__setattr__(self, "arrival_rates", dict(self.arrival_rates))
        names = {x: self.arrival_names.get(x, "γ" + x) for x in self.arrival_rates}
        object.__setattr__(self, "arrival_names", names)
        object.__setattr__(self, "layout", dict(self.layout))
        object.__setattr__(self, "joined", frozenset(self.joined))
        for x in self.arrival_rates:
            if x not in self.alphabet:
                raise RA.UnknownNode(f"arrival rate for {x}, which is not in the alphabet")
        self.automaton  # runs the structural checks of ReoAutomaton

    @cached_property
    def automaton(self) -> ReoAutomaton:
        return ReoAutomaton(self.alphabet, self.states,
                            frozenset(s.transition for s in self.transitions), self.initial)

    @property
    def boundary(self) -> frozenset[str]:
        """Nodes that have not been consumed by a join."""
        return self.alphabet - self.joined

    @cached_property
    def _out(self) -> dict[StateId, tuple[STransition, ...]]:
        out: dict[StateId, list[STransition]] = {q: [] for q in self.states}
        for s in self.transitions:
            out[s.transition.source].append(s)
        return {q: tuple(v) for q, v in out.items()}

    def outgoing(self, q: StateId) -> tuple[STransition, ...]:
        if q not in self.states:
            raise RA.UnknownState(state_label(q))
        return self._out[q]

    @cached_property
    def tuple_rates(self) -> dict[str, float]:
        """Processing rate for each rate name used by some tuple."""
        return {t.rate_name: t.rate for s in self.transitions for t in s.tuples}

    def __eq__(self, other):
        if not isinstance(other, StochasticReoAutomaton):
            return NotImplemented
        return (self.alphabet == other.alphabet and self.states == other.states
                and set(self.transitions) == set(other.transitions)
                and self.initial == other.initial
                and self.arrival_rates == other.arrival_rates
                and self.joined == other.joined)

    __hash__ = None

    def with_rate(self, name: str, value: float) -> StochasticReoAutomaton:
        """Copy with one rate replaced.

        ``name`` is a boundary node (its arrival rate changes), an arrival
        rate name such as ``γa``, or a tuple rate name such as ``γaL``.
        """
        arrivals = dict(self.arrival_rates)
        hit = False
        for x, rname in self.arrival_names.items():
            if name in (x, rname):
                arrivals[x] = value
                hit = True
        transitions = []
        for s in self.transitions:
            tuples = []
            for t in s.tuples:
                if t.rate_name == name:
                    t = replace(t, rate=value)
                    hit = True
                tuples.append(t)
            transitions.append(STransition(s.transition, tuple(tuples)))
        if not hit:
            raise MissingRate(f"no arrival or flow rate named {name}")
        return replace(self, transitions=tuple(transitions), arrival_rates=arrivals)

    def __str__(self):
        lines = [f"alphabet {names_label(self.alphabet)}"]
        if self.initial is not None:
            lines.append(f"initial {state_label(self.initial)}")
        for x in sorted(self.arrival_rates):
            lines.append(f"arrival {x} {self.arrival_names[x]}={self.arrival_rates[x]!r}")
        lines += [str(s) for s in self.transitions]
        return "\n".join(lines)


# --- primitives --------------------------------------------------------------

_ARITY = {"sync": 2, "lossysync": 2, "fifo1": 2, "syncdrain": 2, "merger": 3, "replicator": 3}
KINDS = tuple(_ARITY)


def default_rate_name(kind: str, key: str, nodes: tuple[str, ...]) -> str:
    a, b = nodes[0], nodes[1]
    names = {
        ("sync", "flow"): f"γ{a}{b}",
        ("lossysync", "flow"): f"γ{a}{b}",
        ("lossysync", "loss"): f"γ{a}L",
        ("fifo1", "in"): f"γ{a}F",
        ("fifo1", "out"): f"γF{b}",
        ("syncdrain", "drain"): f"γ{a}{b}",
        ("replicator", "flow"): "γ" + "".join(nodes),
    }
    if kind == "merger":
        c = nodes[2]
        return {"left": f"γ{a}{c}", "right": f"γ{b}{c}"}[key]
    return names[(kind, key)]


REQUIRED_RATES = {
    "sync": ("flow",),
    "lossysync": ("flow", "loss"),
    "fifo1": ("in", "out"),
    "syncdrain": ("drain",),
    "merger": ("left", "right"),
    "replicator": ("flow",),
}


def _as_rate(value, default_name: str) -> Rate:
    if isinstance(value, Rate):
        return value
    if isinstance(value, tuple):
        return Rate(*value)
    return Rate(default_name, float(value))


def primitive(kind: str, nodes: Iterable[str], rates: Mapping[str, Rate | float],
              arrivals: Mapping[str, Rate | float] | None = None,
              channel: ChannelId | None = None) -> StochasticReoAutomaton:
    """Build one primitive channel.

    ``rates`` maps the kind's rate keys (``REQUIRED_RATES``) to a
    :class:`Rate` or a bare number; bare numbers get conventional names
    such as ``γab`` or ``γaL``.  ``arrivals`` gives request rates for
    nodes that are on the connector's boundary.
    """
    if kind not in _ARITY:
        raise UnknownKind(f"unknown channel kind {kind!r}; expected one of {', '.join(KINDS)}")
    nodes = tuple(nodes)
    if len(nodes) != _ARITY[kind]:
        raise BadArity(f"{kind} takes {_ARITY[kind]} nodes, got {len(nodes)}")
    if len(set(nodes)) != len(nodes):
        raise BadArity(f"{kind} nodes must be distinct")
    missing = [k for k in REQUIRED_RATES[kind] if k not in rates]
    if missing:
        raise MissingRate(f"{kind} needs rates {', '.join(missing)}")
    unknown = set(rates) - set(REQUIRED_RATES[kind])
    if unknown:
        raise MissingRate(f"{kind} does not take rates {', '.join(sorted(unknown))}")
    r = {k: _as_rate(v, default_rate_name(kind, k, nodes)) for k, v in rates.items()}
    ch = channel if channel is not None else f"{kind}:{','.join(nodes)}"

    def tup(inputs, outputs, key, src="q", dst="q"):
        return FlowTuple(frozenset(inputs), frozenset(outputs), r[key].value, r[key].name,
                         ((ch, src, dst),))

    def tr(src, guard, firing, dst, *tuples):
        return STransition(Transition(src, guard, frozenset(firing), dst), tuples)

    v = {x: Var(x) for x in nodes}
    states, initial = frozenset({"q"}), "q"
    if kind in ("sync", "lossysync", "syncdrain"):
        a, b = nodes
        ab = v[a] & v[b]
        if kind == "syncdrain":
            ts = [tr("q", ab, {a, b}, "q", tup({a, b}, (), "drain"))]
        else:
            ts = [tr("q", ab, {a, b}, "q", tup({a}, {b}, "flow"))]
        if kind == "lossysync":
            ts.append(tr("q", v[a] & ~v[b], {a}, "q", tup({a}, (), "loss")))
    elif kind == "fifo1":
        a, b = nodes
        states, initial = frozenset({"e", "f"}), "e"
        ts = [tr("e", v[a], {a}, "f", tup({a}, (), "in", "e", "f")),
              tr("f", v[b], {b}, "e", tup((), {b}, "out", "f", "e"))]
    elif kind == "merger":
        a, b, c = nodes
        ts = [tr("q", v[a] & v[c], {a, c}, "q", tup({a}, {c}, "left")),
              tr("q", v[b] & v[c], {b, c}, "q", tup({b}, {c}, "right"))]
    else:
        a, b, c = nodes
        ts = [tr("q", v[a] & v[b] & v[c], {a, b, c}, "q", tup({a}, {b, c}, "flow"))]

    arrivals = arrivals or {}
    extra = set(arrivals) - set(nodes)
    if extra:
        raise RA.UnknownNode(f"arrival rates for {sorted(extra)} which {kind} does not have")
    ar = {x: _as_rate(val, "γ" + x) for x, val in arrivals.items()}
    return StochasticReoAutomaton(
        frozenset(nodes), states, tuple(ts), initial,
        {x: a.value for x, a in ar.items()}, {x: a.name for x, a in ar.items()},
        {ch: ()})


# --- composition ---------------------------------------------------------------

def _payload_map(S: StochasticReoAutomaton):
    return {q: [(s.transition, s) for s in S.outgoing(q)] for q in S.states}


def product_s(S1: StochasticReoAutomaton, S2: StochasticReoAutomaton) -> StochasticReoAutomaton:
    """Product of two stochastic automata over disjoint alphabets.

    A joint step carries the tuples of both parents, a solo step those of
    its single parent.
    """
    clash = S1.layout.keys() & S2.layout.keys()
    if clash:
        raise ChannelClash(f"channel ids used on both sides: {sorted(map(str, clash))}")
    transitions = []
    for t, x1, x2 in RA._product_parts(S1.automaton, S2.automaton,
                                       _payload_map(S1), _payload_map(S2)):
        tuples = (x1.tuples if x1 else ()) + (x2.tuples if x2 else ())
        transitions.append(STransition(t, tuples))
    layout = {ch: (0,) + p for ch, p in S1.layout.items()}
    layout.update({ch: (1,) + p for ch, p in S2.layout.items()})
    states = {(q, p) for q in S1.states for p in S2.states}
    initial = RA._pair_initial(S1.automaton, S2.automaton)
    return StochasticReoAutomaton(
        S1.alphabet | S2.alphabet, frozenset(states), tuple(transitions), initial,
        {**S1.arrival_rates, **S2.arrival_rates}, {**S1.arrival_names, **S2.arrival_names},
        layout, S1.joined | S2.joined)


def gather(nodes: frozenset[str], pair: frozenset[str]) -> frozenset[str]:
    """Widen ``nodes`` by ``pair`` when they overlap; otherwise leave it alone."""
    return nodes | pair if nodes & pair else nodes


def _check_structure(S: StochasticReoAutomaton, a: str, b: str):
    outputs = set().union(*(t.outputs for s in S.transitions for t in s.tuples))
    inputs = set().union(*(t.inputs for s in S.transitions for t in s.tuples))
    problems = []
    if a not in outputs:
        problems.append(f"{a} is never an output")
    if b not in inputs:
        problems.append(f"{b} is never an input")
    if problems:
        warnings.warn(f"join {a} {b}: " + "; ".join(problems), StructureWarning, stacklevel=3)


def synchronize_s(S: StochasticReoAutomaton, a: str, b: str,
                  check_structure: bool = True) -> StochasticReoAutomaton:
    """Join sink node ``a`` to source node ``b``.

    Surviving transitions keep all their tuples; tuples touching either
    node have that side widened to ``{a, b}``.  Both nodes lose their
    arrival rates.
    """
    RA._check_pair(S.automaton, a, b)
    if check_structure:
        _check_structure(S, a, b)
    pair = frozenset({a, b})
    items = [(s.transition, s) for s in S.transitions]
    transitions = []
    for t, s in RA._sync_parts(S.automaton, a, b, items):
        tuples = tuple(replace(x, inputs=gather(x.inputs, pair), outputs=gather(x.outputs, pair))
                       for x in s.tuples)
        transitions.append(STransition(t, tuples))
    arrivals = {x: v for x, v in S.arrival_rates.items() if x not in pair}
    names = {x: v for x, v in S.arrival_names.items() if x not in pair}
    return StochasticReoAutomaton(S.alphabet, S.states, tuple(transitions), S.initial,
                                  arrivals, names, S.layout, S.joined | pair)


def prune_unreachable_s(S: StochasticReoAutomaton) -> StochasticReoAutomaton:
    keep = RA.prune_unreachable(S.automaton).states
    return replace(S, states=keep,
                   transitions=tuple(s for s in S.transitions if s.transition.source in keep))


# --- checks --------------------------------------------------------------------

def validate_s(S: StochasticReoAutomaton, structural: bool = True) -> ValidationReport:
    """Report rate, totality and tuple-shape problems.

    With ``structural`` the reactivity/uniformity checks of the
    underlying automaton are included as well.
    """
    entries = list(RA.validate(S.automaton)) if structural else []
    for x in sorted(S.boundary - S.arrival_rates.keys()):
        entries.append(Violation(x, "missing-arrival-rate", "boundary node without arrival rate"))
    for x in sorted(S.arrival_rates.keys() & S.joined):
        entries.append(Violation(x, "internal-arrival-rate", "joined node carries an arrival rate"))
    for x, v in sorted(S.arrival_rates.items()):
        if not (v > 0 and math.isfinite(v)):
            entries.append(Violation(x, "bad-rate", f"arrival rate {v!r} is not positive and finite"))
    bad_tuples = set()
    for s in S.transitions:
        covered = set().union(*(t.nodes for t in s.tuples))
        if not s.transition.firing <= covered:
            missing = names_label(s.transition.firing - covered)
            entries.append(Violation(s, "uncovered-firing", f"no tuple mentions {missing}"))
        for t in s.tuples:
            if t in bad_tuples:
                continue
            if t.inputs & t.outputs:
                bad_tuples.add(t)
                entries.append(Violation(t, "tuple-overlap", "inputs and outputs intersect"))
            if not (t.rate > 0 and math.isfinite(t.rate)):
                bad_tuples.add(t)
                entries.append(Violation(t, "bad-rate", f"rate {t.rate!r} is not positive and finite"))
            for ch, _, _ in t.effect:
                if ch not in S.layout:
                    bad_tuples.add(t)
                    entries.append(Violation(t, "unknown-channel", f"effect on {ch!r}"))
    return ValidationReport(tuple(entries))


def _label(s: STransition):
    return (s.transition.firing, s.tuple_set)


def bisimilar_s(S1: StochasticReoAutomaton, S2: StochasticReoAutomaton) -> RA.Bisimulation:
    """Bisimilarity that also matches tuple sets step-for-step and the rate maps."""
    if S1.alphabet != S2.alphabet:
        raise RA.AlphabetMismatch("bisimulation needs identical alphabets")
    if S1.arrival_rates != S2.arrival_rates:
        return RA.Bisimulation(False)
    used = S1.automaton.used_names | S2.automaton.used_names
    names = tuple(sorted(used))

    def moves(S):
        m = {q: [] for q in S.states}
        for s in S.transitions:
            t = s.transition
            m[t.source].append((_label(s), t.target, G.truth_table(t.guard, names)))
        return m

    rel = RA.greatest_bisimulation(S1.states, moves(S1), S2.states, moves(S2), 1 << len(names))
    return RA.bisimulation_result(S1.states, S2.states, rel, S1.initial, S2.initial)


# --- configurations --------------------------------------------------------------

def local_state(S: StochasticReoAutomaton, config: StateId, channel: ChannelId) -> StateId:
    q = config
    for i in S.layout[channel]:
        q = q[i]
    return q


def _set_path(q, path, value):
    if not path:
        return value
    i = path[0]
    parts = list(q)
    parts[i] = _set_path(parts[i], path[1:], value)
    return tuple(parts)


class EffectMismatch(ReoError):
    """A tuple's effect expects a channel state the configuration does not have."""


class MissingEffect(ReoError):
    pass


def apply_effects(S: StochasticReoAutomaton, config: StateId,
                  tuples: Iterable[FlowTuple]) -> StateId:
    """The configuration reached from ``config`` by firing ``tuples``."""
    q = config
    for t in tuples:
        if not t.effect:
            raise MissingEffect(f"tuple {t} has no effect provenance")
        for ch, src, dst in t.effect:
            if ch not in S.layout:
                raise MissingEffect(f"tuple {t} refers to unknown channel {ch!r}")
            here = local_state(S, q, ch)
            if here != src:
                raise EffectMismatch(f"tuple {t} expects {ch} in {src}, found {here}")
            q = _set_path(q, S.layout[ch], dst)
    return q


def to_dot_s(S: StochasticReoAutomaton, name: str = "sreo") -> str:
    by_transition: dict[Transition, list[STransition]] = {}
    for s in S.transitions:
        by_transition.setdefault(s.transition, []).append(s)

    def label(t: Transition) -> str:
        sets = " ".join(tuples_label(s.tuples) for s in by_transition[t])
        return f"{RA.guard_label(t.guard)}|{names_label(t.firing)} {sets}"

    return RA.to_dot(S.automaton, label, name)


__all__ = [
    "Rate", "FlowTuple", "STransition", "StochasticReoAutomaton", "KINDS", "REQUIRED_RATES",
    "primitive", "default_rate_name", "product_s", "synchronize_s", "gather", "validate_s", "bisimilar_s",
    "apply_effects", "local_state", "prune_unreachable_s", "to_dot_s", "tuples_label",
    "BadArity", "MissingRate", "UnknownKind", "ChannelClash", "StructureWarning",
    "EffectMismatch", "MissingEffect",
]
