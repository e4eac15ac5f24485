"""Random small connectors for property checks and experiments."""

from __future__ import annotations

import random

from . import guards as G
from .automaton import Transition, validate
from .stochastic import (KINDS, REQUIRED_RATES, FlowTuple, STransition, StochasticReoAutomaton,
                         primitive)

_THREE = {"merger", "replicator"}


def random_primitive(rng: random.Random, prefix: str, kinds=KINDS) -> StochasticReoAutomaton:
    """One primitive on nodes ``prefix0, prefix1, ...``, every node with an arrival rate."""
    kind = rng.choice(kinds)
    nodes = [f"{prefix}{i}" for i in range(3 if kind in _THREE else 2)]
    rates = {k: round(rng.uniform(0.2, 5), 3) for k in REQUIRED_RATES[kind]}
    arrivals = {x: round(rng.uniform(0.2, 5), 3) for x in nodes}
    return primitive(kind, nodes, rates, arrivals, channel=prefix)


def enabling_is_monotone(S: StochasticReoAutomaton, q) -> bool:
    """Adding requests never blocks a state that could already fire."""
    guard = G.disj([s.transition.guard for s in S.outgoing(q)])
    names = sorted(S.alphabet)
    for atom in G.atoms(frozenset(names)):
        if G.evaluate(guard, atom):
            for x in set(names) - atom.true:
                if not G.evaluate(guard, G.Atom(atom.alphabet, atom.true | {x})):
                    return False
    return True


def random_automaton(rng: random.Random, prefix: str, channel: str, max_states: int = 3,
                     max_names: int = 3) -> StochasticReoAutomaton:
    """A reactive, uniform automaton with one flow tuple per step.

    Guards are the firing set plus some negated unfired names; candidates
    whose enabling is not monotone in the pending requests are redrawn,
    since their products are not uniform.
    """
    while True:
        names = [f"{prefix}{i}" for i in range(rng.randint(2, max_names))]
        states = [f"{prefix}q{i}" for i in range(rng.randint(1, max_states))]
        steps = []
        for q in states:
            for _ in range(rng.randint(1, 3)):
                fired = rng.sample(names, rng.randint(1, len(names)))
                rest = [x for x in names if x not in fired]
                blocked = rng.sample(rest, rng.randint(0, len(rest)))
                guard = G.conj([G.Var(x) for x in fired] + [~G.Var(x) for x in blocked])
                target = rng.choice(states)
                cut = rng.randint(0, len(fired))
                rate = round(rng.uniform(0.2, 5), 3)
                t = FlowTuple(frozenset(fired[:cut]), frozenset(fired[cut:]), rate,
                              f"γ{channel}{len(steps)}", ((channel, q, target),))
                steps.append(STransition(Transition(q, guard, frozenset(fired), target), (t,)))
        arrivals = {x: round(rng.uniform(0.2, 5), 3) for x in names}
        S = StochasticReoAutomaton(frozenset(names), frozenset(states), tuple(steps), states[0],
                                   arrivals, {}, {channel: ()})
        if validate(S.automaton).ok and all(enabling_is_monotone(S, q) for q in states):
            return S


def sinks(S: StochasticReoAutomaton) -> list[str]:
    return sorted({x for s in S.transitions for t in s.tuples for x in t.outputs})


def sources(S: StochasticReoAutomaton) -> list[str]:
    return sorted({x for s in S.transitions for t in s.tuples for x in t.inputs})


__all__ = ["random_primitive", "random_automaton", "enabling_is_monotone", "sinks", "sources"]
