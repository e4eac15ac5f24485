"""Reo automata: guarded transitions ``q --g|f--> q'`` and their composition."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Hashable, Iterable

from . import guards as G
from .errors import ReoError
from .guards import Guard, truth_table

StateId = Hashable


class AlphabetOverlap(ReoError):
    pass


class AlphabetMismatch(ReoError):
    pass


class UnknownState(ReoError):
    pass


class UnknownNode(ReoError):
    pass


class SameNode(ReoError):
    pass


def state_label(q: StateId) -> str:
    """Readable label: primitive names as-is, product pairs as ``(x,y)``."""
    if isinstance(q, tuple):
        return "(" + ",".join(state_label(x) for x in q) + ")"
    return str(q)


def guard_label(g: Guard) -> str:
    """Guard text for ``g|f`` labels; disjunctions are parenthesized."""
    text = G.render(g)
    return f"({text})" if "|" in text else text


def names_label(names: Iterable[str]) -> str:
    names = sorted(names)
    if not names:
        return "∅"
    sep = "" if all(len(x) == 1 for x in names) else ","
    return sep.join(names)


@dataclass(frozen=True)
class Transition:
    source: StateId
    guard: Guard
    firing: frozenset[str]
    target: StateId

    def __str__(self):
        return (f"{state_label(self.source)} --{guard_label(self.guard)}|"
                f"{names_label(self.firing)}--> {state_label(self.target)}")

    def sort_key(self):
        return (state_label(self.source), G.render(self.guard),
                sorted(self.firing), state_label(self.target))


@dataclass(frozen=True)
class ReoAutomaton:
    alphabet: frozenset[str]
    states: frozenset[StateId]
    transitions: frozenset[Transition]
    initial: StateId | None = None

    def __post_init__(self):
        object.__setattr__(self, "alphabet", frozenset(self.alphabet))
        object.__setattr__(self, "states", frozenset(self.states))
        object.__setattr__(self, "transitions", frozenset(self.transitions))
        for t in self.transitions:
            if t.source not in self.states or t.target not in self.states:
                raise UnknownState(f"transition {t} leaves the state set")
            if not t.firing <= self.alphabet or not t.guard.vars <= self.alphabet:
                raise UnknownNode(f"transition {t} mentions names outside the alphabet")
        if self.initial is not None and self.initial not in self.states:
            raise UnknownState(f"initial state {state_label(self.initial)} not in Q")

    @cached_property
    def _out(self) -> dict[StateId, tuple[Transition, ...]]:
        out: dict[StateId, list[Transition]] = {q: [] for q in self.states}
        for t in sorted(self.transitions, key=Transition.sort_key):
            out[t.source].append(t)
        return {q: tuple(ts) for q, ts in out.items()}

    def outgoing(self, q: StateId) -> tuple[Transition, ...]:
        if q not in self.states:
            raise UnknownState(state_label(q))
        return self._out[q]

    @cached_property
    def used_names(self) -> frozenset[str]:
        """Names referenced by some guard or firing set."""
        used: set[str] = set()
        for t in self.transitions:
            used |= t.guard.vars | t.firing
        return frozenset(used)

    def sorted_states(self) -> list[StateId]:
        return sorted(self.states, key=state_label)

    def sorted_transitions(self) -> list[Transition]:
        return sorted(self.transitions, key=Transition.sort_key)


@dataclass(frozen=True)
class Violation:
    subject: object
    condition: str
    detail: str = ""

    def __str__(self):
        return f"{self.condition}: {self.subject}" + (f" ({self.detail})" if self.detail else "")


@dataclass(frozen=True)
class ValidationReport:
    """Violations found by a validator; empty means well-formed."""

    entries: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.entries

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __str__(self):
        return "ok" if self.ok else "\n".join(map(str, self.entries))


def _downward_closure(table: int, n: int, free_bits: Iterable[int]) -> int:
    for i in free_bits:
        m = G._var_mask(n, i)
        table |= (table & m) >> (1 << i)
    return table


def validate(A: ReoAutomaton) -> ValidationReport:
    """Check reactivity and uniformity of every transition.

    Uniformity is checked on request sets: whenever a request set ``R``
    enables ``q --g|f--> q'``, every ``R'`` with ``f <= R' <= R`` must be
    enabled by some ``q --g''|f--> q'`` as well.  Atoms range over the
    names the automaton actually references.
    """
    names = tuple(sorted(A.used_names))
    n = len(names)
    tables = {t: truth_table(t.guard, names) for t in A.transitions}
    cover: dict[tuple, int] = {}
    for t, tab in tables.items():
        key = (t.source, t.firing, t.target)
        cover[key] = cover.get(key, 0) | tab
    entries = []
    for t in A.sorted_transitions():
        if not G.implies(t.guard, G.hat(t.firing)):
            entries.append(Violation(t, "reactivity", "guard does not imply the firing set"))
            continue
        free = [i for i, x in enumerate(names) if x not in t.firing]
        closed = _downward_closure(tables[t], n, free)
        missing = closed & ~cover[(t.source, t.firing, t.target)]
        if missing:
            k = (missing & -missing).bit_length() - 1
            witness = names_label(x for i, x in enumerate(names) if k >> i & 1)
            entries.append(Violation(t, "uniformity", f"request set {witness} is not covered"))
    return ValidationReport(tuple(entries))


def blocked_guard(A: ReoAutomaton, q: StateId) -> Guard:
    """The guard under which no transition can fire from ``q``."""
    return G.simplify(~G.disj(t.guard for t in A.outgoing(q)))


def _product_parts(A1: ReoAutomaton, A2: ReoAutomaton, out1=None, out2=None):
    """Yield ``(transition, x1, x2)``; one of ``x1``/``x2`` is None for solo steps.

    ``out1``/``out2`` optionally map each state to ``(transition, payload)``
    pairs; the payloads are passed through in place of the parent
    transitions.
    """
    if A1.alphabet & A2.alphabet:
        raise AlphabetOverlap(f"shared names {sorted(A1.alphabet & A2.alphabet)}")
    if out1 is None:
        out1 = {q: [(t, t) for t in A1.outgoing(q)] for q in A1.states}
    if out2 is None:
        out2 = {p: [(t, t) for t in A2.outgoing(p)] for p in A2.states}
    blocked1 = {q: blocked_guard(A1, q) for q in A1.states}
    blocked2 = {p: blocked_guard(A2, p) for p in A2.states}
    for q in A1.sorted_states():
        for p in A2.sorted_states():
            for t1, x1 in out1[q]:
                for t2, x2 in out2[p]:
                    g = G.simplify(t1.guard & t2.guard)
                    if g != G.BOT:
                        yield Transition((q, p), g, t1.firing | t2.firing, (t1.target, t2.target)), x1, x2
                g = G.simplify(t1.guard & blocked2[p])
                if g != G.BOT:
                    yield Transition((q, p), g, t1.firing, (t1.target, p)), x1, None
            for t2, x2 in out2[p]:
                g = G.simplify(t2.guard & blocked1[q])
                if g != G.BOT:
                    yield Transition((q, p), g, t2.firing, (q, t2.target)), None, x2


def _pair_initial(A1, A2):
    if A1.initial is None or A2.initial is None:
        return None
    return (A1.initial, A2.initial)


def product(A1: ReoAutomaton, A2: ReoAutomaton) -> ReoAutomaton:
    """Parallel composition over disjoint alphabets.

    Transitions whose guard simplifies to ``BOT`` can never fire and are
    not emitted.
    """
    transitions = {t for t, _, _ in _product_parts(A1, A2)}
    states = {(q, p) for q in A1.states for p in A2.states}
    return ReoAutomaton(A1.alphabet | A2.alphabet, frozenset(states), frozenset(transitions),
                        _pair_initial(A1, A2))


def _normal_parts(A: ReoAutomaton, items=None):
    items = items if items is not None else [(t, t) for t in A.sorted_transitions()]
    for t, x in items:
        for clause in sorted(G.dnf(t.guard)):
            yield Transition(t.source, clause.as_guard(), t.firing, t.target), x


def normalize(A: ReoAutomaton) -> ReoAutomaton:
    """Split every guard into its DNF clauses."""
    return ReoAutomaton(A.alphabet, A.states, frozenset(t for t, _ in _normal_parts(A)), A.initial)


def _check_pair(A: ReoAutomaton, a: str, b: str):
    for x in (a, b):
        if x not in A.alphabet:
            raise UnknownNode(f"{x} is not in the alphabet")
    if a == b:
        raise SameNode(f"cannot synchronize {a} with itself")


def _sync_parts(A: ReoAutomaton, a: str, b: str, items=None):
    """Yield ``(new_transition, payload)`` for the join of a and b."""
    _check_pair(A, a, b)
    neither = ~G.Var(a) & ~G.Var(b)
    for t, orig in _normal_parts(A, items):
        if G.implies(t.guard, neither):
            continue
        if (a in t.firing) != (b in t.firing):
            continue
        yield Transition(t.source, G.delete_names(t.guard, {a, b}), t.firing - {a, b}, t.target), orig


def synchronize(A: ReoAutomaton, a: str, b: str) -> ReoAutomaton:
    """Join nodes ``a`` and ``b``.  The alphabet is kept unchanged."""
    transitions = frozenset(t for t, _ in _sync_parts(A, a, b))
    return ReoAutomaton(A.alphabet, A.states, transitions, A.initial)


def prune_unreachable(A: ReoAutomaton) -> ReoAutomaton:
    if A.initial is None:
        return A
    seen = {A.initial}
    stack = [A.initial]
    while stack:
        q = stack.pop()
        for t in A.outgoing(q):
            if t.target not in seen:
                seen.add(t.target)
                stack.append(t.target)
    return ReoAutomaton(A.alphabet, frozenset(seen),
                        frozenset(t for t in A.transitions if t.source in seen), A.initial)


@dataclass(frozen=True)
class Bisimulation:
    holds: bool
    relation: frozenset | None = None
    initial_related: bool | None = None

    def __bool__(self):
        return self.holds


Move = tuple[Hashable, StateId, int]  # label, target, satisfying bitmask


def greatest_bisimulation(states1, moves1: dict, states2, moves2: dict, n_atoms: int) -> set:
    """Largest relation in which related states match move-for-move on every atom.

    ``moves[q]`` lists ``(label, target, mask)`` triples where ``mask`` has
    bit ``k`` set when atom ``k`` enables the move.
    """
    def enabled(moves):
        table = {}
        for q, ms in moves.items():
            per_atom = []
            for k in range(n_atoms):
                d: dict = {}
                for label, tgt, mask in ms:
                    if mask >> k & 1:
                        d.setdefault(label, set()).add(tgt)
                per_atom.append(d)
            table[q] = per_atom
        return table

    en1, en2 = enabled(moves1), enabled(moves2)
    rel = {(q1, q2) for q1 in states1 for q2 in states2}

    def matches(q1, q2):
        for d1, d2 in zip(en1[q1], en2[q2]):
            if d1.keys() != d2.keys():
                return False
            for label, tg1 in d1.items():
                tg2 = d2[label]
                if any(all((x, y) not in rel for y in tg2) for x in tg1):
                    return False
                if any(all((x, y) not in rel for x in tg1) for y in tg2):
                    return False
        return True

    changed = True
    while changed:
        changed = False
        for pair in sorted(rel, key=lambda p: (state_label(p[0]), state_label(p[1]))):
            if pair in rel and not matches(*pair):
                rel.discard(pair)
                changed = True
    return rel


def _moves(A: ReoAutomaton, names, label: Callable[[Transition], Hashable] | None = None):
    label = label or (lambda t: t.firing)
    moves = {q: [] for q in A.states}
    for t in A.transitions:
        moves[t.source].append((label(t), t.target, truth_table(t.guard, names)))
    return moves


def bisimulation_result(states1, states2, rel, init1, init2) -> Bisimulation:
    left = {q for q, _ in rel}
    right = {p for _, p in rel}
    holds = left >= set(states1) and right >= set(states2)
    initial = None
    if init1 is not None and init2 is not None:
        initial = (init1, init2) in rel
    return Bisimulation(holds, frozenset(rel) if holds else None, initial)


def bisimilar(A1: ReoAutomaton, A2: ReoAutomaton) -> Bisimulation:
    """Per-atom bisimilarity of two automata over the same alphabet.

    ``holds`` requires every state of each automaton to be related to some
    state of the other; ``initial_related`` reports separately whether the
    initial states are related.
    """
    if A1.alphabet != A2.alphabet:
        raise AlphabetMismatch("bisimulation needs identical alphabets")
    names = tuple(sorted(A1.used_names | A2.used_names))
    rel = greatest_bisimulation(A1.states, _moves(A1, names), A2.states, _moves(A2, names),
                                1 << len(names))
    return bisimulation_result(A1.states, A2.states, rel, A1.initial, A2.initial)


def _dot_id(q: StateId) -> str:
    return '"' + state_label(q).replace('"', r'\"') + '"'


def to_dot(A: ReoAutomaton, edge_label: Callable[[Transition], str] | None = None,
           name: str = "reo") -> str:
    """Deterministic DOT rendering; edges labeled ``g|f``."""
    edge_label = edge_label or (lambda t: f"{guard_label(t.guard)}|{names_label(t.firing)}")
    lines = [f"digraph {name} {{"]
    for q in A.sorted_states():
        shape = "doublecircle" if q == A.initial else "circle"
        lines.append(f"  {_dot_id(q)} [shape={shape}];")
    for t in A.sorted_transitions():
        text = edge_label(t).replace('"', r'\"')
        lines.append(f'  {_dot_id(t.source)} -> {_dot_id(t.target)} [label="{text}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


__all__ = [
    "StateId", "Transition", "ReoAutomaton", "ValidationReport", "Violation", "Bisimulation",
    "validate", "blocked_guard", "product", "normalize", "synchronize", "bisimilar",
    "prune_unreachable", "to_dot", "state_label", "names_label", "guard_label", "greatest_bisimulation",
    "AlphabetOverlap", "AlphabetMismatch", "UnknownState", "UnknownNode", "SameNode",
]
