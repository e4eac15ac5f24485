"""Delay sequences: the order in which a transition's flow tuples complete.

A transition that synchronizes several primitive flows is divided into
single-tuple steps.  A tuple whose outputs feed another tuple's inputs
must complete first; everything else may interleave.  The canonical form
is :class:`DelayPoset`, a strict partial order over tuples.  Expression
trees built from ``;`` (sequence) and ``|`` (parallel) are produced by
:func:`render` and compared through the posets they induce.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, Union

from .errors import ReoError
from .stochastic import FlowTuple


class CyclicDependency(ReoError):
    """Tuples feed each other in a cycle, so no completion order exists."""


@dataclass(frozen=True, eq=False)
class DelayPoset:
    """Tuples plus the transitively closed precedence relation.

    ``(x, y)`` in ``precedence`` means ``x`` completes before ``y``.
    Tuples keep their given order, which only affects printing.
    """

    tuples: tuple[FlowTuple, ...]
    precedence: frozenset[tuple[FlowTuple, FlowTuple]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "tuples", tuple(dict.fromkeys(self.tuples)))
        object.__setattr__(self, "precedence", frozenset(self.precedence))

    def __eq__(self, other):
        if not isinstance(other, DelayPoset):
            return NotImplemented
        return set(self.tuples) == set(other.tuples) and self.precedence == other.precedence

    def __hash__(self):
        return hash((frozenset(self.tuples), self.precedence))

    def __len__(self):
        return len(self.tuples)

    @cached_property
    def predecessors(self) -> dict[FlowTuple, frozenset[FlowTuple]]:
        pre: dict[FlowTuple, set] = {t: set() for t in self.tuples}
        for x, y in self.precedence:
            pre[y].add(x)
        return {t: frozenset(v) for t, v in pre.items()}

    def less(self, x: FlowTuple, y: FlowTuple) -> bool:
        return (x, y) in self.precedence

    def comparable(self, x: FlowTuple, y: FlowTuple) -> bool:
        return (x, y) in self.precedence or (y, x) in self.precedence

    def enabled(self, fired: Iterable[FlowTuple] = ()) -> list[FlowTuple]:
        """Unfired tuples whose predecessors have all fired, in tuple order."""
        fired = frozenset(fired)
        return [t for t in self.tuples if t not in fired and self.predecessors[t] <= fired]

    def is_downset(self, fired: Iterable[FlowTuple]) -> bool:
        fired = frozenset(fired)
        return fired <= set(self.tuples) and all(self.predecessors[t] <= fired for t in fired)

    def restrict(self, keep: Iterable[FlowTuple]) -> DelayPoset:
        keep = frozenset(keep)
        return DelayPoset(tuple(t for t in self.tuples if t in keep),
                          frozenset(p for p in self.precedence if p[0] in keep and p[1] in keep))

    def components(self) -> list[frozenset[FlowTuple]]:
        """Connected components of the comparability graph, in tuple order."""
        return _components(self.tuples, self.comparable)


def _components(items, adjacent) -> list[frozenset]:
    seen: set = set()
    out = []
    for x in items:
        if x in seen:
            continue
        comp, stack = {x}, [x]
        seen.add(x)
        while stack:
            y = stack.pop()
            for z in items:
                if z not in seen and adjacent(y, z):
                    seen.add(z)
                    comp.add(z)
                    stack.append(z)
        out.append(frozenset(comp))
    return out


def _closure(items, edges: set[tuple]) -> frozenset[tuple]:
    succ = {x: set() for x in items}
    for x, y in edges:
        succ[x].add(y)
    closed = set()
    for x in items:
        stack = list(succ[x])
        reach = set()
        while stack:
            y = stack.pop()
            if y in reach:
                continue
            reach.add(y)
            stack.extend(succ[y])
        if x in reach:
            raise CyclicDependency(f"tuple {x} depends on itself")
        closed |= {(x, y) for y in reach}
    return frozenset(closed)


def ext(tuples: Iterable[FlowTuple]) -> DelayPoset:
    """Order the tuples of one transition by data dependency.

    ``x`` precedes ``y`` when some output of ``x`` is an input of ``y``;
    the relation is closed transitively.
    """
    tuples = tuple(dict.fromkeys(tuples))
    direct = {(x, y) for x in tuples for y in tuples if x.outputs & y.inputs}
    return DelayPoset(tuples, _closure(tuples, direct))


def initial_tuples(tuples: Iterable[FlowTuple]) -> list[FlowTuple]:
    """Tuples none of whose inputs is produced by another tuple."""
    tuples = list(tuples)
    return [t for t in tuples if all(not (t.inputs & u.outputs) for u in tuples)]


# --- expressions -------------------------------------------------------------------

@dataclass(frozen=True)
class Eps:
    pass


@dataclass(frozen=True)
class Tup:
    tuple: FlowTuple


@dataclass(frozen=True)
class Seq:
    parts: tuple


@dataclass(frozen=True)
class Par:
    parts: tuple


EPS = Eps()
DelaySeq = Union[Eps, Tup, Seq, Par]


def seq(*parts: DelaySeq) -> DelaySeq:
    return _flat(Seq, parts)


def par(*parts: DelaySeq) -> DelaySeq:
    return _flat(Par, parts)


def _flat(kind, parts) -> DelaySeq:
    flat = []
    for p in parts:
        if isinstance(p, FlowTuple):
            p = Tup(p)
        if isinstance(p, Eps):
            continue
        flat.extend(p.parts if isinstance(p, kind) else [p])
    if not flat:
        return EPS
    return flat[0] if len(flat) == 1 else kind(tuple(flat))


def leaves(expr: DelaySeq) -> Iterator[FlowTuple]:
    if isinstance(expr, Tup):
        yield expr.tuple
    elif isinstance(expr, (Seq, Par)):
        for p in expr.parts:
            yield from leaves(p)


def induced(expr: DelaySeq) -> DelayPoset:
    """The partial order an expression denotes."""
    def walk(e) -> set:
        if isinstance(e, Seq):
            rel = set()
            seen: list[FlowTuple] = []
            for p in e.parts:
                here = list(leaves(p))
                rel |= walk(p) | {(x, y) for x in seen for y in here}
                seen += here
            return rel
        if isinstance(e, Par):
            return set().union(*(walk(p) for p in e.parts))
        return set()

    ts = list(leaves(expr))
    if len(ts) != len(set(ts)):
        raise ValueError("a tuple occurs more than once in the expression")
    return DelayPoset(tuple(ts), frozenset(walk(expr)))


def as_poset(x: DelaySeq | DelayPoset) -> DelayPoset:
    return x if isinstance(x, DelayPoset) else induced(x)


def equivalent(x: DelaySeq | DelayPoset, y: DelaySeq | DelayPoset) -> bool:
    """Same tuples under the same ordering constraints."""
    return as_poset(x) == as_poset(y)


def nodes_of(x: DelaySeq | DelayPoset | FlowTuple) -> frozenset[str]:
    if isinstance(x, FlowTuple):
        return x.nodes
    ts = x.tuples if isinstance(x, DelayPoset) else leaves(x)
    return frozenset().union(*(t.nodes for t in ts))


class Rendered(NamedTuple):
    expr: DelaySeq
    exact: bool


def render(p: DelayPoset) -> Rendered:
    """Series-parallel expression for ``p``.

    Posets that are not series-parallel get a layered approximation with
    ``exact=False``; the poset stays the authoritative description.
    """
    order = {t: i for i, t in enumerate(p.tuples)}

    def go(items: list[FlowTuple]) -> tuple[DelaySeq, bool]:
        if not items:
            return EPS, True
        if len(items) == 1:
            return Tup(items[0]), True
        comps = _components(items, p.comparable)
        if len(comps) > 1:
            parts = [go(sorted(c, key=order.get)) for c in comps]
            return par(*(e for e, _ in parts)), all(ok for _, ok in parts)
        blocks = _components(items, lambda x, y: x != y and not p.comparable(x, y))
        if len(blocks) > 1:
            blocks.sort(key=lambda b: sum(1 for x in b for y in items if p.less(y, x)))
            chained = all(p.less(x, y) for b1, b2 in itertools.pairwise(blocks)
                          for x in b1 for y in b2)
            if chained:
                parts = [go(sorted(b, key=order.get)) for b in blocks]
                return seq(*(e for e, _ in parts)), all(ok for _, ok in parts)
        # not series-parallel: group by longest chain below each tuple
        depth: dict[FlowTuple, int] = {}
        for t in sorted(items, key=lambda t: len(p.predecessors[t])):
            depth[t] = 1 + max((depth[u] for u in p.predecessors[t] if u in depth), default=-1)
        layers = [[t for t in items if depth[t] == d] for d in range(max(depth.values()) + 1)]
        return seq(*(par(*map(Tup, layer)) for layer in layers)), False

    return Rendered(*go(list(p.tuples)))


def format_seq(expr: DelaySeq, names: bool = True) -> str:
    """Print an expression.

    With ``names`` tuples print as their rate names and operators without
    spaces, e.g. ``(θ5;θ6)|(θ12;θ13)``; otherwise tuples print in full and
    operators are spaced, e.g. ``({a},{b,c},γab) ; ({b,c},∅,γcF)``.
    """
    sep_seq, sep_par = (";", "|") if names else (" ; ", " | ")

    def go(e, parent) -> str:
        if isinstance(e, Eps):
            return "ε"
        if isinstance(e, Tup):
            return e.tuple.rate_name if names else str(e.tuple)
        sep = sep_seq if isinstance(e, Seq) else sep_par
        text = sep.join(go(x, type(e)) for x in e.parts)
        return f"({text})" if parent is not None and parent is not type(e) else text

    return go(expr, None)


def linear_extensions(p: DelayPoset) -> Iterator[tuple[FlowTuple, ...]]:
    """Brute-force enumeration of all completion orders."""
    for perm in itertools.permutations(p.tuples):
        pos = {t: i for i, t in enumerate(perm)}
        if all(pos[x] < pos[y] for x, y in p.precedence):
            yield perm


def downsets(p: DelayPoset) -> list[frozenset[FlowTuple]]:
    """All fired sets reachable by completing enabled tuples, smallest first."""
    seen = {frozenset()}
    frontier = [frozenset()]
    out = [frozenset()]
    while frontier:
        nxt = []
        for fired in frontier:
            for t in p.enabled(fired):
                grown = fired | {t}
                if grown not in seen:
                    seen.add(grown)
                    nxt.append(grown)
                    out.append(grown)
        frontier = nxt
    return out


__all__ = [
    "DelayPoset", "ext", "initial_tuples", "Eps", "Tup", "Seq", "Par", "EPS", "DelaySeq",
    "seq", "par", "leaves", "induced", "as_poset", "equivalent", "nodes_of", "Rendered",
    "render", "format_seq", "linear_extensions", "downsets", "CyclicDependency",
]
