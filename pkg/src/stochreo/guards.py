"""Guards: the free Boolean algebra over node names.

Guards are immutable expression trees.  Equality and hashing are
*semantic*: two guards compare equal when they denote the same Boolean
function, so sets of guards (and of transitions carrying guards) are
deduplicated modulo the algebra.  All semantic questions are answered by
enumerating truth assignments packed into Python integers, which is fast
enough for the alphabets that show up in connectors.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Mapping

from .errors import ReoError

__all__ = [
    "Guard", "Var", "Top", "Bot", "And", "Or", "Not", "TOP", "BOT",
    "Atom", "Clause", "atoms", "evaluate", "implies", "equivalent", "hat",
    "dnf", "simplify", "is_clause", "clause_of", "delete_names", "render",
    "truth_table", "conj", "disj", "UnknownVariable", "NotAClause",
]


class UnknownVariable(ReoError):
    """A guard mentions a name outside the atom's alphabet."""


class NotAClause(ReoError):
    """An operation that needs a conjunction of literals got something else."""


@lru_cache(maxsize=None)
def _var_mask(n: int, i: int) -> int:
    # bit k is set iff bit i of k is set, for k in range(2**n)
    run = 1 << i
    block = ((1 << run) - 1) << run
    size = 1 << n
    period = run << 1
    reps = size // period
    mask = 0
    for r in range(reps):
        mask |= block << (r * period)
    return mask


def _full(n: int) -> int:
    return (1 << (1 << n)) - 1


class Guard:
    """Base class of guard expressions.

    Supports ``&``, ``|`` and ``~`` for building larger guards.
    """

    __slots__ = ()

    @property
    def vars(self) -> frozenset[str]:
        raise NotImplementedError

    def _table(self, index: Mapping[str, int], n: int) -> int:
        raise NotImplementedError

    @cached_property
    def _key(self) -> tuple[tuple[str, ...], int]:
        names = tuple(sorted(self.vars))
        table = truth_table(self, names)
        keep = []
        for i in range(len(names)):
            m = _var_mask(len(names), i)
            if (table & m) >> (1 << i) != table & ~m & _full(len(names)):
                keep.append(i)
        if len(keep) != len(names):
            # cofactor with inessential names set false, then compress
            projected = 0
            for k in range(1 << len(keep)):
                full_k = sum(1 << i for j, i in enumerate(keep) if k >> j & 1)
                if table >> full_k & 1:
                    projected |= 1 << k
            table = projected
        return tuple(names[i] for i in keep), table

    def __eq__(self, other):
        if not isinstance(other, Guard):
            return NotImplemented
        return self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __and__(self, other: Guard) -> Guard:
        return conj([self, other])

    def __or__(self, other: Guard) -> Guard:
        return disj([self, other])

    def __invert__(self) -> Guard:
        if isinstance(self, Not):
            return self.arg
        if isinstance(self, Top):
            return BOT
        if isinstance(self, Bot):
            return TOP
        return Not(self)

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True, eq=False)
class Var(Guard):
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("node names must be non-empty")

    @property
    def vars(self):
        return frozenset({self.name})

    def _table(self, index, n):
        return _var_mask(n, index[self.name])

    def __repr__(self):
        return f"Var({self.name!r})"


@dataclass(frozen=True, eq=False)
class Top(Guard):
    @property
    def vars(self):
        return frozenset()

    def _table(self, index, n):
        return _full(n)

    def __repr__(self):
        return "TOP"


@dataclass(frozen=True, eq=False)
class Bot(Guard):
    @property
    def vars(self):
        return frozenset()

    def _table(self, index, n):
        return 0

    def __repr__(self):
        return "BOT"


@dataclass(frozen=True, eq=False)
class And(Guard):
    args: tuple[Guard, ...]

    @cached_property
    def vars(self):
        return frozenset().union(*(a.vars for a in self.args))

    def _table(self, index, n):
        t = _full(n)
        for a in self.args:
            t &= a._table(index, n)
        return t

    def __repr__(self):
        return "And(" + ", ".join(map(repr, self.args)) + ")"


@dataclass(frozen=True, eq=False)
class Or(Guard):
    args: tuple[Guard, ...]

    @cached_property
    def vars(self):
        return frozenset().union(*(a.vars for a in self.args))

    def _table(self, index, n):
        t = 0
        for a in self.args:
            t |= a._table(index, n)
        return t

    def __repr__(self):
        return "Or(" + ", ".join(map(repr, self.args)) + ")"


@dataclass(frozen=True, eq=False)
class Not(Guard):
    arg: Guard

    @property
    def vars(self):
        return self.arg.vars

    def _table(self, index, n):
        return _full(n) & ~self.arg._table(index, n)

    def __repr__(self):
        return f"Not({self.arg!r})"


TOP = Top()
BOT = Bot()


def conj(guards: Iterable[Guard]) -> Guard:
    """Flattening conjunction; drops ``TOP`` operands."""
    args: list[Guard] = []
    for g in guards:
        if isinstance(g, Bot):
            return BOT
        if isinstance(g, Top):
            continue
        args.extend(g.args if isinstance(g, And) else [g])
    if not args:
        return TOP
    return args[0] if len(args) == 1 else And(tuple(args))


def disj(guards: Iterable[Guard]) -> Guard:
    """Flattening disjunction; drops ``BOT`` operands."""
    args: list[Guard] = []
    for g in guards:
        if isinstance(g, Top):
            return TOP
        if isinstance(g, Bot):
            continue
        args.extend(g.args if isinstance(g, Or) else [g])
    if not args:
        return BOT
    return args[0] if len(args) == 1 else Or(tuple(args))


def truth_table(g: Guard, names: Iterable[str]) -> int:
    """Bitmask of the satisfying assignments of ``g`` over ``names``.

    Assignment ``k`` gives ``names[i]`` the value of bit ``i`` of ``k``.
    Every variable of ``g`` must occur in ``names``.
    """
    names = tuple(names)
    index = {x: i for i, x in enumerate(names)}
    missing = g.vars - index.keys()
    if missing:
        raise UnknownVariable(f"guard mentions {sorted(missing)} outside {list(names)}")
    return g._table(index, len(names))


@dataclass(frozen=True)
class Atom:
    """A total truth assignment over a fixed alphabet."""

    alphabet: frozenset[str]
    true: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.true <= self.alphabet:
            raise ValueError("atom sets names outside its alphabet")

    def __getitem__(self, name: str) -> bool:
        if name not in self.alphabet:
            raise UnknownVariable(name)
        return name in self.true

    def as_guard(self) -> Guard:
        return conj([Var(x) if x in self.true else Not(Var(x)) for x in sorted(self.alphabet)])

    def restrict(self, names: Iterable[str]) -> Atom:
        names = frozenset(names) & self.alphabet
        return Atom(names, self.true & names)


def atoms(alphabet: Iterable[str]) -> frozenset[Atom]:
    """All ``2**len(alphabet)`` atoms over ``alphabet``."""
    alphabet = frozenset(alphabet)
    ordered = sorted(alphabet)
    return frozenset(
        Atom(alphabet, frozenset(itertools.compress(ordered, bits)))
        for bits in itertools.product((False, True), repeat=len(ordered))
    )


def evaluate(g: Guard, atom: Atom) -> bool:
    if isinstance(g, Var):
        return atom[g.name]
    if isinstance(g, Top):
        return True
    if isinstance(g, Bot):
        return False
    if isinstance(g, Not):
        return not evaluate(g.arg, atom)
    if isinstance(g, And):
        return all(evaluate(a, atom) for a in g.args)
    if isinstance(g, Or):
        return any(evaluate(a, atom) for a in g.args)
    raise TypeError(f"not a guard: {g!r}")


def implies(g1: Guard, g2: Guard) -> bool:
    """The natural order ``g1 <= g2`` of the algebra."""
    names = tuple(sorted(g1.vars | g2.vars))
    return truth_table(g1, names) & ~truth_table(g2, names) == 0


def equivalent(g1: Guard, g2: Guard) -> bool:
    return g1 == g2


def hat(names: Iterable[str]) -> Guard:
    """Conjunction of all the given names (``TOP`` for none)."""
    return conj(Var(x) for x in sorted(set(names)))


@dataclass(frozen=True, order=True)
class Clause:
    """A satisfiable conjunction of literals."""

    positives: frozenset[str] = field(default_factory=frozenset)
    negatives: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.positives & self.negatives:
            raise ValueError("contradictory clause")

    @property
    def names(self) -> frozenset[str]:
        return self.positives | self.negatives

    def as_guard(self) -> Guard:
        lits = [(x, True) for x in self.positives] + [(x, False) for x in self.negatives]
        lits.sort()
        return conj(Var(x) if pos else Not(Var(x)) for x, pos in lits)

    def delete(self, names: Iterable[str]) -> Clause:
        names = frozenset(names)
        return Clause(self.positives - names, self.negatives - names)

    def __str__(self):
        return render(self.as_guard())


def _primes(names: tuple[str, ...], table: int) -> list[tuple[int, int]]:
    # Quine-McCluskey: implicants as (value, dont_care_mask) over bit positions
    n = len(names)
    current = {(k, 0) for k in range(1 << n) if table >> k & 1}
    primes: set[tuple[int, int]] = set()
    while current:
        merged: set[tuple[int, int]] = set()
        used: set[tuple[int, int]] = set()
        by_mask: dict[int, list[tuple[int, int]]] = {}
        for imp in current:
            by_mask.setdefault(imp[1], []).append(imp)
        for mask, group in by_mask.items():
            values = {v for v, _ in group}
            for v in values:
                for i in range(n):
                    bit = 1 << i
                    if mask & bit or v & bit:
                        continue
                    if v | bit in values:
                        merged.add((v, mask | bit))
                        used.add((v, mask))
                        used.add((v | bit, mask))
        primes |= current - used
        current = merged
    return sorted(primes)


def dnf(g: Guard) -> frozenset[Clause]:
    """Disjunctive normal form made of all prime implicants of ``g``.

    The result depends only on the Boolean function ``g`` denotes, so
    equivalent guards normalize identically.  ``BOT`` yields no clauses,
    ``TOP`` the single empty clause.
    """
    names, table = g._key
    clauses = set()
    for value, mask in _primes(names, table):
        pos = frozenset(x for i, x in enumerate(names) if not mask >> i & 1 and value >> i & 1)
        neg = frozenset(x for i, x in enumerate(names) if not mask >> i & 1 and not value >> i & 1)
        clauses.add(Clause(pos, neg))
    return frozenset(clauses)


def simplify(g: Guard) -> Guard:
    """An equivalent guard written as a disjunction of prime implicants."""
    clauses = sorted(dnf(g), key=_clause_sort_key)
    return disj(c.as_guard() for c in clauses)


def _clause_sort_key(c: Clause):
    return sorted([(x, x in c.negatives) for x in c.names])


def _literals(g: Guard) -> list[tuple[str, bool]] | None:
    if isinstance(g, Top):
        return []
    if isinstance(g, Var):
        return [(g.name, True)]
    if isinstance(g, Not) and isinstance(g.arg, Var):
        return [(g.arg.name, False)]
    if isinstance(g, And):
        out = []
        for a in g.args:
            lits = _literals(a)
            if lits is None:
                return None
            out.extend(lits)
        return out
    return None


def is_clause(g: Guard) -> bool:
    return _literals(g) is not None


def clause_of(g: Guard) -> Clause:
    lits = _literals(g)
    if lits is None:
        raise NotAClause(f"{render(g)} is not a conjunction of literals")
    pos = frozenset(x for x, p in lits if p)
    neg = frozenset(x for x, p in lits if not p)
    return Clause(pos, neg)


def delete_names(g: Guard, names: Iterable[str]) -> Guard:
    """Remove every literal over ``names`` from the clause ``g``."""
    return clause_of(g).delete(names).as_guard()


def _render_clause(lits: list[tuple[str, bool]]) -> str:
    if not lits:
        return "⊤"
    lits = sorted(set(lits))
    sep = "" if all(len(x) == 1 for x, _ in lits) else "&"
    return sep.join(x if p else "!" + x for x, p in lits)


def render(g: Guard) -> str:
    """Compact text form, e.g. ``a!b`` or ``ab|!c``.

    Names are concatenated when they are all single characters and joined
    with ``&`` otherwise, so multi-character names stay unambiguous.
    """
    if isinstance(g, Bot):
        return "⊥"
    lits = _literals(g)
    if lits is not None:
        return _render_clause(lits)
    clauses = sorted(dnf(g), key=_clause_sort_key)
    if not clauses:
        return "⊥"
    return "|".join(
        _render_clause([(x, True) for x in c.positives] + [(x, False) for x in c.negatives])
        for c in clauses
    )
