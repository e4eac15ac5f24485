"""The ``.reo`` connector format.

One directive per line, ``#`` starts a comment::

    rates γa=2 γd=1.5            # symbolic rate names and their values
    boundary a @ γa              # a boundary node and its arrival rate
    lossysync a b flow=γab loss=0.3
    fifo1 c d in=γcF out=γFd
    join b c                     # plug sink b into source c

Rates are decimal literals or names bound by a ``rates`` line anywhere in
the file.  A literal rate gets the same conventional name a primitive
would give it (``γaL`` for a lossy sync's loss, ``γa`` for an arrival).

Hand-built channels are declared with ``custom`` and given transitions
with ``step``; guards are ``true`` or literals joined by ``&``, firing sets
are comma lists or ``-``, and tuples are ``I>O@rate``::

    custom X a b initial=q
    step X q a a q a>@γx
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Union

from . import guards as G
from .automaton import Transition
from .errors import ReoError
from .stochastic import (KINDS, REQUIRED_RATES, FlowTuple, Rate, STransition,
                         StochasticReoAutomaton, StructureWarning, default_rate_name,
                         primitive, product_s, synchronize_s)


class DslError(ReoError):
    """A problem in a connector file; ``kind`` names the failure class."""

    def __init__(self, kind: str, line: int | None, message: str):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{kind}: {message}")
        self.kind = kind
        self.line = line


RateRef = Union[float, str]


@dataclass(frozen=True)
class ChannelDecl:
    kind: str
    nodes: tuple[str, ...]
    rates: tuple[tuple[str, RateRef], ...]
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class StepDecl:
    channel: str
    source: str
    positives: tuple[str, ...]
    negatives: tuple[str, ...]
    firing: tuple[str, ...]
    target: str
    tuples: tuple[tuple[tuple[str, ...], tuple[str, ...], RateRef], ...]
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class CustomDecl:
    name: str
    nodes: tuple[str, ...]
    initial: str
    line: int | None = field(default=None, compare=False)


@dataclass
class ConnectorSpec:
    boundary: list[tuple[str, RateRef]] = field(default_factory=list)
    channels: list[ChannelDecl | CustomDecl] = field(default_factory=list)
    steps: list[StepDecl] = field(default_factory=list)
    joins: list[tuple[str, str]] = field(default_factory=list)
    rates: dict[str, float] = field(default_factory=dict)
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def channel_nodes(self) -> list[str]:
        return [x for c in self.channels for x in c.nodes]


_NAME = re.compile(r"[^\s=@#&!,>|]+$")


def _name(tok: str, line: int) -> str:
    if not _NAME.match(tok) or _is_number(tok):
        raise DslError("syntax-error", line, f"bad node name {tok!r}")
    return tok


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _rate_ref(tok: str, line: int) -> RateRef:
    if _is_number(tok):
        v = float(tok)
        if not (v > 0 and math.isfinite(v)):
            raise DslError("syntax-error", line, f"rate {tok} must be positive and finite")
        return v
    if not _NAME.match(tok):
        raise DslError("syntax-error", line, f"bad rate {tok!r}")
    return tok


def _kv(tok: str, line: int) -> tuple[str, str]:
    key, eq, value = tok.partition("=")
    if not eq or not key or not value:
        raise DslError("syntax-error", line, f"expected key=value, got {tok!r}")
    return key, value


def _names_list(tok: str, line: int) -> tuple[str, ...]:
    if tok in ("", "-"):
        return ()
    return tuple(_name(x, line) for x in tok.split(","))


def _parse_step(toks: list[str], line: int) -> StepDecl:
    if len(toks) < 6:
        raise DslError("syntax-error", line, "step needs: channel source guard firing target [tuples]")
    channel, src, guard, firing, dst = toks[1:6]
    pos, neg = [], []
    if guard not in ("true", "⊤"):
        for lit in guard.split("&"):
            if lit.startswith("!"):
                neg.append(_name(lit[1:], line))
            else:
                pos.append(_name(lit, line))
    tuples = []
    for tok in toks[6:]:
        flow, at, rate = tok.partition("@")
        ins, gt, outs = flow.partition(">")
        if not at or not gt:
            raise DslError("syntax-error", line, f"expected I>O@rate, got {tok!r}")
        tuples.append((_names_list(ins, line), _names_list(outs, line), _rate_ref(rate, line)))
    return StepDecl(channel, src, tuple(pos), tuple(neg), _names_list(firing, line), dst,
                    tuple(tuples), line)


def parse(text: str) -> ConnectorSpec:
    spec = ConnectorSpec()
    owner: dict[str, int] = {}
    boundary_line: dict[str, int] = {}
    customs: dict[str, CustomDecl] = {}
    joined: dict[str, int] = {}
    rate_uses: list[tuple[str, int]] = []

    def claim(x: str, line: int):
        if x in owner:
            raise DslError("duplicate-node", line, f"{x} already belongs to the channel on line {owner[x]}")
        owner[x] = line

    for n, raw in enumerate(text.splitlines(), start=1):
        toks = raw.split("#", 1)[0].split()
        if not toks:
            continue
        head = toks[0]
        if head == "rates":
            for tok in toks[1:]:
                key, value = _kv(tok, n)
                v = _rate_ref(value, n)
                if not isinstance(v, float):
                    raise DslError("syntax-error", n, f"rate {key} needs a number")
                if key in spec.rates:
                    raise DslError("duplicate-rate", n, f"rate {key} bound twice")
                spec.rates[key] = v
        elif head == "boundary":
            if len(toks) != 4 or toks[2] != "@":
                raise DslError("syntax-error", n, "expected: boundary <name> @ <rate>")
            x = _name(toks[1], n)
            if x in boundary_line:
                raise DslError("duplicate-node", n, f"{x} declared boundary on line {boundary_line[x]}")
            boundary_line[x] = n
            r = _rate_ref(toks[3], n)
            if isinstance(r, str):
                rate_uses.append((r, n))
            spec.boundary.append((x, r))
        elif head == "join":
            if len(toks) != 3:
                raise DslError("syntax-error", n, "expected: join <sink> <source>")
            a, b = _name(toks[1], n), _name(toks[2], n)
            if a == b:
                raise DslError("syntax-error", n, f"cannot join {a} with itself")
            for x in (a, b):
                if x in joined:
                    raise DslError("duplicate-node", n, f"{x} already joined on line {joined[x]}")
                joined[x] = n
            spec.joins.append((a, b))
            spec.lines[("join", a, b)] = n
        elif head == "custom":
            if len(toks) < 3 or not toks[-1].startswith("initial="):
                raise DslError("syntax-error", n, "expected: custom <name> <nodes…> initial=<state>")
            name = _name(toks[1], n)
            if name in customs:
                raise DslError("duplicate-channel", n, f"custom channel {name} declared twice")
            nodes = tuple(_name(x, n) for x in toks[2:-1])
            for x in nodes:
                claim(x, n)
            decl = CustomDecl(name, nodes, _name(toks[-1].partition("=")[2], n), n)
            customs[name] = decl
            spec.channels.append(decl)
        elif head == "step":
            step = _parse_step(toks, n)
            if step.channel not in customs:
                raise DslError("unknown-channel", n, f"no custom channel {step.channel}")
            nodes = set(customs[step.channel].nodes)
            used = set(step.positives + step.negatives + step.firing)
            used |= {x for i, o, _ in step.tuples for x in i + o}
            if not used <= nodes:
                raise DslError("undeclared-node", n,
                               f"{', '.join(sorted(used - nodes))} not nodes of {step.channel}")
            rate_uses += [(r, n) for _, _, r in step.tuples if isinstance(r, str)]
            spec.steps.append(step)
        elif head in KINDS:
            nodes, rates = [], []
            for tok in toks[1:]:
                if "=" in tok:
                    key, value = _kv(tok, n)
                    r = _rate_ref(value, n)
                    if isinstance(r, str):
                        rate_uses.append((r, n))
                    rates.append((key, r))
                elif rates:
                    raise DslError("syntax-error", n, "nodes must come before rates")
                else:
                    nodes.append(_name(tok, n))
            keys = [k for k, _ in rates]
            need = REQUIRED_RATES[head]
            if len(nodes) != (3 if head in ("merger", "replicator") else 2):
                raise DslError("bad-arity", n, f"{head} takes {3 if head in ('merger', 'replicator') else 2} nodes")
            if sorted(keys) != sorted(need) or len(set(keys)) != len(keys):
                raise DslError("missing-rate", n, f"{head} needs exactly the rates {', '.join(need)}")
            for x in nodes:
                claim(x, n)
            spec.channels.append(ChannelDecl(head, tuple(nodes), tuple(rates), n))
        else:
            raise DslError("unknown-kind", n, f"unknown directive or channel kind {head!r}")

    for (a, b), n in ((j, spec.lines[("join",) + j]) for j in spec.joins):
        for x in (a, b):
            if x not in owner:
                raise DslError("dangling-join", n, f"{x} is not a node of any channel")
            if x in boundary_line:
                raise DslError("duplicate-node", n, f"{x} is both joined and a boundary node")
    for x, n in boundary_line.items():
        if x not in owner:
            raise DslError("dangling-boundary", n, f"{x} is not a node of any channel")
    for x, n in owner.items():
        if x not in boundary_line and x not in joined:
            raise DslError("undeclared-node", n, f"{x} is neither a boundary node nor joined")
    for r, n in rate_uses:
        if r not in spec.rates:
            raise DslError("unknown-rate", n, f"rate {r} is not bound by a rates line")
    return spec


def _fmt_rate(r: RateRef) -> str:
    return r if isinstance(r, str) else repr(r)


def render(spec: ConnectorSpec) -> str:
    """Text that parses back to an equal spec."""
    out = []
    if spec.rates:
        out.append("rates " + " ".join(f"{k}={v!r}" for k, v in spec.rates.items()))
    out += [f"boundary {x} @ {_fmt_rate(r)}" for x, r in spec.boundary]
    for c in spec.channels:
        if isinstance(c, CustomDecl):
            out.append(f"custom {c.name} {' '.join(c.nodes)} initial={c.initial}")
            for s in spec.steps:
                if s.channel == c.name:
                    lits = list(s.positives) + ["!" + x for x in s.negatives]
                    tuples = [f"{','.join(i)}>{','.join(o)}@{_fmt_rate(r)}" for i, o, r in s.tuples]
                    out.append(" ".join(["step", s.channel, s.source, "&".join(lits) or "true",
                                         ",".join(s.firing) or "-", s.target] + tuples))
        else:
            rates = " ".join(f"{k}={_fmt_rate(r)}" for k, r in c.rates)
            out.append(f"{c.kind} {' '.join(c.nodes)} {rates}")
    out += [f"join {a} {b}" for a, b in spec.joins]
    return "\n".join(out) + "\n"


def _resolve(spec: ConnectorSpec, r: RateRef, default_name: str) -> Rate:
    if isinstance(r, str):
        return Rate(r, spec.rates[r])
    return Rate(default_name, r)


def _custom(spec: ConnectorSpec, c: CustomDecl, arrivals: dict) -> StochasticReoAutomaton:
    states = {c.initial}
    steps = []
    for s in spec.steps:
        if s.channel != c.name:
            continue
        states |= {s.source, s.target}
        guard = G.conj([G.Var(x) for x in s.positives] + [~G.Var(x) for x in s.negatives])
        tuples = []
        for i, o, r in s.tuples:
            rate = _resolve(spec, r, f"γ{c.name}")
            tuples.append(FlowTuple(frozenset(i), frozenset(o), rate.value, rate.name,
                                    ((c.name, s.source, s.target),)))
        steps.append(STransition(Transition(s.source, guard, frozenset(s.firing), s.target),
                                 tuple(tuples)))
    return StochasticReoAutomaton(
        frozenset(c.nodes), frozenset(states), tuple(steps), c.initial,
        {x: a.value for x, a in arrivals.items()}, {x: a.name for x, a in arrivals.items()},
        {c.name: ()})


def channel_automata(spec: ConnectorSpec) -> list[StochasticReoAutomaton]:
    arrivals = {x: _resolve(spec, r, "γ" + x) for x, r in spec.boundary}
    parts = []
    for c in spec.channels:
        mine = {x: arrivals[x] for x in c.nodes if x in arrivals}
        if isinstance(c, CustomDecl):
            parts.append(_custom(spec, c, mine))
            continue
        rates = {key: _resolve(spec, r, default_rate_name(c.kind, key, c.nodes))
                 for key, r in c.rates}
        parts.append(primitive(c.kind, c.nodes, rates, mine))
    return parts


def elaborate(spec: ConnectorSpec) -> StochasticReoAutomaton:
    """Multiply the channels in file order, joining nodes as soon as both exist."""
    parts = channel_automata(spec)
    if not parts:
        raise DslError("empty-connector", None, "the file declares no channels")
    todo = list(spec.joins)
    S = None
    for part in parts:
        S = part if S is None else product_s(S, part)
        ready = [j for j in todo if j[0] in S.alphabet and j[1] in S.alphabet]
        for a, b in ready:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", StructureWarning)
                S = synchronize_s(S, a, b)
            for w in caught:
                line = spec.lines.get(("join", a, b))
                warnings.warn(f"line {line}: {w.message}", StructureWarning, stacklevel=2)
            todo.remove((a, b))
    return S


def default_loss_metric(spec: ConnectorSpec) -> tuple[frozenset[str], frozenset[str]] | None:
    """Loss and delivery rate names of the file's lossy syncs, if it has any."""
    lossy, success = set(), set()
    for c in spec.channels:
        if isinstance(c, ChannelDecl) and c.kind == "lossysync":
            rates = dict(c.rates)
            lossy.add(_resolve(spec, rates["loss"], default_rate_name(c.kind, "loss", c.nodes)).name)
            success.add(_resolve(spec, rates["flow"], default_rate_name(c.kind, "flow", c.nodes)).name)
    return (frozenset(lossy), frozenset(success)) if lossy else None


def load(path) -> tuple[ConnectorSpec, StochasticReoAutomaton]:
    with open(path, encoding="utf-8") as fh:
        spec = parse(fh.read())
    return spec, elaborate(spec)


__all__ = [
    "ConnectorSpec", "ChannelDecl", "CustomDecl", "StepDecl", "DslError", "parse", "render",
    "elaborate", "channel_automata", "default_loss_metric", "load",
]
