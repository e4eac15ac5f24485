"""End-to-end acceptance checks, one marker label per criterion."""

import os
import random
import subprocess
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from stochreo import analysis as AN
from stochreo import automaton as RA
from stochreo import delay as D
from stochreo import dsl
from stochreo.automaton import Transition
from stochreo.ctmc import MacroTransition, Micro, Structural, build_ctmc, divide
from stochreo.guards import TOP, Var
from stochreo.generate import random_automaton, random_primitive, sinks, sources
from stochreo.stochastic import (STransition, bisimilar_s, primitive, product_s,
                                 synchronize_s, validate_s)
from support import chain, example_one_tuples, labelled_isomorphism, make_lossyfifo1

ROOT = Path(__file__).resolve().parent.parent
CONNECTORS = sorted((ROOT / "connectors").glob("*.reo"))
a, b, c, d = map(Var, "abcd")


class Stopwatch:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.2f}s, limit {self.limit}s"


def tr(src, guard, firing, dst):
    return Transition(src, guard, frozenset(firing), dst)


def triples(tuples):
    return frozenset(t.triple for t in tuples)


def T(inputs, outputs, name):
    return frozenset(inputs), frozenset(outputs), name


# --- 1 -----------------------------------------------------------------------

@pytest.mark.criterion("1 primitive automata")
def test_primitive_automata_match_the_channel_table():
    with Stopwatch(1.0):
        expected = {
            "sync": ({"q"}, {tr("q", a & b, "ab", "q")}),
            "lossysync": ({"q"}, {tr("q", a & b, "ab", "q"), tr("q", a & ~b, "a", "q")}),
            "syncdrain": ({"q"}, {tr("q", a & b, "ab", "q")}),
            "fifo1": ({"e", "f"}, {tr("e", a, "a", "f"), tr("f", b, "b", "e")}),
        }
        rates = {"sync": {"flow": 1}, "lossysync": {"flow": 1, "loss": 1},
                 "syncdrain": {"drain": 1}, "fifo1": {"in": 1, "out": 1}}
        for kind, (states, transitions) in expected.items():
            S = primitive(kind, "ab", rates[kind], {"a": 1, "b": 1})
            A = S.automaton
            assert RA.validate(A).ok, kind
            assert validate_s(S).ok, kind
            assert A.states == frozenset(states), kind
            assert A.transitions == frozenset(transitions), kind
            assert len(A.transitions) == len(transitions)


# --- 2 -----------------------------------------------------------------------

QE, QF = ("q", "e"), ("q", "f")

PRODUCT_STEPS = {
    tr(QE, a & b & c, "abc", QF), tr(QE, a & ~b & c, "ac", QF), tr(QE, ~a & c, "c", QF),
    tr(QF, a & b & d, "abd", QE), tr(QF, a & ~b & d, "ad", QE), tr(QF, ~a & d, "d", QE),
    tr(QE, a & b & ~c, "ab", QE), tr(QE, a & ~b & ~c, "a", QE),
    tr(QF, a & b & ~d, "ab", QF), tr(QF, a & ~b & ~d, "a", QF),
}
SYNCED_STEPS = {tr(QE, a, "a", QF), tr(QF, a & d, "ad", QE), tr(QF, ~a & d, "d", QE),
                tr(QF, a & ~d, "a", QF)}


@pytest.mark.criterion("2 product and synchronization")
def test_product_and_synchronization_of_lossy_buffer(lossysync, fifo1):
    with Stopwatch(1.0):
        P = RA.product(lossysync.automaton, fifo1.automaton)
        assert len(P.transitions) == 10
        assert P.transitions == frozenset(PRODUCT_STEPS)
        assert RA.validate(P).ok
        J = RA.synchronize(P, "b", "c")
        assert len(J.transitions) == 4
        assert J.transitions == frozenset(SYNCED_STEPS)
        assert J.states == P.states


# --- 3 -----------------------------------------------------------------------

TH = {
    1: {T("a", "b", "γab")},
    2: {T("a", "", "γaL")},
    3: {T("a", "b", "γab"), T("c", "", "γcF")},
    4: {T("a", "", "γaL"), T("c", "", "γcF")},
    5: {T("c", "", "γcF")},
    6: {T("a", "b", "γab"), T("", "d", "γFd")},
    7: {T("a", "", "γaL"), T("", "d", "γFd")},
    8: {T("", "d", "γFd")},
}
PRODUCT_TUPLES = {
    tr(QE, a & b & c, "abc", QF): 3, tr(QE, a & ~b & c, "ac", QF): 4, tr(QE, ~a & c, "c", QF): 5,
    tr(QF, a & b & d, "abd", QE): 6, tr(QF, a & ~b & d, "ad", QE): 7, tr(QF, ~a & d, "d", QE): 8,
    tr(QE, a & b & ~c, "ab", QE): 1, tr(QE, a & ~b & ~c, "a", QE): 2,
    tr(QF, a & b & ~d, "ab", QF): 1, tr(QF, a & ~b & ~d, "a", QF): 2,
}
SYNCED_TUPLES = {
    tr(QE, a, "a", QF): {T("a", "bc", "γab"), T("bc", "", "γcF")},
    tr(QF, a & d, "ad", QE): {T("a", "", "γaL"), T("", "d", "γFd")},
    tr(QF, ~a & d, "d", QE): {T("", "d", "γFd")},
    tr(QF, a & ~d, "a", QF): {T("a", "", "γaL")},
}


def _lossy_parts():
    L = primitive("lossysync", "ab", {"flow": 1.0, "loss": 1.0}, {"a": 1.0})
    F = primitive("fifo1", "cd", {"in": 1.0, "out": 1.0}, {"d": 1.0})
    return L, F


@pytest.mark.criterion("3 stochastic composition tuples")
def test_stochastic_product_and_join_carry_the_flow_tuples():
    with Stopwatch(1.0):
        P = product_s(*_lossy_parts())
        got = {s.transition: triples(s.tuples) for s in P.transitions}
        assert len(got) == len(P.transitions) == 10
        assert got == {t: frozenset(TH[k]) for t, k in PRODUCT_TUPLES.items()}
        S = synchronize_s(P, "b", "c")
        got = {s.transition: triples(s.tuples) for s in S.transitions}
        assert got == {t: frozenset(x) for t, x in SYNCED_TUPLES.items()}
        assert S.arrival_rates == {"a": 1.0, "d": 1.0}
        assert validate_s(S).ok


# --- 4 -----------------------------------------------------------------------

DELAY_TABLE = {
    tr(QE, a, "a", QF): "({a},{b,c},γab) ; ({b,c},∅,γcF)",
    tr(QF, a & ~d, "a", QF): "({a},∅,γaL)",
    tr(QF, a & d, "ad", QE): "({a},∅,γaL) | (∅,{d},γFd)",
    tr(QF, ~a & d, "d", QE): "(∅,{d},γFd)",
}


@pytest.mark.criterion("4 delay sequences")
def test_delay_sequences_of_the_lossy_buffer(lossyfifo1):
    with Stopwatch(1.0):
        for s in lossyfifo1.transitions:
            p = D.ext(s.tuples)
            shown = D.render(p)
            assert shown.exact
            assert D.format_seq(shown.expr, names=False) == DELAY_TABLE[s.transition]
            assert D.equivalent(shown.expr, p)
        chain_step = next(s for s in lossyfifo1.transitions if s.transition == tr(QE, a, "a", QF))
        first, second = sorted(chain_step.tuples, key=lambda t: t.rate_name)
        assert D.ext(chain_step.tuples).less(first, second)


@pytest.mark.criterion("4 delay sequences")
def test_worked_posets_render_and_divide():
    with Stopwatch(1.0):
        p1, p2 = example_one_tuples()
        assert D.format_seq(D.render(D.ext(p1)).expr) == "((θ2;θ3)|(θ8;θ9));(θ4|θ10|θ11)"
        assert D.format_seq(D.render(D.ext(p2)).expr) == "(θ5;θ6)|(θ12;θ13)"
        poset = D.ext(p2)
        nodes = D.nodes_of(poset)
        src, dst = Structural("p", nodes), Structural("p'", frozenset())
        step = STransition(Transition("p", TOP, frozenset(nodes), "p'"), tuple(p2))
        states, edges = divide(MacroTransition(src, step, poset, dst))
        assert len(set(states)) == 9
        assert len(edges) == 12
        assert sum(isinstance(x, Micro) for x in set(states)) == 7


# --- 5 -----------------------------------------------------------------------

# A=(e,∅) B=(e,a) C=(e',∅) D=(f,∅) E=(f,a) F=(e,d) G=(e,ad) H=(e',d) I=(f,d) J=(f,ad)
REFERENCE_CHAIN = [
    ("A", "B", "γa"), ("B", "C", "γab"), ("C", "D", "γcF"), ("D", "E", "γa"),
    ("F", "G", "γa"), ("G", "H", "γab"), ("H", "I", "γcF"), ("I", "J", "γa"),
    ("A", "F", "γd"), ("B", "G", "γd"), ("C", "H", "γd"), ("D", "I", "γd"), ("E", "J", "γd"),
    ("I", "A", "γFd"), ("J", "B", "γFd"), ("J", "I", "γaL"), ("E", "D", "γaL"),
]


@pytest.mark.criterion("5 lossy buffer CTMC")
def test_lossy_buffer_chain_is_isomorphic_to_the_reference(lossyfifo1):
    with Stopwatch(1.0):
        ctmc = build_ctmc(lossyfifo1, merge=True)
        assert len(ctmc) == 10 and len(ctmc.transitions) == 17
        letters = "ABCDEFGHIJ"
        ref = [(letters.index(x), letters.index(y), name) for x, y, name in REFERENCE_CHAIN]
        mine = [(i, j, name) for i, j, _, name in ctmc.edges()]
        iso = labelled_isomorphism(10, ref, 10, mine, fixed={0: 0})
        assert iso is not None
        ix = ctmc.index
        micro_idle = next(s for s in ctmc.states if isinstance(s, Micro) and not s.pending)
        micro_a = Micro(micro_idle.config, micro_idle.target, micro_idle.flows, micro_idle.fired,
                        frozenset("a"))
        assert ix[micro_idle] == iso[letters.index("C")]
        assert micro_a not in ix
        full = ix[Structural(QF, frozenset("ad"))]
        only_a = ix[Structural(QF, frozenset("a"))]
        assert full == iso[letters.index("J")] and only_a == iso[letters.index("E")]
        pairs = {(i, j) for i, j, _, _ in ctmc.edges()}
        assert (full, only_a) not in pairs
        assert not any(i == ix[micro_idle] and name == "γa" for i, _, _, name in ctmc.edges())


# --- 6 -----------------------------------------------------------------------

@pytest.mark.criterion("6 steady-state solver")
@pytest.mark.parametrize("lam,mu", [(2.0, 3.0), (0.1, 10.0), (7.5, 7.5)])
def test_two_state_birth_death(lam, mu):
    pi = AN.steady_state(chain(2, [(0, 1, lam), (1, 0, mu)]))
    assert abs(pi[0] - mu / (lam + mu)) <= 1e-9
    assert abs(pi[1] - lam / (lam + mu)) <= 1e-9


@pytest.mark.criterion("6 steady-state solver")
@pytest.mark.parametrize("n", [3, 5, 8])
def test_symmetric_cycles_are_uniform(n):
    one_way = chain(n, [(i, (i + 1) % n, 1.7) for i in range(n)])
    both_ways = chain(n, [(i, (i + 1) % n, 0.4) for i in range(n)] +
                      [((i + 1) % n, i, 0.4) for i in range(n)])
    for ctmc in (one_way, both_ways):
        pi = AN.steady_state(ctmc)
        assert np.max(np.abs(pi.probabilities - 1 / n)) <= 1e-9


@pytest.mark.criterion("6 steady-state solver")
@pytest.mark.parametrize("path", CONNECTORS, ids=lambda p: p.stem)
@pytest.mark.parametrize("merge", [True, False])
def test_residual_on_shipped_connectors(path, merge):
    _, S = dsl.load(path)
    ctmc = build_ctmc(S, merge=merge)
    pi = AN.steady_state(ctmc)
    Q = AN.generator(ctmc).matrix
    assert pi.residual <= 1e-9
    assert np.max(np.abs(Q.T @ pi.probabilities)) <= 1e-9
    assert abs(pi.probabilities.sum() - 1) <= 1e-12


# --- 7 -----------------------------------------------------------------------

LOSS = AN.LossProbability({"γaL"}, {"γab"})


@pytest.mark.criterion("7 simulation agrees with analysis")
def test_loss_probability_matches_simulation():
    rng = random.Random(20240607)
    with Stopwatch(30.0):
        for _ in range(5):
            rates = {k: rng.uniform(0.2, 5) for k in ("ga", "gd", "gab", "gaL", "gcF", "gFd")}
            ctmc = build_ctmc(make_lossyfifo1(**rates), merge=True)
            pi = AN.steady_state(ctmc)
            exact = AN.metric(ctmc, pi, LOSS)
            horizon = 1e5 * AN.mean_holding_time(ctmc, pi)
            counts = Counter()
            for seed in (1, 2, 3):
                counts.update(AN.simulate(ctmc, horizon, seed).flow_counts)
            pooled = counts["γaL"] / (counts["γaL"] + counts["γab"])
            assert abs(pooled - exact) <= 0.02, (rates, pooled, exact)


# --- 8 -----------------------------------------------------------------------

@pytest.mark.criterion("8 loss grows with the arrival rate")
@pytest.mark.parametrize("merge", [True, False])
def test_arrival_sweep_is_monotone(merge):
    with Stopwatch(10.0):
        rows = AN.sweep(make_lossyfifo1(), "a", AN.log_grid(0.1, 20, 50), LOSS, merge=merge)
    values = [r.metric for r in rows]
    assert len(values) == 50
    assert all(0 <= v <= 1 for v in values)
    assert all(y >= x - 1e-12 for x, y in zip(values, values[1:]))
    assert values[-1] > values[0]


# --- 9 -----------------------------------------------------------------------

CASES = 200


def _two_small(rng):
    return random_automaton(rng, "x", "X"), random_automaton(rng, "y", "Y")


@pytest.mark.criterion("9 composition laws")
def test_joins_commute_and_outputs_validate():
    rng = random.Random(9)
    with Stopwatch(60.0):
        for _ in range(CASES):
            S1, S2 = _two_small(rng)
            P = product_s(S1, S2)
            assert RA.validate(P.automaton).ok
            assert validate_s(P).ok
            w, x, y, z = rng.sample(sorted(P.alphabet), 4)
            one = synchronize_s(synchronize_s(P, w, x, False), y, z, False)
            two = synchronize_s(synchronize_s(P, y, z, False), w, x, False)
            assert one == two
            assert RA.validate(one.automaton).ok
            assert RA.validate(synchronize_s(P, w, x, False).automaton).ok


@pytest.mark.criterion("9 composition laws")
def test_join_interchanges_with_product_on_small_automata():
    rng = random.Random(10)
    failures = []
    with Stopwatch(60.0):
        for k in range(CASES):
            S1, S2 = _two_small(rng)
            u, v = rng.sample(sorted(S1.alphabet), 2)
            left = product_s(synchronize_s(S1, u, v, False), S2)
            right = synchronize_s(product_s(S1, S2), u, v, False)
            if not bisimilar_s(left, right):
                failures.append(k)
    assert not failures, f"{len(failures)} of {CASES} random pairs break the interchange"


@pytest.mark.criterion("9 composition laws")
def test_join_interchanges_with_product_on_channel_circuits():
    rng = random.Random(11)
    done = 0
    with Stopwatch(60.0):
        while done < CASES:
            P, R, T3 = (random_primitive(rng, x) for x in "prt")
            if not (sinks(P) and sources(R)):
                continue
            u, v = rng.choice(sinks(P)), rng.choice(sources(R))
            S1 = product_s(P, R)
            left = product_s(synchronize_s(S1, u, v), T3)
            right = synchronize_s(product_s(S1, T3), u, v)
            assert bisimilar_s(left, right)
            assert validate_s(right).ok
            done += 1


# --- 10 ----------------------------------------------------------------------

@pytest.mark.criterion("10 round trips and determinism")
@pytest.mark.parametrize("path", CONNECTORS, ids=lambda p: p.stem)
@pytest.mark.parametrize("merge", [True, False])
def test_prism_round_trip(path, merge):
    _, S = dsl.load(path)
    ctmc = build_ctmc(S, merge=merge)
    model = AN.parse_prism(*AN.export_prism(ctmc))
    assert model.n == len(ctmc)
    assert model.labels == tuple(ctmc.labels())
    original = Counter((i, j, rate) for i, j, rate, _ in ctmc.edges())
    assert Counter(model.edges) == original


@pytest.mark.criterion("10 round trips and determinism")
@pytest.mark.parametrize("path", CONNECTORS, ids=lambda p: p.stem)
def test_connector_text_round_trip(path):
    spec = dsl.parse(path.read_text(encoding="utf-8"))
    again = dsl.parse(dsl.render(spec))
    assert again == spec
    assert dsl.render(again) == dsl.render(spec)


def _cli(args, hash_seed, cwd):
    env = {**os.environ, "PYTHONHASHSEED": str(hash_seed)}
    return subprocess.run([sys.executable, "-m", "stochreo.cli", *args], cwd=cwd, env=env,
                          capture_output=True, check=True).stdout


@pytest.mark.criterion("10 round trips and determinism")
def test_dot_and_csv_are_byte_identical(tmp_path):
    src = str(ROOT / "connectors" / "lossyfifo1.reo")
    dots, csvs = set(), set()
    for seed in (0, 1, 12345):
        dots.add(_cli(["ctmc", src, "--dot"], seed, tmp_path))
        out = tmp_path / f"s{seed}.csv"
        _cli(["sweep", src, "--vary", "a", "--from", "0.1", "--to", "20", "--steps", "7",
              "--csv", str(out)], seed, tmp_path)
        csvs.add(out.read_bytes())
    assert len(dots) == 1 and len(csvs) == 1
    assert next(iter(csvs)).startswith(b"vary,value,metric\n")
