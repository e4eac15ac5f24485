import itertools

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from stochreo import delay as D
from stochreo.delay import EPS, Par, Seq, Tup, par, seq
from support import example_one_tuples, tup

ab = tup("a", "bc", "γab")
cf = tup("bc", "", "γcF")
al = tup("a", "", "γaL")
fd = tup("", "d", "γFd")


def test_chain_and_antichain():
    p = D.ext([ab, cf])
    assert p.less(ab, cf) and not p.less(cf, ab)
    assert D.format_seq(D.render(p).expr) == "γab;γcF"
    q = D.ext([al, fd])
    assert not q.comparable(al, fd)
    assert D.format_seq(D.render(q).expr, names=False) == "({a},∅,γaL) | (∅,{d},γFd)"


def test_singleton_and_empty():
    assert D.render(D.ext([al])).expr == Tup(al)
    assert D.render(D.ext([])).expr == EPS
    assert D.format_seq(EPS) == "ε"


def test_cycle_is_an_error():
    with pytest.raises(D.CyclicDependency):
        D.ext([tup("x", "y", "θ1"), tup("y", "x", "θ2")])
    with pytest.raises(D.CyclicDependency):
        D.ext([tup("x", "x", "θ1")])


def test_closure_is_transitive():
    x, y, z = tup("", "m", "θ1"), tup("m", "n", "θ2"), tup("n", "", "θ3")
    p = D.ext([x, y, z])
    assert p.less(x, z)
    assert len(p.precedence) == 3


def test_example_posets():
    p1, p2 = example_one_tuples()
    P1, P2 = D.ext(p1), D.ext(p2)
    th = {t.rate_name: t for t in p1 + p2}
    assert P1.less(th["θ2"], th["θ11"]) and P1.less(th["θ9"], th["θ4"])
    assert not P1.comparable(th["θ2"], th["θ8"])
    assert len(P2.components()) == 2
    assert len(D.downsets(P2)) == 9


def test_not_series_parallel_is_flagged():
    # the N shape: 1<3, 1<4, 2<4
    t1, t2 = tup("", "x", "1"), tup("", "y", "2")
    t3, t4 = tup("x", "", "3"), tup("xy", "", "4")
    shown = D.render(D.ext([t1, t2, t3, t4]))
    assert not shown.exact
    assert D.format_seq(shown.expr) == "(1|2);(3|4)"


def test_epsilon_is_a_unit_and_operators_flatten():
    assert seq(EPS, ab) == Tup(ab)
    assert par(ab, EPS) == Tup(ab)
    assert seq(seq(ab, cf), al) == Seq((Tup(ab), Tup(cf), Tup(al)))
    assert par(al, par(fd, ab)) == Par((Tup(al), Tup(fd), Tup(ab)))
    assert seq() == EPS


def test_equivalence_laws():
    assert D.equivalent(par(al, fd), par(fd, al))
    assert D.equivalent(seq(ab, seq(cf, al)), seq(seq(ab, cf), al))
    assert not D.equivalent(seq(ab, cf), seq(cf, ab))
    assert not D.equivalent(seq(al, fd), par(al, fd))


def test_repeated_leaf_is_rejected():
    with pytest.raises(ValueError):
        D.induced(par(al, seq(al, fd)))


def test_nodes_of():
    assert D.nodes_of(seq(ab, cf)) == frozenset("abc")
    assert D.nodes_of(D.ext([al, fd])) == frozenset("ad")
    assert D.nodes_of(fd) == frozenset("d")


def test_restrict_and_downset():
    p = D.ext([ab, cf, al])
    assert p.is_downset({ab}) and not p.is_downset({cf})
    assert p.restrict({ab, cf}) == D.ext([ab, cf])
    assert p.enabled({ab}) == [cf, al]


NODES = "uvwxyz"


@st.composite
def tuple_sets(draw):
    n = draw(st.integers(1, 5))
    out = []
    for k in range(n):
        ins = draw(st.sets(st.sampled_from(NODES), max_size=2))
        outs = draw(st.sets(st.sampled_from(NODES), max_size=2).filter(lambda s: not s & ins))
        out.append(tup(ins, outs, f"θ{k}"))
    return out


def _acyclic(ts):
    try:
        return D.ext(ts)
    except D.CyclicDependency:
        return None


@settings(max_examples=150, deadline=None)
@given(tuple_sets())
def test_downsets_are_prefixes_of_linear_extensions(ts):
    p = _acyclic(ts)
    assume(p is not None)
    orders = list(D.linear_extensions(p))
    prefixes = {frozenset(o[:k]) for o in orders for k in range(len(o) + 1)}
    assert set(D.downsets(p)) == prefixes
    assert all(p.is_downset(x) for x in prefixes)


@settings(max_examples=150, deadline=None)
@given(tuple_sets())
def test_every_completion_order_starts_with_an_initial_tuple(ts):
    p = _acyclic(ts)
    assume(p is not None)
    starts = set(D.initial_tuples(ts))
    for order in D.linear_extensions(p):
        assert order[0] in starts


@settings(max_examples=150, deadline=None)
@given(tuple_sets())
def test_exact_renderings_denote_the_poset(ts):
    p = _acyclic(ts)
    assume(p is not None)
    shown = D.render(p)
    assert sorted(D.leaves(shown.expr), key=str) == sorted(p.tuples, key=str)
    if shown.exact:
        assert D.equivalent(shown.expr, p)
    else:
        # the layered form only adds constraints
        assert p.precedence <= D.induced(shown.expr).precedence


@settings(max_examples=100, deadline=None)
@given(tuple_sets(), st.randoms())
def test_ext_ignores_input_order(ts, rnd):
    p = _acyclic(ts)
    assume(p is not None)
    shuffled = list(ts)
    rnd.shuffle(shuffled)
    assert D.ext(shuffled) == p


def test_linear_extension_count_of_two_chains():
    _, p2 = example_one_tuples()
    assert len(list(D.linear_extensions(D.ext(p2)))) == 6
    assert sum(1 for _ in itertools.permutations(p2)) == 24
