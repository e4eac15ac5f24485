"""Shared builders for the test suite."""

from stochreo.ctmc import Ctmc, CtmcTransition, Flow, Structural
from stochreo.stochastic import FlowTuple, primitive, product_s, synchronize_s


def make_lossyfifo1(ga=1.0, gd=1.0, gab=1.0, gaL=1.0, gcF=1.0, gFd=1.0):
    L = primitive("lossysync", "ab", {"flow": ("γab", gab), "loss": ("γaL", gaL)}, {"a": ga})
    F = primitive("fifo1", "cd", {"in": ("γcF", gcF), "out": ("γFd", gFd)}, {"d": gd})
    return synchronize_s(product_s(L, F), "b", "c")


def tup(inputs, outputs, name, rate=1.0):
    return FlowTuple(frozenset(inputs), frozenset(outputs), rate, name)


def example_one_tuples():
    """Tuple sets whose dependency orders are the two worked posets."""
    p1 = [tup("", "b", "θ2"), tup("b", "pqr", "θ3"), tup("", "e", "θ8"), tup("e", "pqr", "θ9"),
          tup("p", "", "θ4"), tup("q", "", "θ10"), tup("r", "", "θ11")]
    p2 = [tup("", "c", "θ5"), tup("c", "g", "θ6"), tup("", "f", "θ12"), tup("f", "h", "θ13")]
    return p1, p2


def chain(n, edges):
    """A hand-made CTMC on states 0..n-1 from ``(src, dst, rate)`` triples."""
    states = [Structural(i, frozenset()) for i in range(n)]
    ts = [CtmcTransition(states[i], states[j], rate, Flow(tup("", "", f"r{i}_{j}", rate)))
          for i, j, rate in edges]
    return Ctmc(tuple(states), tuple(ts))


def labelled_isomorphism(n1, edges1, n2, edges2, fixed=None):
    """A bijection 0..n1-1 -> 0..n2-1 carrying the labelled edge multiset onto the other.

    Edges are ``(src, dst, label)``.  Returns the mapping or None.
    """
    if n1 != n2 or sorted(e[2] for e in edges1) != sorted(e[2] for e in edges2):
        return None

    def sig(n, edges):
        out = [[] for _ in range(n)]
        inc = [[] for _ in range(n)]
        for i, j, lab in edges:
            out[i].append(lab)
            inc[j].append(lab)
        return [(tuple(sorted(o)), tuple(sorted(x))) for o, x in zip(out, inc)]

    s1, s2 = sig(n1, edges1), sig(n2, edges2)
    from collections import Counter
    bag1, bag2 = Counter(edges1), Counter(edges2)
    order = sorted(range(n1), key=lambda v: sum(1 for e in edges1 if v in e[:2]), reverse=True)
    mapping = dict(fixed or {})

    def consistent():
        for (i, j, lab), k in bag1.items():
            if i in mapping and j in mapping and bag2[(mapping[i], mapping[j], lab)] != k:
                return False
        return True

    def go(pos):
        if pos == len(order):
            return True
        v = order[pos]
        if v in mapping:
            return go(pos + 1)
        used = set(mapping.values())
        for w in range(n2):
            if w in used or s1[v] != s2[w]:
                continue
            mapping[v] = w
            if consistent() and go(pos + 1):
                return True
            del mapping[v]
        return False

    if not consistent():
        return None
    return dict(mapping) if go(0) else None
