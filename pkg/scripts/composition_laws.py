"""Random check of the composition laws.

``circuits`` mode joins a sink of one random primitive to a source of
another and puts a third primitive beside them; ``small`` mode draws two
automata with at most three states and three names each and joins any
two names of the first.  Reports how often each law holds.
"""

import argparse
import random
import time
from collections import Counter

from stochreo import automaton as RA
from stochreo.generate import random_automaton, random_primitive, sinks, sources
from stochreo.stochastic import bisimilar_s, product_s, synchronize_s, validate_s


def circuit_case(rng):
    while True:
        P, R = random_primitive(rng, "p"), random_primitive(rng, "r")
        if sinks(P) and sources(R):
            break
    return product_s(P, R), random_primitive(rng, "t"), rng.choice(sinks(P)), rng.choice(sources(R))


def small_case(rng):
    S1, S2 = random_automaton(rng, "x", "X"), random_automaton(rng, "y", "Y")
    a, b = rng.sample(sorted(S1.alphabet), 2)
    return S1, S2, a, b


def run(n, seed, mode):
    rng = random.Random(seed)
    draw = circuit_case if mode == "circuits" else small_case
    tally = Counter()
    first_failure = None
    for _ in range(n):
        S1, S2, a, b = draw(rng)
        P = product_s(S1, S2)
        left = product_s(synchronize_s(S1, a, b, False), S2)
        right = synchronize_s(P, a, b, False)
        ok = bool(bisimilar_s(left, right))
        tally["interchange"] += ok
        tally["plain interchange"] += bool(RA.bisimilar(left.automaton, right.automaton))
        tally["product valid"] += validate_s(P).ok
        tally["sync valid"] += RA.validate(right.automaton).ok
        w, x = rng.sample(sorted(P.alphabet - {a, b}), 2)
        one = synchronize_s(synchronize_s(P, a, b, False), w, x, False)
        two = synchronize_s(synchronize_s(P, w, x, False), a, b, False)
        tally["commute"] += one == two
        if not ok and first_failure is None:
            first_failure = (S1, S2, a, b)
    return tally, first_failure


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mode", choices=("circuits", "small"), default="circuits")
    ap.add_argument("--show", action="store_true", help="print the first counterexample")
    args = ap.parse_args()
    t0 = time.time()
    tally, failure = run(args.n, args.seed, args.mode)
    for k, v in sorted(tally.items()):
        print(f"{k}: {v}/{args.n}")
    print(f"{args.mode}: {args.n} cases in {time.time() - t0:.1f}s")
    if args.show and failure:
        S1, S2, a, b = failure
        print(f"joining {a} and {b} in\n{S1}\nbeside\n{S2}")
