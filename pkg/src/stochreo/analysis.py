"""Numerical work on a built CTMC: generator, steady state, metrics,
simulation, sweeps and exporters."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .ctmc import Ctmc, CtmcState, Micro, build_ctmc
from .errors import ReoError
from .stochastic import StochasticReoAutomaton

DENSE_LIMIT = 20_000


class ReducibleChain(ReoError):
    pass


class SingularSystem(ReoError):
    pass


class UnknownRateName(ReoError):
    pass


class ZeroDenominator(ReoError):
    pass


class NotConverged(ReoError):
    pass


@dataclass(frozen=True)
class GeneratorMatrix:
    """Sparse generator in state-index order."""

    matrix: sparse.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def entries(self) -> dict[tuple[int, int], float]:
        coo = self.matrix.tocoo()
        return {(int(i), int(j)): float(v) for i, j, v in zip(coo.row, coo.col, coo.data)}

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()


def generator(c: Ctmc) -> GeneratorMatrix:
    n = len(c)
    sums: dict[tuple[int, int], float] = {}
    exit = np.zeros(n)
    for i, j, rate, _ in c.edges():
        if i == j:
            continue
        sums[(i, j)] = sums.get((i, j), 0.0) + rate
        exit[i] += rate
    rows = [i for i, _ in sums] + list(range(n))
    cols = [j for _, j in sums] + list(range(n))
    vals = list(sums.values()) + list(-exit)
    m = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    m.eliminate_zeros()
    return GeneratorMatrix(m)


@dataclass(frozen=True)
class SteadyState:
    probabilities: np.ndarray
    residual: float
    method: str = "dense"

    def __getitem__(self, i: int) -> float:
        return float(self.probabilities[i])

    def __len__(self):
        return len(self.probabilities)


def check_irreducible(c: Ctmc, Q: GeneratorMatrix | None = None):
    Q = Q or generator(c)
    if Q.n <= 1:
        return
    k, labels = connected_components(Q.matrix, directed=True, connection="strong")
    if k > 1:
        home = labels[0]
        outside = [c.states[i].label for i in range(Q.n) if labels[i] != home]
        shown = ", ".join(outside[:5]) + (" ..." if len(outside) > 5 else "")
        raise ReducibleChain(f"{k} communicating classes; not in the initial state's class: {shown}")


def steady_state(c: Ctmc, method: str = "auto") -> SteadyState:
    """Stationary distribution of an irreducible chain.

    ``method`` is ``dense`` (direct solve with one balance equation
    replaced by normalization), ``power`` (iteration on the uniformized
    chain) or ``auto``, which picks dense below ``DENSE_LIMIT`` states.
    """
    Q = generator(c)
    check_irreducible(c, Q)
    n = Q.n
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "power"
    if method == "dense":
        A = Q.dense().T.copy()
        A[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        try:
            pi = np.linalg.solve(A, b)
        except np.linalg.LinAlgError as exc:
            raise SingularSystem(str(exc)) from exc
    elif method == "power":
        pi = _power(Q)
    else:
        raise ValueError(f"unknown method {method!r}")
    if pi.min() < -1e-9:
        raise SingularSystem(f"solution has negative mass {pi.min():.3g}")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = float(np.abs(Q.matrix.T @ pi).max()) if n else 0.0
    return SteadyState(pi, residual, method)


def _power(Q: GeneratorMatrix, tol: float = 1e-10, max_iter: int = 1_000_000) -> np.ndarray:
    n = Q.n
    lam = 1.02 * max(-Q.matrix.diagonal().min(), 1e-300)
    P = (sparse.identity(n, format="csr") + Q.matrix / lam).T.tocsr()
    pi = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = P @ pi
        nxt /= nxt.sum()
        if np.abs(nxt - pi).max() < tol:
            return nxt
        pi = nxt
    raise NotConverged(f"power iteration did not converge in {max_iter} steps")


# --- metrics -------------------------------------------------------------------

@dataclass(frozen=True)
class Throughput:
    rate_names: frozenset[str]

    def __init__(self, rate_names: Iterable[str]):
        object.__setattr__(self, "rate_names", frozenset(rate_names))
        if not self.rate_names:
            raise ValueError("throughput needs at least one rate name")


@dataclass(frozen=True)
class LossProbability:
    lossy: frozenset[str]
    success: frozenset[str]

    def __init__(self, lossy: Iterable[str], success: Iterable[str]):
        object.__setattr__(self, "lossy", frozenset(lossy))
        object.__setattr__(self, "success", frozenset(success))
        if not self.lossy or not self.success:
            raise ValueError("loss probability needs lossy and success rate names")
        if self.lossy & self.success:
            raise ValueError("lossy and success rate names overlap")


@dataclass(frozen=True)
class StateMass:
    predicate: Callable[[CtmcState], bool]


MetricSpec = Throughput | LossProbability | StateMass


def _check_names(c: Ctmc, names: Iterable[str]):
    known = c.meta.get("rate_names", c.rate_names())
    unknown = sorted(set(names) - set(known))
    if unknown:
        raise UnknownRateName(f"no rates named {', '.join(unknown)}")


def throughput(c: Ctmc, pi: SteadyState, names: Iterable[str]) -> float:
    """Long-run frequency of transitions whose rate name is in ``names``."""
    names = frozenset(names)
    _check_names(c, names)
    return float(sum(pi[i] * rate for i, _, rate, name in c.edges() if name in names))


def metric(c: Ctmc, pi: SteadyState, spec: MetricSpec) -> float:
    if isinstance(spec, Throughput):
        return throughput(c, pi, spec.rate_names)
    if isinstance(spec, LossProbability):
        lost = throughput(c, pi, spec.lossy)
        kept = throughput(c, pi, spec.success)
        if lost + kept == 0:
            raise ZeroDenominator("no traffic through the named rates at steady state")
        return lost / (lost + kept)
    if isinstance(spec, StateMass):
        return float(sum(pi[i] for i, s in enumerate(c.states) if spec.predicate(s)))
    raise TypeError(f"not a metric: {spec!r}")


def mean_holding_time(c: Ctmc, pi: SteadyState) -> float:
    """Stationary average of the expected sojourn time per state."""
    exit = -generator(c).matrix.diagonal()
    live = exit > 0
    return float(np.sum(pi.probabilities[live] / exit[live]))


# --- simulation ------------------------------------------------------------------

RNG_ALGORITHM = "PCG64"


@dataclass
class SimulationResult:
    occupancy: np.ndarray
    flow_counts: Counter
    arrival_counts: Counter
    events: int
    time: float
    absorbed: bool
    meta: dict = field(default_factory=dict)

    def occupancy_fractions(self) -> np.ndarray:
        return self.occupancy / self.occupancy.sum()

    def loss_fraction(self, lossy: Iterable[str], success: Iterable[str]) -> float:
        lost = sum(self.flow_counts[x] for x in lossy)
        kept = sum(self.flow_counts[x] for x in success)
        if lost + kept == 0:
            raise ZeroDenominator("no traffic through the named rates in the run")
        return lost / (lost + kept)


def simulate(c: Ctmc, horizon: float, seed: int, chunk: int = 65536) -> SimulationResult:
    """Competing-exponentials run of ``c`` from its initial state up to ``horizon``."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    n = len(c)
    ix = c.index
    out: list[list] = [[] for _ in range(n)]
    for t in c.transitions:
        out[ix[t.source]].append(t)
    totals = np.zeros(n)
    cum: list[np.ndarray] = []
    for i, ts in enumerate(out):
        rates = np.array([t.rate for t in ts], dtype=float)
        totals[i] = rates.sum()
        cum.append(np.cumsum(rates) / totals[i] if ts else rates)
    targets = [[ix[t.target] for t in ts] for ts in out]

    rng = np.random.Generator(np.random.PCG64(seed))
    occupancy = np.zeros(n)
    flows: Counter = Counter()
    arrivals: Counter = Counter()
    state, now, events, absorbed = 0, 0.0, 0, False
    expo = rng.standard_exponential(chunk)
    unif = rng.random(chunk)
    k = 0
    while True:
        if totals[state] == 0:
            occupancy[state] += horizon - now
            now, absorbed = horizon, True
            break
        if k == chunk:
            expo = rng.standard_exponential(chunk)
            unif = rng.random(chunk)
            k = 0
        dwell = expo[k] / totals[state]
        if now + dwell >= horizon:
            occupancy[state] += horizon - now
            now = horizon
            break
        occupancy[state] += dwell
        now += dwell
        j = min(int(np.searchsorted(cum[state], unif[k], side="right")), len(cum[state]) - 1)
        k += 1
        t = out[state][j]
        if t.is_arrival:
            arrivals[t.provenance.node] += 1
        else:
            flows[t.rate_name] += 1
        state = targets[state][j]
        events += 1
    meta = {"rng": RNG_ALGORITHM, "seed": seed, "horizon": horizon}
    return SimulationResult(occupancy, flows, arrivals, events, now, absorbed, meta)


# --- sweeps ----------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    vary: str
    value: float
    metric: float


def sweep(S: StochasticReoAutomaton, vary: str, grid: Sequence[float], spec: MetricSpec,
          merge: bool = False) -> list[SweepRow]:
    """Rebuild and solve the chain for each value of one rate."""
    rows = []
    for value in grid:
        if not value > 0:
            raise ValueError(f"grid value {value!r} is not positive")
        c = build_ctmc(S.with_rate(vary, float(value)), merge=merge)
        rows.append(SweepRow(vary, float(value), metric(c, steady_state(c), spec)))
    return rows


def log_grid(lo: float, hi: float, steps: int) -> list[float]:
    if steps < 1 or not 0 < lo <= hi:
        raise ValueError("need 0 < lo <= hi and steps >= 1")
    if steps == 1:
        return [float(lo)]
    return [float(x) for x in np.geomspace(lo, hi, steps)]


def sweep_csv(rows: Iterable[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["vary", "value", "metric"])
    for r in rows:
        w.writerow([r.vary, repr(r.value), repr(r.metric)])
    return buf.getvalue()


# --- exporters -------------------------------------------------------------------

def _num(x: float) -> str:
    return format(x, ".17g")


def export_prism(c: Ctmc) -> tuple[str, str]:
    """Explicit-state ``.sta`` and ``.tra`` texts."""
    sta = ["(name)"] + [f'{i}:("{s.label}")' for i, s in enumerate(c.states)]
    edges = sorted(c.edges(), key=lambda e: (e[0], e[1]))
    tra = [f"{len(c)} {len(edges)}"] + [f"{i} {j} {_num(rate)}" for i, j, rate, _ in edges]
    return "\n".join(sta) + "\n", "\n".join(tra) + "\n"


@dataclass(frozen=True)
class PrismModel:
    labels: tuple[str, ...]
    edges: tuple[tuple[int, int, float], ...]

    @property
    def n(self) -> int:
        return len(self.labels)


class PrismFormatError(ReoError):
    pass


def parse_prism(sta: str, tra: str) -> PrismModel:
    sta_lines = [x for x in sta.splitlines() if x.strip()]
    if not sta_lines or not sta_lines[0].startswith("("):
        raise PrismFormatError("missing .sta header")
    labels = []
    for k, line in enumerate(sta_lines[1:]):
        head, _, rest = line.partition(":")
        if int(head) != k or not (rest.startswith('("') and rest.endswith('")')):
            raise PrismFormatError(f".sta line {k + 2}: {line!r}")
        labels.append(rest[2:-2])
    tra_lines = [x for x in tra.splitlines() if x.strip()]
    n, m = map(int, tra_lines[0].split())
    if n != len(labels) or m != len(tra_lines) - 1:
        raise PrismFormatError("header counts do not match the files")
    edges = []
    for line in tra_lines[1:]:
        i, j, rate = line.split()
        edges.append((int(i), int(j), float(rate)))
    return PrismModel(tuple(labels), tuple(edges))


def export_dot(c: Ctmc, name: str = "ctmc") -> str:
    lines = [f"digraph {name} {{"]
    for i, s in enumerate(c.states):
        style = ", style=dashed" if isinstance(s, Micro) else ""
        shape = "doublecircle" if i == 0 else "ellipse"
        label = s.label.replace('"', r'\"')
        lines.append(f'  s{i} [label="{label}", shape={shape}{style}];')
    for i, j, rate, rname in sorted(c.edges(), key=lambda e: (e[0], e[1], e[3])):
        lines.append(f'  s{i} -> s{j} [label="{rname}={rate!r}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


__all__ = [
    "GeneratorMatrix", "generator", "SteadyState", "steady_state", "check_irreducible",
    "Throughput", "LossProbability", "StateMass", "MetricSpec", "throughput", "metric",
    "mean_holding_time", "SimulationResult", "simulate", "RNG_ALGORITHM", "SweepRow", "sweep",
    "log_grid", "sweep_csv", "export_prism", "parse_prism", "PrismModel",
    "export_dot", "ReducibleChain", "SingularSystem", "UnknownRateName", "ZeroDenominator",
    "NotConverged", "PrismFormatError", "DENSE_LIMIT",
]
