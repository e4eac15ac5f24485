"""Stochastic Reo connectors: composition, CTMC derivation and QoS analysis."""

from .analysis import (LossProbability, StateMass, Throughput, export_dot, export_prism,
                       generator, metric, parse_prism, simulate, steady_state, sweep)
from .automaton import (ReoAutomaton, Transition, bisimilar, blocked_guard, normalize, product,
                        synchronize, validate)
from .ctmc import Ctmc, build_ctmc, divide, macro_transitions
from .delay import DelayPoset, equivalent, ext, format_seq, nodes_of, render
from .dsl import elaborate, load, parse
from .errors import ReoError
from .guards import BOT, TOP, Var, atoms, dnf, evaluate, hat, implies
from .stochastic import (FlowTuple, Rate, StochasticReoAutomaton, bisimilar_s, primitive,
                         product_s, synchronize_s, validate_s)

__version__ = "0.1.0"
