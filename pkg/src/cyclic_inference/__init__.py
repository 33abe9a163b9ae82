"""Classical probabilistic reconstructions of unitary dynamics.

Library plus CLI covering: real probability-matrix pairs equivalent to
density-matrix evolution, Gaussian kernel propagators (with and without a
vector potential), maximum-caliber chains and their Markov decompositions,
cavity-style message passing with amplitude/phase splitting, cyclic factor
graphs with Born-style diagonals, dual-observer first-person stepping, and
a small set of energy-scale estimates.
"""

__version__ = "0.1.0"
