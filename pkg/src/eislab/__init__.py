"""eislab: finite-level Eisenstein ideal computations over Q and F_q(t).

Exact modular-symbol presentations, Hecke/diamond actions, Eisenstein
quotients, degree-two p-adic L-functions, and their function-field
analogues, cross-checked against each other at every level the library can
reach.  See the README for the command-line interface.
"""

__version__ = "0.1.0"
