"""Piecewise quadratic invariants for discrete-time piecewise affine systems.

The package computes certificates that bound the reachable states of a
discrete-time piecewise affine (PWA) system: a per-cell quadratic function
V^i together with a level alpha and a norm bound beta such that the alpha
sublevel set of V is invariant, contains the initial states, and lies inside
the ball of squared radius beta.  The pipeline is

    model     -- PWA systems, homogenization, quadratization matrices
    frontend  -- a small loop-program language compiled to PWA systems
    feas      -- LP feasibility: switch pruning, init intersection, disjointness
    sdp       -- semidefinite program assembly, solving, certificate extraction
    certify   -- simulation, Monte-Carlo auditing, derived state bounds
    bench     -- random benchmark generation and batch runs
    cli       -- the pwqlyap command line tool
"""

from pwqlyap.model import (
    AffineLaw,
    HomogeneousLaw,
    Polyhedron,
    PwaSystem,
    QuadMatrix,
    cell_of,
    cell_quadratization,
    homogenize,
    init_quadratization,
    step,
    switch_quadratization,
)

__all__ = [
    "AffineLaw",
    "HomogeneousLaw",
    "Polyhedron",
    "PwaSystem",
    "QuadMatrix",
    "cell_of",
    "cell_quadratization",
    "homogenize",
    "init_quadratization",
    "step",
    "switch_quadratization",
]

__version__ = "0.1.0"
