"""LP feasibility layer: switch pruning, init intersection, partition checks.

A quadratization matrix E with strict block E_s and weak block E_w encodes
the set {z : E_s (1,z) > 0, E_w (1,z) >= 0}.  By the transposition theorem
for mixed strict/weak systems, that set is empty exactly when the
alternative system

    p >= 0,  E^T p = 0,  sum of p over the strict rows = 1

is feasible.  Each emptiness question (can the system switch from cell i to
cell j, does the initial set meet cell i, do two cells overlap) is answered
by solving that alternative system as an LP.  LP statuses that are neither
clearly feasible nor clearly infeasible are resolved in the sound
direction: keep the switch, keep the init constraint, report the pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from pwqlyap.model import (
    PwaSystem,
    QuadMatrix,
    init_quadratization,
    switch_quadratization,
)

__all__ = [
    "LpResult",
    "MotzkinCertificate",
    "SwitchGraph",
    "lp_feasible",
    "motzkin_alternative",
    "switch_fireable",
    "build_switch_graph",
    "init_intersects_cell",
    "cells_disjoint",
    "input_unbounded_coords",
]

RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class LpResult:
    """Outcome of a feasibility LP: status in {feasible, infeasible, unknown},
    with the witness point when feasible."""

    status: str
    point: np.ndarray | None = None


@dataclass(frozen=True)
class MotzkinCertificate:
    """Nonnegative row multipliers proving a strict/weak system empty.

    p_strict covers the strict rows (leading row included), p_weak the weak
    rows; validity means p >= 0, E^T p = 0, and sum(p_strict) = 1, all
    within the LP tolerance.
    """

    p_strict: np.ndarray
    p_weak: np.ndarray

    def residual(self, quad: QuadMatrix) -> float:
        """Largest violation of the certificate conditions for quad."""
        p = np.concatenate([self.p_strict, self.p_weak])
        if p.shape[0] != quad.E.shape[0] or self.p_strict.shape[0] != quad.n_strict:
            raise ValueError("certificate length does not match the quadratization")
        combo = np.abs(quad.E.T @ p).max() if p.size else 0.0
        return max(combo,
                   abs(float(self.p_strict.sum()) - 1.0),
                   float(max(0.0, -p.min())) if p.size else 0.0)


@dataclass(frozen=True)
class SwitchGraph:
    """L[i, j] is true when the system may move from cell i to cell j."""

    L: np.ndarray

    def __post_init__(self):
        L = np.asarray(self.L, dtype=bool)
        if L.ndim != 2 or L.shape[0] != L.shape[1]:
            raise ValueError(f"L must be square, got shape {L.shape}")
        L = L.copy()
        L.flags.writeable = False
        object.__setattr__(self, "L", L)

    @property
    def n_cells(self) -> int:
        return self.L.shape[0]

    def fireable_pairs(self) -> list:
        return [(i, j) for i in range(self.n_cells)
                for j in range(self.n_cells) if self.L[i, j]]


_TIGHT = {"primal_feasibility_tolerance": 1e-11,
          "dual_feasibility_tolerance": 1e-11}


def lp_feasible(Aeq, beq, lower_bounds) -> LpResult:
    """Decide feasibility of {x : Aeq x = beq, x >= lower_bounds}.

    Feasible results carry a point satisfying the equalities to 1e-8; a
    point failing that check triggers one re-solve with tightened solver
    tolerances, after which the status degrades to unknown rather than
    guessing either way.
    """
    Aeq = np.asarray(Aeq, dtype=float)
    beq = np.asarray(beq, dtype=float).reshape(-1)
    lb = np.asarray(lower_bounds, dtype=float).reshape(-1)
    if Aeq.ndim != 2 or Aeq.shape[0] != beq.shape[0] or Aeq.shape[1] != lb.shape[0]:
        raise ValueError(f"inconsistent LP shapes: A {Aeq.shape}, b {beq.shape}, lb {lb.shape}")
    bounds = [(float(l) if np.isfinite(l) else None, None) for l in lb]
    cost = np.zeros(Aeq.shape[1])
    for options in (None, _TIGHT):
        try:
            res = linprog(cost, A_eq=Aeq, b_eq=beq, bounds=bounds,
                          method="highs", options=options)
        except Exception:
            return LpResult("unknown")
        if res.status == 2:
            return LpResult("infeasible")
        if res.status == 0:
            x = np.asarray(res.x, dtype=float)
            resid = np.abs(Aeq @ x - beq).max() if beq.size else 0.0
            bound_gap = np.max(np.where(np.isfinite(lb), lb - x, -np.inf)) if lb.size else 0.0
            if resid <= RESIDUAL_TOL and bound_gap <= RESIDUAL_TOL:
                return LpResult("feasible", x)
            continue
        return LpResult("unknown")
    return LpResult("unknown")


def motzkin_alternative(quad: QuadMatrix) -> tuple[str, MotzkinCertificate | None]:
    """Solve the alternative system for quad's strict/weak set.

    Returns (status, certificate): status 'feasible' means the alternative
    holds, i.e. the original set is provably empty, and the certificate is
    the multiplier vector; 'infeasible' means the original set is nonempty;
    'unknown' means the LP could not decide.
    """
    rows = quad.E.shape[0]
    strict_ind = np.zeros(rows)
    strict_ind[: quad.n_strict] = 1.0
    Aeq = np.vstack([quad.E.T, strict_ind])
    beq = np.zeros(Aeq.shape[0])
    beq[-1] = 1.0
    res = lp_feasible(Aeq, beq, np.zeros(rows))
    if res.status != "feasible":
        return res.status, None
    p = res.point
    return "feasible", MotzkinCertificate(p_strict=p[: quad.n_strict],
                                          p_weak=p[quad.n_strict:])


def switch_fireable(system: PwaSystem, i: int, j: int) -> bool:
    """True when the move from cell i to cell j cannot be ruled out.

    False requires a certificate that no point of cell i has its image in
    cell j; an undecided LP therefore counts as fireable.
    """
    for k in (i, j):
        if not 0 <= k < system.n_cells:
            raise IndexError(f"cell index {k} out of range for {system.n_cells} cells")
    quad = switch_quadratization(system.cells[i], system.laws[i], system.cells[j])
    status, _ = motzkin_alternative(quad)
    return status != "feasible"


def build_switch_graph(system: PwaSystem) -> SwitchGraph:
    """Boolean fireability matrix over all ordered cell pairs."""
    n = system.n_cells
    L = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            L[i, j] = switch_fireable(system, i, j)
    return SwitchGraph(L)


def init_intersects_cell(system: PwaSystem, i: int) -> bool:
    """True when the initial set may meet cell i (undecided LPs count as yes)."""
    if not 0 <= i < system.n_cells:
        raise IndexError(f"cell index {i} out of range for {system.n_cells} cells")
    quad = init_quadratization(system.init, system.cells[i])
    status, _ = motzkin_alternative(quad)
    return status != "feasible"


def cells_disjoint(system: PwaSystem) -> list:
    """Pairs (i, j), i < j, of cells not proven pairwise disjoint.

    An empty list certifies the partition property; a listed pair either
    overlaps or defeated the LP.  The stacked two-cell system reuses the
    init/cell intersection layout with cell i in the leading role.
    """
    overlapping = []
    for i in range(system.n_cells):
        for j in range(i + 1, system.n_cells):
            quad = init_quadratization(system.cells[i], system.cells[j])
            status, _ = motzkin_alternative(quad)
            if status != "feasible":
                overlapping.append((i, j))
    return overlapping


def input_unbounded_coords(system: PwaSystem) -> list:
    """Input coordinates without finite LP min and max over the input polytope.

    Strict rows are relaxed to weak ones, which preserves boundedness for
    nonempty sets (any recession direction of the relaxation is one of the
    strict set).  Empty lists certify the compactness the analysis assumes.
    """
    poly = system.input_polytope
    if system.m == 0:
        return []
    A_ub = np.vstack([poly.Ts, poly.Tw])
    b_ub = np.concatenate([poly.cs, poly.cw])
    bad = []
    for k in range(system.m):
        for sign in (1.0, -1.0):
            cost = np.zeros(system.m)
            cost[k] = sign
            try:
                res = linprog(cost, A_ub=A_ub, b_ub=b_ub,
                              bounds=[(None, None)] * system.m, method="highs")
            except Exception:
                res = None
            if res is None or res.status == 3:
                bad.append(k)
                break
            if res.status not in (0, 2):
                bad.append(k)
                break
    return bad
