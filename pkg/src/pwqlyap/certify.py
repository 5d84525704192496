"""Certificate-facing analysis: membership, simulation, Monte-Carlo audit.

A certificate (P^i, q^i, alpha, beta) claims that every reachable point
z = (x, u) of the system satisfies V_i(z) <= alpha in its containing cell
and ||z||^2 <= beta.  This module checks those claims from the outside:
pointwise membership queries, deterministic trajectory simulation under an
input policy, a randomized audit that hammers the claims along thousands
of trajectories, and the per-coordinate state bounds the norm bound
implies.  Audit inequalities use the same 1e-6 tolerance as certificate
acceptance, scaled by the squared point magnitude to match how eigenvalue
perturbations of the LMI blocks act on quadratic forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from pwqlyap.model import Polyhedron, PwaSystem, cell_of, step
from pwqlyap.sdp import EIG_TOL, Certificate

__all__ = [
    "Trajectory",
    "AuditReport",
    "sublevel_membership",
    "constant_policy",
    "uniform_policy",
    "simulate",
    "audit",
    "state_bounds",
]


@dataclass(frozen=True)
class Trajectory:
    """Visited points (x_k, u_k) with their cells, plus why iteration
    stopped: 'steps-exhausted' or 'no-containing-cell'."""

    cells: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    reason: str

    def __len__(self) -> int:
        return self.states.shape[0]


def sublevel_membership(cert: Certificate, system: PwaSystem, x, u) -> bool:
    """True iff V_i(x, u) <= alpha in the containing cell i.

    A point outside every cell has no V to evaluate, so that case raises
    instead of answering false.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    i = cell_of(system, x, u)
    if i is None:
        raise ValueError(f"point {(*x, *u)} lies outside every cell")
    return cert.value(i, np.concatenate([x, u])) <= cert.alpha


def constant_policy(u):
    """Input policy holding u fixed."""
    u = np.asarray(u, dtype=float).reshape(-1)

    def policy(k: int, x: np.ndarray) -> np.ndarray:
        return u

    return policy


def _bounding_box(poly: Polyhedron) -> tuple:
    """Per-coordinate [lo, hi] of the polyhedron via LP (strict rows relaxed)."""
    dim = poly.dim
    A_ub = np.vstack([poly.Ts, poly.Tw])
    b_ub = np.concatenate([poly.cs, poly.cw])
    lo, hi = np.empty(dim), np.empty(dim)
    for k in range(dim):
        for sign, target in ((1.0, lo), (-1.0, hi)):
            cost = np.zeros(dim)
            cost[k] = sign
            res = linprog(cost, A_ub=A_ub, b_ub=b_ub,
                          bounds=[(None, None)] * dim, method="highs")
            if res.status != 0:
                raise RuntimeError(f"sampling box: coordinate {k} of the polyhedron "
                                   f"is unbounded or empty (LP status {res.status})")
            target[k] = sign * res.fun
    return lo, hi


def _sample_polyhedron(poly: Polyhedron, count: int, rng: np.random.Generator,
                       max_rounds: int = 1000) -> np.ndarray:
    """Uniform rejection sampling from the bounding box into the polyhedron."""
    if poly.dim == 0:
        return np.zeros((count, 0))
    lo, hi = _bounding_box(poly)
    out = np.empty((count, poly.dim))
    filled = 0
    for _ in range(max_rounds):
        need = count - filled
        if need == 0:
            return out
        draw = rng.uniform(lo, hi, size=(max(need, 1), poly.dim))
        ok = np.all(draw @ poly.Ts.T < poly.cs, axis=1) & \
            np.all(draw @ poly.Tw.T <= poly.cw, axis=1)
        good = draw[ok]
        take = min(len(good), need)
        out[filled:filled + take] = good[:take]
        filled += take
    raise RuntimeError("rejection sampling made no progress; the set is too "
                       "thin inside its bounding box")


def uniform_policy(system: PwaSystem, rng: np.random.Generator):
    """Inputs drawn i.i.d. uniformly from the input polytope (rejection
    sampling over its bounding box)."""
    poly = system.input_polytope
    if system.m == 0:
        empty = np.zeros(0)
        return lambda k, x: empty
    lo, hi = _bounding_box(poly)

    def policy(k: int, x: np.ndarray) -> np.ndarray:
        for _ in range(1000):
            u = rng.uniform(lo, hi)
            if poly.contains(u):
                return u
        raise RuntimeError("input polytope too thin for rejection sampling")

    return policy


def simulate(system: PwaSystem, x0, input_policy, steps: int) -> Trajectory:
    """Iterate the system for up to `steps` stages from state x0.

    input_policy is a callable (k, x) -> u, a single constant input
    vector, or a (steps, m) array of per-stage inputs.  Iteration records
    (x_k, u_k, cell_k) per stage and stops early if a point escapes the
    partition.
    """
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != system.d:
        raise ValueError(f"x0 has dimension {x.shape[0]}, expected {system.d}")
    policy = input_policy
    if not callable(input_policy):
        arr = np.asarray(input_policy, dtype=float)
        if arr.ndim <= 1:
            policy = constant_policy(arr)
        else:
            if arr.shape[0] < steps or arr.shape[1] != system.m:
                raise ValueError(f"input sequence of shape {arr.shape} cannot "
                                 f"drive {steps} steps of an m={system.m} system")
            policy = lambda k, _x: arr[k]
    cells, states, inputs = [], [], []
    reason = "steps-exhausted"
    for k in range(steps):
        u = np.asarray(policy(k, x), dtype=float).reshape(-1)
        i = cell_of(system, x, u)
        if i is None:
            reason = "no-containing-cell"
            break
        cells.append(i)
        states.append(x.copy())
        inputs.append(u.copy())
        x = step(system, i, x, u)
    return Trajectory(
        cells=np.asarray(cells, dtype=int),
        states=np.asarray(states, dtype=float).reshape(len(states), system.d),
        inputs=np.asarray(inputs, dtype=float).reshape(len(inputs), system.m),
        reason=reason,
    )


@dataclass(frozen=True)
class AuditReport:
    """Outcome of a randomized certificate audit.

    Violation counts are point counts; examples carry up to ten
    (kind, trial, stage) triples for diagnosis.  max_V_excess is the
    largest V - alpha observed (negative when the claim holds with room),
    max_norm_sq the largest squared point norm.
    """

    trials: int
    steps: int
    points: int
    sublevel_violations: int
    norm_violations: int
    partition_failures: int
    max_V_excess: float | None
    max_norm_sq: float | None
    examples: tuple

    @property
    def clean(self) -> bool:
        return (self.sublevel_violations == 0 and self.norm_violations == 0
                and self.partition_failures == 0)

    def to_json(self) -> dict:
        return {
            "clean": self.clean,
            "trials": self.trials,
            "steps": self.steps,
            "points": self.points,
            "sublevel_violations": self.sublevel_violations,
            "norm_violations": self.norm_violations,
            "partition_failures": self.partition_failures,
            "max_V_excess": self.max_V_excess,
            "max_norm_sq": self.max_norm_sq,
            "examples": [{"kind": kind, "trial": int(t), "stage": int(k)}
                         for kind, t, k in self.examples],
        }


def audit(cert: Certificate, system: PwaSystem, trials: int, steps: int,
          rng_seed: int) -> AuditReport:
    """Drive `trials` trajectories from the initial set and test the
    certificate claims at every visited point.

    Initial (x, u) pairs are sampled uniformly from the initial
    polyhedron, later inputs uniformly from the input polytope.  At each
    stage every live trajectory's point is located in the partition
    (failures freeze that trajectory and are reported), V_i <= alpha and
    ||z||^2 <= beta are tested with tolerance 1e-6 * (1 + ||(1,z)||^2),
    and the state advances through the containing cell's law.
    Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(rng_seed)
    d, m = system.d, system.m
    report_examples: list = []
    if trials == 0:
        return AuditReport(trials=0, steps=steps, points=0,
                           sublevel_violations=0, norm_violations=0,
                           partition_failures=0, max_V_excess=None,
                           max_norm_sq=None, examples=())
    z0 = _sample_polyhedron(system.init, trials, rng)
    x = z0[:, :d].copy()
    u = z0[:, d:].copy()
    if m:
        input_poly = system.input_polytope
        in_lo, in_hi = _bounding_box(input_poly)
    live = np.ones(trials, dtype=bool)
    sublevel_violations = 0
    norm_violations = 0
    partition_failures = 0
    points = 0
    max_v_excess = -np.inf
    max_norm = -np.inf
    cell_idx = np.empty(trials, dtype=int)
    for k in range(steps):
        if not live.any():
            break
        z = np.hstack([x, u]) if m else x
        # Locate every live point in the partition (vectorized per cell).
        claims = np.zeros(trials, dtype=int)
        cell_idx.fill(-1)
        for i, cell in enumerate(system.cells):
            mask = live.copy()
            if cell.n_strict:
                mask &= np.all(z @ cell.Ts.T < cell.cs, axis=1)
            if cell.n_weak:
                mask &= np.all(z @ cell.Tw.T <= cell.cw, axis=1)
            claims += mask
            cell_idx[mask] = i
        bad = live & (claims != 1)
        room = max(0, 10 - len(report_examples))
        for t in np.flatnonzero(bad)[:room]:
            report_examples.append(("partition", t, k))
        partition_failures += int(bad.sum())
        live = live & ~bad
        idx = np.flatnonzero(live)
        if idx.size == 0:
            break
        points += idx.size
        zi = z[idx]
        norm_sq = np.einsum("ij,ij->i", zi, zi)
        tol = EIG_TOL * (2.0 + norm_sq)
        vvals = np.empty(idx.size)
        for i in range(system.n_cells):
            sel = cell_idx[idx] == i
            if not sel.any():
                continue
            zc = zi[sel]
            vvals[sel] = np.einsum("ij,jk,ik->i", zc, cert.P[i], zc) \
                + 2.0 * (zc @ cert.q[i])
        v_bad = vvals > cert.alpha + tol
        n_bad = norm_sq > cert.beta + tol
        max_v_excess = max(max_v_excess, float((vvals - cert.alpha).max()))
        max_norm = max(max_norm, float(norm_sq.max()))
        sublevel_violations += int(v_bad.sum())
        norm_violations += int(n_bad.sum())
        room = max(0, 10 - len(report_examples))
        for t in idx[v_bad][:room]:
            report_examples.append(("sublevel", t, k))
        room = max(0, 10 - len(report_examples))
        for t in idx[n_bad][:room]:
            report_examples.append(("norm", t, k))
        # Advance live trajectories through their cells' laws.
        new_x = x.copy()
        for i, law in enumerate(system.laws):
            sel = idx[cell_idx[idx] == i]
            if sel.size == 0:
                continue
            new_x[sel] = x[sel] @ law.A.T + (u[sel] @ law.B.T if m else 0.0) + law.b
        x = new_x
        if m and k + 1 < steps:
            fresh = np.empty((idx.size, m))
            filled = 0
            for _ in range(1000):
                need = idx.size - filled
                if need == 0:
                    break
                draw = rng.uniform(in_lo, in_hi, size=(need, m))
                ok = np.all(draw @ input_poly.Ts.T < input_poly.cs, axis=1) & \
                    np.all(draw @ input_poly.Tw.T <= input_poly.cw, axis=1)
                good = draw[ok]
                take = min(len(good), need)
                fresh[filled:filled + take] = good[:take]
                filled += take
            if filled < idx.size:
                raise RuntimeError("input polytope too thin for rejection sampling")
            u[idx] = fresh
    return AuditReport(
        trials=trials, steps=steps, points=points,
        sublevel_violations=sublevel_violations,
        norm_violations=norm_violations,
        partition_failures=partition_failures,
        max_V_excess=None if points == 0 else float(max_v_excess),
        max_norm_sq=None if points == 0 else float(max_norm),
        examples=tuple(report_examples[:10]),
    )


def state_bounds(cert: Certificate) -> np.ndarray:
    """Componentwise intervals implied by ||(x,u)||^2 <= beta.

    Returns an (n, 2) array of [-sqrt(beta), sqrt(beta)] rows, one per
    state-input coordinate.
    """
    radius = float(np.sqrt(cert.beta))
    n = cert.P[0].shape[0]
    return np.array([[-radius, radius]] * n)
