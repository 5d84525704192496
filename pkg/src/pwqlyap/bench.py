"""Random PWA benchmark generator and batch analysis harness.

Systems are generated so that the structural preconditions hold by
construction: cells are the sign-chambers of up to two random hyperplanes
(one side strict, the complementary side weak, so the chambers partition
the space exactly), every cell additionally carries the input-range rows,
and every law matrix is rescaled below a target spectral radius.  The
batch runner treats the requested dimension and cell count as caps and
draws each item's size below them, producing a mixed corpus from
single-law linear systems up to four-cell switched systems.  Each item
runs through the full pipeline (switch pruning, SDP assembly, solve,
certificate extraction) and the summary reports per-item status,
objective, and timing plus aggregate acceptance.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from pwqlyap import feas, sdp
from pwqlyap.model import AffineLaw, Polyhedron, PwaSystem

__all__ = [
    "GenParams",
    "random_partition",
    "random_stable_law",
    "generate_system",
    "validate_system",
    "run_batch",
]


@dataclass(frozen=True)
class GenParams:
    """Generator knobs: state dimension d <= 4, single input, cell count in
    {1, 2, 4} (sign-chambers of 0, 1, or 2 hyperplanes), coefficient
    scale, target spectral radius rho in (0, 1), and the master seed."""

    d: int = 4
    m: int = 1
    cells: int = 4
    scale: float = 1.0
    rho: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.d <= 4:
            raise ValueError(f"d must be in 1..4, got {self.d}")
        if self.m != 1:
            raise ValueError(f"only single-input systems are generated, got m={self.m}")
        if self.cells not in (1, 2, 4):
            raise ValueError(f"cells must be 1, 2, or 4 (sign-chambers), got {self.cells}")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (0, 1), got {self.rho}")
        if not self.scale > 0.0:
            raise ValueError(f"scale must be positive, got {self.scale}")


def _input_rows(d: int, m: int) -> tuple:
    T = np.zeros((2 * m, d + m))
    c = np.empty(2 * m)
    for k in range(m):
        T[2 * k, d + k] = 1.0
        T[2 * k + 1, d + k] = -1.0
        c[2 * k] = 1.0
        c[2 * k + 1] = 1.0
    return T, c


def random_partition(params: GenParams, rng: np.random.Generator) -> tuple:
    """Sign-chamber cells of k random hyperplanes, k = log2(cell count).

    Each hyperplane a.z = b (unit normal over the state-input space,
    offset within the init box scale) splits space into a strict side
    a.z < b and the weak complement -a.z <= -b; chambers take one side
    per hyperplane, so they are pairwise disjoint and cover everything.
    Input-range rows u in [-1, 1]^m are appended to every cell.
    """
    d, m = params.d, params.m
    dim = d + m
    k = {1: 0, 2: 1, 4: 2}[params.cells]
    normals = []
    offsets = []
    for _ in range(k):
        a = rng.normal(size=dim)
        a /= np.linalg.norm(a)
        normals.append(a)
        offsets.append(rng.uniform(-0.5, 0.5))
    in_T, in_c = _input_rows(d, m)
    cells = []
    for chamber in range(2 ** k):
        strict_rows, strict_c, weak_rows, weak_c = [], [], [], []
        for h in range(k):
            if (chamber >> h) & 1 == 0:
                strict_rows.append(normals[h])
                strict_c.append(offsets[h])
            else:
                weak_rows.append(-normals[h])
                weak_c.append(-offsets[h])
        Ts = np.vstack(strict_rows) if strict_rows else np.zeros((0, dim))
        Tw_parts = (weak_rows + [in_T]) if weak_rows else [in_T]
        Tw = np.vstack([np.atleast_2d(p) for p in Tw_parts])
        cw = np.concatenate([np.asarray(weak_c), in_c])
        cells.append(Polyhedron(Ts, np.asarray(strict_c), Tw, cw))
    return tuple(cells)


def random_stable_law(params: GenParams, rng: np.random.Generator) -> AffineLaw:
    """Affine law with spectral radius strictly below the target.

    A is drawn with uniform entries in [-scale, scale]; whenever its
    spectral radius reaches the target it is shrunk onto rho * (1 - 1e-6)
    of itself.  B and b are drawn at a fraction of the scale so that
    forced translations stay small relative to the contraction.
    """
    d, m = params.d, params.m
    A = rng.uniform(-params.scale, params.scale, size=(d, d))
    radius = float(np.max(np.abs(np.linalg.eigvals(A)))) if d else 0.0
    if radius >= params.rho:
        A = A * (params.rho / radius) * (1.0 - 1e-6)
    B = rng.uniform(-0.5 * params.scale, 0.5 * params.scale, size=(d, m))
    b = rng.uniform(-0.5 * params.scale, 0.5 * params.scale, size=d)
    return AffineLaw(A, B, b)


def generate_system(params: GenParams, rng: np.random.Generator | None = None) -> PwaSystem:
    """One random PWA system: sign-chamber cells, one stable law per cell,
    init box [-1, 1]^d crossed with the input box, inputs in [-1, 1]^m."""
    if rng is None:
        rng = np.random.default_rng(params.seed)
    d, m = params.d, params.m
    cells = random_partition(params, rng)
    laws = tuple(random_stable_law(params, rng) for _ in cells)
    in_T, in_c = _input_rows(d, m)
    zero = np.zeros((0, d + m))
    init_T, init_c = _input_rows(0, d)
    init_T = np.hstack([init_T, np.zeros((2 * d, m))])
    init = Polyhedron(zero, np.zeros(0), np.vstack([init_T, in_T]),
                      np.concatenate([init_c, in_c]))
    input_T, input_c = _input_rows(0, m)
    input_poly = Polyhedron(np.zeros((0, m)), np.zeros(0), input_T, input_c)
    return PwaSystem(d=d, m=m, cells=cells, laws=laws,
                     input_polytope=input_poly, init=init)


def validate_system(system: PwaSystem, rng: np.random.Generator,
                    samples: int = 10000) -> dict:
    """Partition and stability checks for a generated system.

    partition_ok requires pairwise disjointness (LP) and >= 99.9% of box
    samples landing in exactly one cell; rho_ok requires every law's
    spectral radius below 1.
    """
    overlaps = feas.cells_disjoint(system)
    d, m = system.d, system.m
    z = rng.uniform(-1.0, 1.0, size=(samples, d + m))
    claims = np.zeros(samples, dtype=int)
    for cell in system.cells:
        mask = np.ones(samples, dtype=bool)
        if cell.n_strict:
            mask &= np.all(z @ cell.Ts.T < cell.cs, axis=1)
        if cell.n_weak:
            mask &= np.all(z @ cell.Tw.T <= cell.cw, axis=1)
        claims += mask
    coverage = float(np.mean(claims == 1))
    radii = [float(np.max(np.abs(np.linalg.eigvals(law.A)))) for law in system.laws]
    return {
        "partition_ok": bool(not overlaps and coverage >= 0.999),
        "coverage": coverage,
        "overlaps": overlaps,
        "rho_ok": bool(max(radii) < 1.0),
        "max_rho": max(radii),
    }


def _run_item(index: int, params: GenParams, seed_seq, timeout: float) -> dict:
    start = time.perf_counter()
    item = {"index": index, "status": "error", "objective": None,
            "alpha": None, "beta": None, "seconds": 0.0,
            "d": None, "cells": None, "fireable": None,
            "partition_ok": None, "rho_ok": None, "message": None}
    try:
        rng = np.random.default_rng(seed_seq)
        # Batch items draw their size up to the caps in params, so a batch
        # is a mixed corpus of small and large systems.
        d = int(rng.integers(1, params.d + 1))
        allowed = [c for c in (1, 2, 4) if c <= params.cells]
        cells = int(allowed[rng.integers(0, len(allowed))])
        item_params = GenParams(d=d, m=params.m, cells=cells,
                                scale=params.scale, rho=params.rho,
                                seed=params.seed)
        item["d"] = d
        item["cells"] = cells
        system = generate_system(item_params, rng)
        checks = validate_system(system, rng)
        item["partition_ok"] = checks["partition_ok"]
        item["rho_ok"] = checks["rho_ok"]
        L = feas.build_switch_graph(system)
        item["fireable"] = int(np.count_nonzero(L.L))
        program = sdp.assemble_program(system, L)
        solution = sdp.solve(program)
        if solution.status in ("optimal", "near-optimal"):
            outcome = sdp.extract_certificate(solution, program)
            if isinstance(outcome, sdp.Certificate):
                item["status"] = "accepted"
                item["objective"] = solution.objective
                item["alpha"] = outcome.alpha
                item["beta"] = outcome.beta
            else:
                item["status"] = "rejected"
                item["message"] = str(outcome)
        else:
            item["status"] = solution.status
    except Exception as exc:
        item["status"] = "error"
        item["message"] = f"{type(exc).__name__}: {exc}"
    item["seconds"] = time.perf_counter() - start
    if item["seconds"] > timeout and item["status"] not in ("error",):
        item["status"] = "timeout"
    return item


def run_batch(n: int, params: GenParams, workers: int = 1,
              timeout: float = 60.0) -> dict:
    """Generate and analyze n systems; never aborts on per-item failure.

    params.d and params.cells act as caps: each item draws its own state
    dimension in 1..d and its cell count from {1, 2, 4} up to the cap, so
    a batch mixes single-law, two-cell, and four-cell systems of varying
    size.  Items use independent child seeds of params.seed, so the batch
    is deterministic for a fixed seed and independent of the worker count.
    Returns a JSON-ready summary with per-item status/objective/seconds.
    """
    seeds = np.random.SeedSequence(params.seed).spawn(max(n, 1))[:n]
    start = time.perf_counter()
    if workers > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            items = list(pool.map(
                lambda k: _run_item(k, params, seeds[k], timeout), range(n)))
    else:
        items = [_run_item(k, params, seeds[k], timeout) for k in range(n)]
    accepted = sum(1 for item in items if item["status"] == "accepted")
    return {
        "n": n,
        "seed": params.seed,
        "params": {"d": params.d, "m": params.m, "cells": params.cells,
                   "scale": params.scale, "rho": params.rho},
        "accepted": accepted,
        "acceptance_rate": accepted / n if n else 0.0,
        "all_partitions_ok": all(item["partition_ok"] for item in items) if items else True,
        "all_rho_ok": all(item["rho_ok"] for item in items) if items else True,
        "total_seconds": time.perf_counter() - start,
        "items": items,
    }
