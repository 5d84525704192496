"""Semidefinite program assembly, solving, and certificate extraction.

The analysis seeks one quadratic function per cell,

    V_i(x, u) = (x,u)^T P^i (x,u) + 2 q^i . (x,u),

a level alpha, and a norm bound beta such that the union of the sublevel
sets {V_i <= alpha} over the cells contains the initial set, is invariant
under every fireable switch, and lies inside the ball of squared radius
beta.  Each of those set inclusions is relaxed into one linear matrix
inequality using entrywise-nonnegative multiplier matrices against the
quadratization rows of the relevant set:

    invariance (i -> j):  -F_i^T [[0, q_j^T], [q_j, P^j]] F_i
                          + [[0, q_i^T], [q_i, P^i]] - E_ij^T U^{ij} E_ij >= 0
    initial set in cell i: -[[-alpha, q_i^T], [q_i, P^i]] - E_0i^T Z^i E_0i >= 0
    boundedness on cell i: -E_i^T W^i E_i + [[-alpha, q_i^T], [q_i, P^i]]
                          + [[beta, 0], [0, -Id]] >= 0

minimizing alpha + beta.  The alpha terms cancel exactly in the invariance
blocks, which is verified at assembly time.

A solved program is accepted only through an independent numeric recheck:
multipliers are clamped entrywise to nonnegative, every block is
re-evaluated in plain floating point, and all minimum eigenvalues must
clear -1e-6.  Margins: interior-point solutions sit on the boundary of the
feasible set whenever the system has a recurrent point inside the
partition (any fixed point or cycle forces the matching invariance blocks
singular), so requiring a uniform positive margin makes such programs
infeasible outright.  The margin therefore defaults to 0 and the clamped
eigenvalue recheck is the acceptance gate.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np
import cvxpy as cp

from pwqlyap import feas
from pwqlyap.model import (
    PwaSystem,
    QuadMatrix,
    cell_quadratization,
    homogenize,
    init_quadratization,
    switch_quadratization,
)

__all__ = [
    "EIG_TOL",
    "DEFAULT_MARGIN",
    "SdpError",
    "BlockSpec",
    "ConicProgram",
    "Solution",
    "Certificate",
    "RejectionReport",
    "invariance_block",
    "init_block",
    "boundedness_block",
    "assemble_program",
    "solve",
    "evaluate_block",
    "extract_certificate",
    "certificate_to_json",
    "certificate_from_json",
    "load_certificate",
    "save_certificate",
    "write_sdpa",
]

# Acceptance threshold for clamped block eigenvalues and audit inequalities.
EIG_TOL = 1e-6

# See the module docstring: a positive uniform margin is generically
# infeasible for stable systems, so the default adds none.
DEFAULT_MARGIN = 0.0


class SdpError(RuntimeError):
    """Assembly-time inconsistency in the conic program."""


def _is_expr(value) -> bool:
    return isinstance(value, cp.expressions.expression.Expression)


def _vmat(a, q, P):
    """Symmetric bordered matrix [[a, q^T], [q, P]] for numpy or cvxpy parts."""
    if _is_expr(a) or _is_expr(q) or _is_expr(P):
        n = P.shape[0]
        a_blk = (cp.reshape(a, (1, 1), order="F") if _is_expr(a)
                 else np.array([[float(a)]]))
        if _is_expr(q):
            q_row = cp.reshape(q, (1, n), order="F")
            q_col = cp.reshape(q, (n, 1), order="F")
        else:
            q_row = np.asarray(q, dtype=float).reshape(1, n)
            q_col = q_row.T
        return cp.bmat([[a_blk, q_row], [q_col, P]])
    q = np.asarray(q, dtype=float).reshape(-1)
    return np.block([[np.array([[float(a)]]), q[None, :]], [q[:, None], P]])


def invariance_block(F, P_i, q_i, P_j, q_j, U, E):
    """Invariance LMI for a switch with homogenized law F and rows E."""
    return -F.T @ _vmat(0.0, q_j, P_j) @ F + _vmat(0.0, q_i, P_i) - E.T @ U @ E


def init_block(alpha, P_i, q_i, Z, E):
    """Initial-set containment LMI for one cell with init/cell rows E."""
    return -_vmat(-alpha, q_i, P_i) - E.T @ Z @ E


def boundedness_block(alpha, beta, P_i, q_i, W, E):
    """Norm-bound LMI for one cell with cell rows E."""
    n = P_i.shape[0]
    corner = np.zeros((n + 1, n + 1))
    corner[0, 0] = 1.0
    ident = np.eye(n + 1)
    ident[0, 0] = 0.0
    return -E.T @ W @ E + _vmat(-alpha, q_i, P_i) + beta * corner - ident


@dataclass(frozen=True)
class BlockSpec:
    """One LMI block: its kind, the cells involved, and the quadratization
    rows its multiplier matrix contracts against."""

    kind: str
    i: int
    j: int | None
    quad: QuadMatrix

    @property
    def name(self) -> str:
        if self.kind == "invariance":
            return f"invariance({self.i},{self.j})"
        return f"{self.kind}({self.i})"


@dataclass(frozen=True)
class ConicProgram:
    """Assembled program: block specs in canonical order (boundedness by
    cell, init by cell, invariance by pair), the margin, and the system."""

    system: PwaSystem
    blocks: tuple
    intersecting: tuple
    fireable: tuple
    eps: float

    @property
    def block_dim(self) -> int:
        return 1 + self.system.d + self.system.m

    def block(self, name: str) -> BlockSpec:
        for spec in self.blocks:
            if spec.name == name:
                return spec
        raise KeyError(name)

    def to_cvxpy(self):
        """Build the cvxpy problem; returns (problem, handles).

        handles maps: 'alpha', 'beta' to scalar variables, 'P', 'q' to
        per-cell variable lists, and 'mult' to a dict of the multiplier
        variable of each block by block name.
        """
        system = self.system
        n = system.d + system.m
        nn = n + 1
        P_vars = [cp.Variable((n, n), symmetric=True, name=f"P{i}")
                  for i in range(system.n_cells)]
        q_vars = [cp.Variable(n, name=f"q{i}") for i in range(system.n_cells)]
        alpha = cp.Variable(name="alpha")
        beta = cp.Variable(name="beta")
        F = [homogenize(law, system.d, system.m).F for law in system.laws]
        constraints = []
        mult = {}
        margin = self.eps * np.eye(nn)
        for spec in self.blocks:
            rows = spec.quad.E.shape[0]
            M = cp.Variable((rows, rows), symmetric=True, name=spec.name)
            mult[spec.name] = M
            constraints.append(M >= 0)
            if spec.kind == "invariance":
                expr = invariance_block(F[spec.i], P_vars[spec.i], q_vars[spec.i],
                                        P_vars[spec.j], q_vars[spec.j], M, spec.quad.E)
                touched = {v.id for v in expr.variables()}
                if alpha.id in touched or beta.id in touched:
                    raise SdpError(f"{spec.name}: level variables must cancel "
                                   f"out of invariance blocks")
            elif spec.kind == "init":
                expr = init_block(alpha, P_vars[spec.i], q_vars[spec.i], M, spec.quad.E)
            elif spec.kind == "boundedness":
                expr = boundedness_block(alpha, beta, P_vars[spec.i], q_vars[spec.i],
                                         M, spec.quad.E)
            else:
                raise SdpError(f"unknown block kind {spec.kind!r}")
            constraints.append(expr >> margin)
        problem = cp.Problem(cp.Minimize(alpha + beta), constraints)
        handles = {"alpha": alpha, "beta": beta, "P": P_vars, "q": q_vars,
                   "mult": mult}
        return problem, handles


def assemble_program(system: PwaSystem, L, eps: float = DEFAULT_MARGIN,
                     intersecting=None) -> ConicProgram:
    """Assemble all LMI blocks for the given switch graph.

    One boundedness block per cell, one init block per cell the initial
    set may meet (computed here unless passed in), one invariance block
    per fireable pair.  eps is a uniform margin subtracted from every
    block at solve time; the assembled block formulas never include it.
    """
    Lmat = np.asarray(L.L if isinstance(L, feas.SwitchGraph) else L, dtype=bool)
    ncells = system.n_cells
    if Lmat.shape != (ncells, ncells):
        raise SdpError(f"switch graph shape {Lmat.shape} does not match "
                       f"{ncells} cells")
    if intersecting is None:
        intersecting = [i for i in range(ncells) if feas.init_intersects_cell(system, i)]
    intersecting = tuple(sorted(intersecting))
    fireable = tuple((i, j) for i in range(ncells) for j in range(ncells) if Lmat[i, j])
    blocks = []
    for i in range(ncells):
        blocks.append(BlockSpec("boundedness", i, None,
                                cell_quadratization(system.cells[i])))
    for i in intersecting:
        blocks.append(BlockSpec("init", i, None,
                                init_quadratization(system.init, system.cells[i])))
    for i, j in fireable:
        blocks.append(BlockSpec("invariance", i, j,
                                switch_quadratization(system.cells[i], system.laws[i],
                                                      system.cells[j])))
    return ConicProgram(system=system, blocks=tuple(blocks),
                        intersecting=intersecting, fireable=fireable, eps=float(eps))


@dataclass(frozen=True)
class Solution:
    """Numeric outcome of one solve: status in {optimal, near-optimal,
    infeasible, unknown}, values when the solver returned any."""

    status: str
    objective: float | None
    alpha: float | None
    beta: float | None
    P: tuple
    q: tuple
    multipliers: dict
    solver: str | None
    solve_seconds: float


_STATUS_MAP = {
    cp.OPTIMAL: "optimal",
    cp.OPTIMAL_INACCURATE: "near-optimal",
    cp.INFEASIBLE: "infeasible",
    cp.INFEASIBLE_INACCURATE: "infeasible",
}

# Interior-point settings: tight gap/feasibility targets; stalling close to
# the target returns the inaccurate status, which the clamped eigenvalue
# recheck then adjudicates.
_CLARABEL_OPTS = {"tol_gap_abs": 1e-9, "tol_gap_rel": 1e-9,
                  "tol_feas": 1e-9, "max_iter": 400}
_SCS_OPTS = {"eps_abs": 1e-9, "eps_rel": 1e-9, "max_iters": 100000}


def solve(program: ConicProgram, solver: str | None = None,
          verbose: bool = False) -> Solution:
    """Solve the assembled program, falling back across solvers.

    Tries the interior-point solver first, then the first-order solver if
    the former raises.  Solver failures surface as status 'unknown';
    values are never fabricated.
    """
    problem, handles = program.to_cvxpy()
    attempts = {
        "clarabel": (cp.CLARABEL, _CLARABEL_OPTS),
        "scs": (cp.SCS, _SCS_OPTS),
    }
    if solver is not None:
        key = solver.lower()
        if key not in attempts:
            raise ValueError(f"unknown solver {solver!r}; pick one of "
                             f"{sorted(attempts)}")
        order = [key]
    else:
        order = ["clarabel", "scs"]
    start = time.perf_counter()
    status = "unknown"
    used = None
    for key in order:
        name, opts = attempts[key]
        try:
            with warnings.catch_warnings():
                # The clamped eigenvalue recheck adjudicates inaccurate
                # solves; the advisory warning only pollutes stderr.
                warnings.filterwarnings("ignore", message="Solution may be inaccurate")
                problem.solve(solver=name, verbose=verbose, **opts)
        except Exception:
            continue
        used = key
        status = _STATUS_MAP.get(problem.status, "unknown")
        break
    elapsed = time.perf_counter() - start
    if status not in ("optimal", "near-optimal"):
        return Solution(status=status, objective=None, alpha=None, beta=None,
                        P=(), q=(), multipliers={}, solver=used,
                        solve_seconds=elapsed)
    mult = {name: np.asarray(var.value, dtype=float)
            for name, var in handles["mult"].items()}
    return Solution(
        status=status,
        objective=float(problem.value),
        alpha=float(handles["alpha"].value),
        beta=float(handles["beta"].value),
        P=tuple(np.asarray(P.value, dtype=float) for P in handles["P"]),
        q=tuple(np.asarray(q.value, dtype=float) for q in handles["q"]),
        multipliers=mult,
        solver=used,
        solve_seconds=elapsed,
    )


def evaluate_block(spec: BlockSpec, system: PwaSystem, alpha: float, beta: float,
                   P, q, M: np.ndarray) -> np.ndarray:
    """Numeric value of one LMI block (margin excluded)."""
    if spec.kind == "invariance":
        F = homogenize(system.laws[spec.i], system.d, system.m).F
        return invariance_block(F, P[spec.i], q[spec.i], P[spec.j], q[spec.j],
                                M, spec.quad.E)
    if spec.kind == "init":
        return init_block(alpha, P[spec.i], q[spec.i], M, spec.quad.E)
    if spec.kind == "boundedness":
        return boundedness_block(alpha, beta, P[spec.i], q[spec.i], M, spec.quad.E)
    raise SdpError(f"unknown block kind {spec.kind!r}")


@dataclass(frozen=True)
class Certificate:
    """Accepted piecewise quadratic invariant: V_i(z) = z^T P^i z + 2 q^i . z
    with level alpha and squared norm bound beta.

    Residuals record the minimum eigenvalue of every LMI block re-evaluated
    at the clamped solution; construction enforces the acceptance gate."""

    alpha: float
    beta: float
    eps: float
    P: tuple
    q: tuple
    residuals: tuple

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise ValueError(f"certificate alpha must be finite, got {self.alpha}")
        if not (self.beta >= 0.0):
            raise ValueError(f"certificate beta must be nonnegative, got {self.beta}")
        if len(self.P) != len(self.q) or not self.P:
            raise ValueError("certificate needs matching nonempty P and q lists")
        for name, eig in self.residuals:
            if not (eig >= -EIG_TOL):
                raise ValueError(f"residual {name}: min eigenvalue {eig:.3e} "
                                 f"below {-EIG_TOL:.0e}")

    @property
    def n_cells(self) -> int:
        return len(self.P)

    def value(self, i: int, z) -> float:
        """V_i at the point z = (x, u)."""
        z = np.asarray(z, dtype=float).reshape(-1)
        return float(z @ self.P[i] @ z + 2.0 * (self.q[i] @ z))


@dataclass(frozen=True)
class RejectionReport:
    """Why a solved program was not accepted as a certificate."""

    reason: str
    worst_block: str | None
    worst_eig: float | None
    residuals: tuple

    def __str__(self) -> str:
        if self.worst_block is None:
            return self.reason
        return (f"{self.reason}: worst block {self.worst_block} has minimum "
                f"eigenvalue {self.worst_eig:.3e} (threshold {-EIG_TOL:.0e})")


def extract_certificate(solution: Solution, program: ConicProgram):
    """Clamp multipliers, re-evaluate every block, accept or reject.

    Multiplier matrices are symmetrized and clamped entrywise to zero,
    then each block is recomputed in plain floating point; acceptance
    requires every minimum eigenvalue >= -1e-6, finite alpha, and beta >= 0.
    Returns a Certificate or a RejectionReport naming the worst block.
    """
    if solution.status not in ("optimal", "near-optimal"):
        raise ValueError(f"cannot extract a certificate from status "
                         f"{solution.status!r}")
    system = program.system
    residuals = []
    for spec in program.blocks:
        M = solution.multipliers[spec.name]
        M = np.maximum((M + M.T) / 2.0, 0.0)
        block = evaluate_block(spec, system, solution.alpha, solution.beta,
                               solution.P, solution.q, M)
        block = (block + block.T) / 2.0
        residuals.append((spec.name, float(np.linalg.eigvalsh(block).min())))
    worst_name, worst_eig = min(residuals, key=lambda item: item[1])
    if worst_eig < -EIG_TOL:
        return RejectionReport(reason="clamped LMI residual out of tolerance",
                               worst_block=worst_name, worst_eig=worst_eig,
                               residuals=tuple(residuals))
    if not np.isfinite(solution.alpha) or not (solution.beta >= 0.0):
        return RejectionReport(reason=f"degenerate levels alpha={solution.alpha}, "
                                      f"beta={solution.beta}",
                               worst_block=None, worst_eig=None,
                               residuals=tuple(residuals))
    return Certificate(alpha=float(solution.alpha), beta=float(solution.beta),
                       eps=program.eps,
                       P=tuple(np.asarray(P, dtype=float) for P in solution.P),
                       q=tuple(np.asarray(q, dtype=float) for q in solution.q),
                       residuals=tuple(residuals))


def certificate_to_json(cert: Certificate) -> dict:
    """Canonical JSON object: alpha, beta, eps, cells (P, q), residuals."""
    return {
        "alpha": float(cert.alpha),
        "beta": float(cert.beta),
        "eps": float(cert.eps),
        "cells": [{"P": [[float(v) for v in row] for row in P],
                   "q": [float(v) for v in q]}
                  for P, q in zip(cert.P, cert.q)],
        "residuals": [{"block": name, "min_eig": float(eig)}
                      for name, eig in cert.residuals],
    }


def certificate_from_json(obj: dict) -> Certificate:
    try:
        P = tuple(np.asarray(cell["P"], dtype=float) for cell in obj["cells"])
        q = tuple(np.asarray(cell["q"], dtype=float) for cell in obj["cells"])
        residuals = tuple((entry["block"], float(entry["min_eig"]))
                          for entry in obj.get("residuals", []))
        return Certificate(alpha=float(obj["alpha"]), beta=float(obj["beta"]),
                           eps=float(obj.get("eps", 0.0)), P=P, q=q,
                           residuals=residuals)
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed certificate JSON: {exc}") from exc


def load_certificate(path: str) -> Certificate:
    from pwqlyap import jsonio

    return certificate_from_json(jsonio.read_file(path))


def save_certificate(path: str, cert: Certificate) -> None:
    from pwqlyap import jsonio

    jsonio.write_file(path, certificate_to_json(cert))


def _upper_triangle(size: int) -> list:
    return [(r, c) for r in range(size) for c in range(r, size)]


def write_sdpa(program: ConicProgram, path: str) -> None:
    """Export the program as a sparse SDPA interchange file.

    Layout is canonical for byte-stable output.  Scalar variables in
    order: alpha, beta, then per cell (P upper triangle row-major, q),
    then each block's multiplier upper triangle, blocks in program order.
    Matrix blocks follow program block order; one trailing diagonal block
    holds the multiplier nonnegativity constraints.  The file encodes
    min c.x subject to sum_k x_k F_k - F_0 >= 0 blockwise; the margin eps
    lands in F_0.
    """
    system = program.system
    n = system.d + system.m
    nn = n + 1
    var_names = ["alpha", "beta"]
    for i in range(system.n_cells):
        var_names.extend(f"P{i}[{r},{c}]" for r, c in _upper_triangle(n))
        var_names.extend(f"q{i}[{k}]" for k in range(n))
    mult_offset = {}
    for spec in program.blocks:
        mult_offset[spec.name] = len(var_names)
        rows = spec.quad.E.shape[0]
        var_names.extend(f"{spec.name}[{r},{c}]" for r, c in _upper_triangle(rows))
    nvars = len(var_names)

    def cell_var_ids(i: int) -> list:
        base = 2 + i * (len(_upper_triangle(n)) + n)
        return list(range(base, base + len(_upper_triangle(n)) + n))

    def context(var_id: int | None, spec: BlockSpec):
        """Values with one scalar variable set to 1, the rest 0."""
        alpha = beta = 0.0
        P = [np.zeros((n, n)) for _ in range(system.n_cells)]
        q = [np.zeros(n) for _ in range(system.n_cells)]
        rows = spec.quad.E.shape[0]
        M = np.zeros((rows, rows))
        if var_id is None:
            return alpha, beta, P, q, M
        if var_id == 0:
            alpha = 1.0
        elif var_id == 1:
            beta = 1.0
        elif var_id >= mult_offset[spec.name] and \
                var_id < mult_offset[spec.name] + len(_upper_triangle(rows)):
            r, c = _upper_triangle(rows)[var_id - mult_offset[spec.name]]
            M[r, c] = M[c, r] = 1.0
        else:
            per_cell = len(_upper_triangle(n)) + n
            cell, offset = divmod(var_id - 2, per_cell)
            if offset < len(_upper_triangle(n)):
                r, c = _upper_triangle(n)[offset]
                P[cell][r, c] = P[cell][c, r] = 1.0
            else:
                q[cell][offset - len(_upper_triangle(n))] = 1.0
        return alpha, beta, P, q, M

    def touched_ids(spec: BlockSpec) -> list:
        ids = []
        if spec.kind in ("init", "boundedness"):
            ids.append(0)
        if spec.kind == "boundedness":
            ids.append(1)
        cells = {spec.i} if spec.j is None else {spec.i, spec.j}
        for cell in sorted(cells):
            ids.extend(cell_var_ids(cell))
        rows = spec.quad.E.shape[0]
        ids.extend(range(mult_offset[spec.name],
                         mult_offset[spec.name] + len(_upper_triangle(rows))))
        return ids

    lines = []
    lines.append(f"{nvars}")
    n_mult = sum(len(_upper_triangle(spec.quad.E.shape[0])) for spec in program.blocks)
    nblocks = len(program.blocks) + 1
    lines.append(f"{nblocks}")
    sizes = [str(nn)] * len(program.blocks) + [str(-n_mult)]
    lines.append(" ".join(sizes))
    costs = ["0"] * nvars
    costs[0] = costs[1] = "1"
    lines.append(" ".join(costs))

    entries = []

    def emit(matno: int, blkno: int, r: int, c: int, value: float) -> None:
        if value != 0.0:
            entries.append(f"{matno} {blkno} {r + 1} {c + 1} "
                           f"{format(value + 0.0, '.17g')}")

    for blkno, spec in enumerate(program.blocks, start=1):
        alpha0, beta0, P0, q0, M0 = context(None, spec)
        const = evaluate_block(spec, system, alpha0, beta0, P0, q0, M0)
        F0 = program.eps * np.eye(nn) - const
        for r, c in _upper_triangle(nn):
            emit(0, blkno, r, c, F0[r, c])
        for var_id in touched_ids(spec):
            alpha, beta, P, q, M = context(var_id, spec)
            coeff = evaluate_block(spec, system, alpha, beta, P, q, M) - const
            for r, c in _upper_triangle(nn):
                emit(var_id + 1, blkno, r, c, coeff[r, c])
    diag_block = nblocks
    diag_pos = 0
    for spec in program.blocks:
        rows = spec.quad.E.shape[0]
        for k in range(len(_upper_triangle(rows))):
            emit(mult_offset[spec.name] + k + 1, diag_block, diag_pos, diag_pos, 1.0)
            diag_pos += 1

    from pwqlyap import jsonio

    jsonio.write_text(path, "\n".join(lines + entries) + "\n")
