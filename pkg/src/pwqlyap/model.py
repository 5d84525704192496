"""Core data model: PWA systems, homogenization, and quadratization matrices.

A piecewise affine (PWA) system partitions the state-input space R^(d+m)
into polyhedral cells, each carrying an affine update law.  A point z =
(x, u) belongs to a cell when T_s z < c_s holds componentwise strictly and
T_w z <= c_w holds weakly; the strict/weak split is what makes the cells a
true partition, so membership is evaluated with exact comparisons and no
tolerance.

Every set handled here (cell, switch set, init intersection) is turned into
a "quadratization" matrix E whose rows are the affine forms [c | -T]: a
member point z satisfies E (1, z) >= 0 componentwise, strictly on the strict
block.  A leading row (1, 0, ..., 0) is prepended to the strict block so
that products (1,z)^T E^T M E (1,z) with an entrywise-nonnegative M can
express one-sided cuts, not only squares.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelError",
    "PartitionError",
    "Polyhedron",
    "AffineLaw",
    "HomogeneousLaw",
    "PwaSystem",
    "QuadMatrix",
    "homogenize",
    "cell_quadratization",
    "switch_quadratization",
    "init_quadratization",
    "step",
    "cell_of",
    "system_to_json",
    "system_from_json",
    "load_system",
    "save_system",
]


class ModelError(ValueError):
    """Inconsistent dimensions or malformed system data."""


class PartitionError(RuntimeError):
    """A point was claimed by several cells: the cells do not form a partition."""


def _matrix(value, rows: int | None, cols: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.size == 0 and arr.ndim != 2:
        arr = arr.reshape(0, cols)
    if arr.ndim != 2:
        raise ModelError(f"{name} must be a matrix, got shape {arr.shape}")
    if rows is not None and arr.shape[0] != rows:
        raise ModelError(f"{name} must have {rows} rows, got {arr.shape[0]}")
    if arr.shape[1] != cols:
        raise ModelError(f"{name} must have {cols} columns, got {arr.shape[1]}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


def _vector(value, size: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape[0] != size:
        raise ModelError(f"{name} must have {size} entries, got {arr.shape[0]}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Polyhedron:
    """Conjunction of strict rows T_s z < c_s and weak rows T_w z <= c_w.

    Either block may be empty (zero rows).  All matrices share the same
    column count, the ambient dimension.
    """

    Ts: np.ndarray
    cs: np.ndarray
    Tw: np.ndarray
    cw: np.ndarray

    def __post_init__(self):
        Ts = np.asarray(self.Ts, dtype=float)
        Tw = np.asarray(self.Tw, dtype=float)
        if Ts.ndim != 2 or Tw.ndim != 2:
            raise ModelError("Ts and Tw must be 2-d matrices (use 0-row matrices for empty blocks)")
        if Ts.shape[1] != Tw.shape[1]:
            raise ModelError(f"Ts has {Ts.shape[1]} columns but Tw has {Tw.shape[1]}")
        dim = Ts.shape[1]
        object.__setattr__(self, "Ts", _matrix(Ts, None, dim, "Ts"))
        object.__setattr__(self, "cs", _vector(self.cs, Ts.shape[0], "cs"))
        object.__setattr__(self, "Tw", _matrix(Tw, None, dim, "Tw"))
        object.__setattr__(self, "cw", _vector(self.cw, Tw.shape[0], "cw"))

    @property
    def dim(self) -> int:
        return self.Ts.shape[1]

    @property
    def n_strict(self) -> int:
        return self.Ts.shape[0]

    @property
    def n_weak(self) -> int:
        return self.Tw.shape[0]

    def contains(self, z) -> bool:
        """Exact membership: strict rows with <, weak rows with <=, tolerance 0."""
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.shape[0] != self.dim:
            raise ModelError(f"point has dimension {z.shape[0]}, polyhedron has {self.dim}")
        return bool(np.all(self.Ts @ z < self.cs) and np.all(self.Tw @ z <= self.cw))

    @staticmethod
    def empty_blocks(dim: int) -> "Polyhedron":
        """The whole space: no strict and no weak rows."""
        zero = np.zeros((0, dim))
        return Polyhedron(zero, np.zeros(0), zero, np.zeros(0))


@dataclass(frozen=True)
class AffineLaw:
    """Update x_next = A x + B u + b."""

    A: np.ndarray
    B: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ModelError(f"A must be square, got shape {A.shape}")
        d = A.shape[0]
        B = np.asarray(self.B, dtype=float)
        if B.ndim != 2 or B.shape[0] != d:
            raise ModelError(f"B must have {d} rows, got shape {B.shape}")
        object.__setattr__(self, "A", _matrix(A, d, d, "A"))
        object.__setattr__(self, "B", _matrix(B, d, B.shape[1], "B"))
        object.__setattr__(self, "b", _vector(self.b, d, "b"))

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class HomogeneousLaw:
    """Linear action F on (1, x, u): row 0 fixes the 1, the last m rows copy u."""

    F: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        if F.ndim != 2 or F.shape[0] != F.shape[1]:
            raise ModelError(f"F must be square, got shape {F.shape}")
        object.__setattr__(self, "F", _matrix(F, F.shape[0], F.shape[0], "F"))


@dataclass(frozen=True)
class PwaSystem:
    """Cells with matching laws over R^(d+m), an input polytope over u, and
    an initial polyhedron over (x, u).

    Cell matrices have d+m columns; cells typically repeat the input bounds
    as weak rows so that each cell alone decides membership of (x, u).
    Structural shape checks happen here; semantic checks needing an LP
    (cell disjointness, input boundedness) live in the feas module.
    """

    d: int
    m: int
    cells: tuple
    laws: tuple
    input_polytope: Polyhedron
    init: Polyhedron

    def __post_init__(self):
        if self.d < 1 or self.m < 0:
            raise ModelError(f"need d >= 1 and m >= 0, got d={self.d}, m={self.m}")
        cells = tuple(self.cells)
        laws = tuple(self.laws)
        if len(cells) != len(laws) or not cells:
            raise ModelError(f"need equally many cells and laws, at least one: "
                             f"{len(cells)} cells, {len(laws)} laws")
        n = self.d + self.m
        for k, cell in enumerate(cells):
            if cell.dim != n:
                raise ModelError(f"cell {k} has dimension {cell.dim}, expected {n}")
        for k, law in enumerate(laws):
            if law.d != self.d or law.m != self.m:
                raise ModelError(f"law {k} has shape ({law.d},{law.m}), expected ({self.d},{self.m})")
        if self.input_polytope.dim != self.m:
            raise ModelError(f"input polytope has dimension {self.input_polytope.dim}, expected {self.m}")
        if self.init.dim != n:
            raise ModelError(f"init polyhedron has dimension {self.init.dim}, expected {n}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "laws", laws)

    @property
    def n_cells(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class QuadMatrix:
    """Rows [c | -T] of affine forms over (1, x, u); the first n_strict rows
    (including the leading (1, 0...0) row where present) must be strictly
    positive on members, the rest nonnegative."""

    E: np.ndarray
    n_strict: int

    def __post_init__(self):
        E = np.asarray(self.E, dtype=float)
        if E.ndim != 2:
            raise ModelError(f"E must be a matrix, got shape {E.shape}")
        if not 0 <= self.n_strict <= E.shape[0]:
            raise ModelError(f"n_strict={self.n_strict} out of range for {E.shape[0]} rows")
        object.__setattr__(self, "E", _matrix(E, E.shape[0], E.shape[1], "E"))

    @property
    def strict(self) -> np.ndarray:
        return self.E[: self.n_strict]

    @property
    def weak(self) -> np.ndarray:
        return self.E[self.n_strict:]


def homogenize(law: AffineLaw, d: int, m: int) -> HomogeneousLaw:
    """Embed x_next = A x + B u + b as F (1, x, u) = (1, x_next, u)."""
    if law.d != d or law.m != m:
        raise ModelError(f"law has shape ({law.d},{law.m}), expected ({d},{m})")
    n = 1 + d + m
    F = np.zeros((n, n))
    F[0, 0] = 1.0
    F[1:1 + d, 0] = law.b
    F[1:1 + d, 1:1 + d] = law.A
    F[1:1 + d, 1 + d:] = law.B
    F[1 + d:, 1 + d:] = np.eye(m)
    return HomogeneousLaw(F)


def _lead(cols: int) -> np.ndarray:
    row = np.zeros((1, cols))
    row[0, 0] = 1.0
    return row


def cell_quadratization(cell: Polyhedron) -> QuadMatrix:
    """E stacks [(1, 0...0); c_s | -T_s] over [c_w | -T_w]."""
    cols = 1 + cell.dim
    strict = np.vstack([_lead(cols), np.column_stack([cell.cs, -cell.Ts])
                        if cell.n_strict else np.zeros((0, cols))])
    weak = (np.column_stack([cell.cw, -cell.Tw])
            if cell.n_weak else np.zeros((0, cols)))
    return QuadMatrix(np.vstack([strict, weak]), strict.shape[0])


def _image_rows(T: np.ndarray, c: np.ndarray, law: AffineLaw) -> np.ndarray:
    """Rows of T z' <= c pulled back through z' = (A x + B u + b, u)."""
    d, m = law.d, law.m
    M = np.zeros((d + m, d + m))
    M[:d, :d] = law.A
    M[:d, d:] = law.B
    M[d:, d:] = np.eye(m)
    shift = np.concatenate([law.b, np.zeros(m)])
    return np.column_stack([c - T @ shift, -(T @ M)])


def switch_quadratization(cell_i: Polyhedron, law_i: AffineLaw,
                          cell_j: Polyhedron) -> QuadMatrix:
    """Quadratization of the switch set: z in cell_i whose image lies in cell_j.

    Strict block: leading row, cell_i's strict rows, then cell_j's strict
    rows pulled back through the law.  Weak block: cell_i's weak rows, then
    cell_j's weak rows pulled back.  Rows are kept verbatim; shared input
    bounds therefore appear twice, which changes nothing about the encoded
    set or the products E^T M E it can express.
    """
    if cell_i.dim != cell_j.dim or cell_i.dim != law_i.d + law_i.m:
        raise ModelError("cell and law dimensions disagree")
    cols = 1 + cell_i.dim
    strict_parts = [_lead(cols)]
    if cell_i.n_strict:
        strict_parts.append(np.column_stack([cell_i.cs, -cell_i.Ts]))
    if cell_j.n_strict:
        strict_parts.append(_image_rows(cell_j.Ts, cell_j.cs, law_i))
    weak_parts = []
    if cell_i.n_weak:
        weak_parts.append(np.column_stack([cell_i.cw, -cell_i.Tw]))
    if cell_j.n_weak:
        weak_parts.append(_image_rows(cell_j.Tw, cell_j.cw, law_i))
    strict = np.vstack(strict_parts)
    weak = np.vstack(weak_parts) if weak_parts else np.zeros((0, cols))
    return QuadMatrix(np.vstack([strict, weak]), strict.shape[0])


def init_quadratization(init: Polyhedron, cell: Polyhedron) -> QuadMatrix:
    """Quadratization of init /\\ cell: leading row, both strict blocks
    (init's first), then both weak blocks (init's first)."""
    if init.dim != cell.dim:
        raise ModelError(f"init has dimension {init.dim}, cell has {cell.dim}")
    cols = 1 + init.dim
    strict_parts = [_lead(cols)]
    if init.n_strict:
        strict_parts.append(np.column_stack([init.cs, -init.Ts]))
    if cell.n_strict:
        strict_parts.append(np.column_stack([cell.cs, -cell.Ts]))
    weak_parts = []
    if init.n_weak:
        weak_parts.append(np.column_stack([init.cw, -init.Tw]))
    if cell.n_weak:
        weak_parts.append(np.column_stack([cell.cw, -cell.Tw]))
    strict = np.vstack(strict_parts)
    weak = np.vstack(weak_parts) if weak_parts else np.zeros((0, cols))
    return QuadMatrix(np.vstack([strict, weak]), strict.shape[0])


def step(system: PwaSystem, i: int, x, u) -> np.ndarray:
    """Apply cell i's law: A x + B u + b."""
    if not 0 <= i < system.n_cells:
        raise IndexError(f"cell index {i} out of range for {system.n_cells} cells")
    law = system.laws[i]
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.shape[0] != system.d or u.shape[0] != system.m:
        raise ModelError(f"point has shape ({x.shape[0]},{u.shape[0]}), "
                         f"expected ({system.d},{system.m})")
    return law.A @ x + law.B @ u + law.b


def cell_of(system: PwaSystem, x, u) -> int | None:
    """Index of the unique cell containing (x, u); None if no cell does.

    Raises PartitionError when several cells claim the point, since that
    breaks the partition assumption every downstream result relies on.
    """
    z = np.concatenate([np.asarray(x, dtype=float).reshape(-1),
                        np.asarray(u, dtype=float).reshape(-1)])
    hits = [i for i, cell in enumerate(system.cells) if cell.contains(z)]
    if len(hits) > 1:
        raise PartitionError(f"point {z.tolist()} lies in cells {hits}: not a partition")
    return hits[0] if hits else None


def _mat_list(arr: np.ndarray) -> list:
    return [[float(v) for v in row] for row in arr]


def _vec_list(arr: np.ndarray) -> list:
    return [float(v) for v in arr]


def _poly_json(poly: Polyhedron) -> dict:
    return {"Ts": _mat_list(poly.Ts), "cs": _vec_list(poly.cs),
            "Tw": _mat_list(poly.Tw), "cw": _vec_list(poly.cw)}


def _poly_from_json(obj: dict, dim: int, name: str) -> Polyhedron:
    try:
        Ts = np.asarray(obj.get("Ts", []), dtype=float).reshape(-1, dim) \
            if obj.get("Ts") else np.zeros((0, dim))
        Tw = np.asarray(obj.get("Tw", []), dtype=float).reshape(-1, dim) \
            if obj.get("Tw") else np.zeros((0, dim))
        return Polyhedron(Ts, obj.get("cs", []), Tw, obj.get("cw", []))
    except (ModelError, ValueError, TypeError) as exc:
        raise ModelError(f"bad polyhedron {name!r}: {exc}") from exc


def system_to_json(system: PwaSystem) -> dict:
    """Canonical JSON object: keys d, m, cells, laws, input, init in that order."""
    return {
        "d": system.d,
        "m": system.m,
        "cells": [_poly_json(c) for c in system.cells],
        "laws": [{"A": _mat_list(l.A), "B": _mat_list(l.B), "b": _vec_list(l.b)}
                 for l in system.laws],
        "input": _poly_json(system.input_polytope),
        "init": _poly_json(system.init),
    }


def system_from_json(obj: dict) -> PwaSystem:
    if not isinstance(obj, dict):
        raise ModelError(f"system JSON must be an object, got {type(obj).__name__}")
    for key in ("d", "m", "cells", "laws", "input", "init"):
        if key not in obj:
            raise ModelError(f"system JSON is missing key {key!r}")
    d, m = obj["d"], obj["m"]
    if not isinstance(d, int) or not isinstance(m, int):
        raise ModelError("d and m must be integers")
    n = d + m
    cells = [_poly_from_json(c, n, f"cells[{k}]") for k, c in enumerate(obj["cells"])]
    laws = []
    for k, law in enumerate(obj["laws"]):
        try:
            laws.append(AffineLaw(np.asarray(law["A"], dtype=float).reshape(d, d),
                                  np.asarray(law["B"], dtype=float).reshape(d, m)
                                  if law["B"] else np.zeros((d, m)),
                                  law["b"]))
        except (KeyError, ValueError, TypeError, ModelError) as exc:
            raise ModelError(f"bad law laws[{k}]: {exc}") from exc
    return PwaSystem(d=d, m=m, cells=tuple(cells), laws=tuple(laws),
                     input_polytope=_poly_from_json(obj["input"], m, "input"),
                     init=_poly_from_json(obj["init"], n, "init"))


def load_system(path: str) -> PwaSystem:
    from pwqlyap import jsonio

    try:
        obj = jsonio.read_file(path)
    except ValueError as exc:
        raise ModelError(f"{path}: not valid JSON: {exc}") from exc
    return system_from_json(obj)


def save_system(path: str, system: PwaSystem) -> None:
    from pwqlyap import jsonio

    jsonio.write_file(path, system_to_json(system))
