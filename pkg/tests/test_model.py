"""Data model: homogenization, quadratization matrices, stepping, JSON."""

import numpy as np
import pytest

from pwqlyap import model
from pwqlyap.model import AffineLaw, ModelError, PartitionError, Polyhedron, PwaSystem

# Known quadratization of the bundled example's second cell's switch into
# the first (strict block first, weak block second; no row deduplication).
E21_KNOWN = np.array([
    [1.0, 0.0, 0.0, 0.0],
    [5.0, 9.0, -7.0, -6.0],
    [-58.0, 3.3662, -2.1732, 1.1084],
    [-68.0, 0.8532, -2.5748, 10.446],
    [-4.0, -4.0, 8.0, -8.0],
    [3.0, 0.0, 0.0, -1.0],
    [3.0, 0.0, 0.0, 1.0],
    [3.0, 0.0, 0.0, -1.0],
    [3.0, 0.0, 0.0, 1.0],
])


def _random_system(rng, d=2, m=1):
    """Single-cell system with random rows, for sampling-based checks."""
    n = d + m
    cell = Polyhedron(Ts=rng.normal(size=(2, n)), cs=rng.normal(size=2),
                      Tw=rng.normal(size=(2, n)), cw=rng.normal(size=2))
    law = AffineLaw(A=rng.normal(size=(d, d)), B=rng.normal(size=(d, m)),
                    b=rng.normal(size=d))
    return cell, law


def test_homogenize_running_law(running_system):
    F = model.homogenize(running_system.laws[0], 2, 1).F
    expected = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.4217, 0.1077, 0.5661],
        [-1.0, 0.1162, 0.2785, 0.2235],
        [0.0, 0.0, 0.0, 1.0],
    ])
    assert np.array_equal(F, expected)


def test_homogenize_matches_affine_action():
    rng = np.random.default_rng(0)
    for _ in range(50):
        d, m = int(rng.integers(1, 4)), int(rng.integers(0, 3))
        law = AffineLaw(A=rng.normal(size=(d, d)), B=rng.normal(size=(d, m)),
                        b=rng.normal(size=d))
        F = model.homogenize(law, d, m).F
        x, u = rng.normal(size=d), rng.normal(size=m)
        lifted = F @ np.concatenate([[1.0], x, u])
        direct = np.concatenate([[1.0], law.A @ x + law.B @ u + law.b, u])
        assert np.max(np.abs(lifted - direct)) < 1e-12


def test_cell_quadratization_running_first_cell(running_system):
    quad = model.cell_quadratization(running_system.cells[0])
    expected = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [5.0, 9.0, -7.0, -6.0],
        [4.0, 4.0, -8.0, 8.0],
        [3.0, 0.0, 0.0, -1.0],
        [3.0, 0.0, 0.0, 1.0],
    ])
    assert quad.n_strict == 3
    assert np.array_equal(quad.E, expected)


def test_switch_quadratization_running_two_to_one(running_system):
    quad = model.switch_quadratization(running_system.cells[1],
                                       running_system.laws[1],
                                       running_system.cells[0])
    assert quad.n_strict == 4
    assert quad.E.shape == (9, 4)
    assert np.allclose(quad.E, E21_KNOWN, atol=1e-12)


def test_switch_rows_match_independent_builder():
    rng = np.random.default_rng(1)
    for _ in range(20):
        d, m = int(rng.integers(1, 4)), int(rng.integers(0, 3))
        cell_i, law = _random_system(rng, d, m)
        cell_j, _ = _random_system(rng, d, m)
        quad = model.switch_quadratization(cell_i, law, cell_j)
        # Row-by-row reconstruction straight from the definition.
        G = np.zeros((d + m, d + m))
        G[:d, :d] = law.A
        G[:d, d:] = law.B
        G[d:, d:] = np.eye(m)
        shift = np.concatenate([law.b, np.zeros(m)])
        rows = [np.concatenate([[1.0], np.zeros(d + m)])]
        for T, c in ((cell_i.Ts, cell_i.cs),):
            for k in range(T.shape[0]):
                rows.append(np.concatenate([[c[k]], -T[k]]))
        for T, c in ((cell_j.Ts, cell_j.cs),):
            for k in range(T.shape[0]):
                rows.append(np.concatenate([[c[k] - T[k] @ shift], -T[k] @ G]))
        n_strict = len(rows)
        for k in range(cell_i.Tw.shape[0]):
            rows.append(np.concatenate([[cell_i.cw[k]], -cell_i.Tw[k]]))
        for k in range(cell_j.Tw.shape[0]):
            rows.append(np.concatenate([[cell_j.cw[k] - cell_j.Tw[k] @ shift],
                                        -cell_j.Tw[k] @ G]))
        assert quad.n_strict == n_strict
        assert np.max(np.abs(quad.E - np.array(rows))) < 1e-12


def test_cell_quadratization_sign_semantics():
    rng = np.random.default_rng(2)
    cell, _ = _random_system(rng)
    quad = model.cell_quadratization(cell)
    for _ in range(500):
        z = rng.normal(size=3) * 2.0
        lifted = quad.E @ np.concatenate([[1.0], z])
        by_rows = bool(np.all(lifted[: quad.n_strict] > 0)
                       and np.all(lifted[quad.n_strict:] >= 0))
        assert by_rows == cell.contains(z)


def test_switch_quadratization_sign_semantics():
    rng = np.random.default_rng(3)
    # Offsets >= 1 keep the origin's neighborhood inside both cells, so the
    # sampled switch set is nonempty.
    cell_i = Polyhedron(Ts=rng.normal(size=(2, 3)), cs=1.0 + rng.uniform(size=2),
                        Tw=rng.normal(size=(2, 3)), cw=1.0 + rng.uniform(size=2))
    cell_j = Polyhedron(Ts=rng.normal(size=(2, 3)), cs=1.0 + rng.uniform(size=2),
                        Tw=rng.normal(size=(2, 3)), cw=1.0 + rng.uniform(size=2))
    law = AffineLaw(A=0.3 * rng.normal(size=(2, 2)), B=0.3 * rng.normal(size=(2, 1)),
                    b=0.1 * rng.normal(size=2))
    quad = model.switch_quadratization(cell_i, law, cell_j)
    hits = 0
    for _ in range(2000):
        z = rng.normal(size=3) * 2.0
        x, u = z[:2], z[2:]
        image = np.concatenate([law.A @ x + law.B @ u + law.b, u])
        member = cell_i.contains(z) and cell_j.contains(image)
        lifted = quad.E @ np.concatenate([[1.0], z])
        by_rows = bool(np.all(lifted[: quad.n_strict] > 0)
                       and np.all(lifted[quad.n_strict:] >= 0))
        assert by_rows == member
        hits += member
    assert hits > 0


def test_init_quadratization_running_row_count(running_system):
    quad = model.init_quadratization(running_system.init,
                                     running_system.cells[0])
    # 1 leading + 0 init strict + 2 cell strict + 6 init weak + 2 cell weak.
    assert quad.E.shape == (11, 4)
    assert quad.n_strict == 3


def test_step_matches_containing_law(running_system):
    rng = np.random.default_rng(4)
    for _ in range(200):
        x = rng.uniform(-9, 9, size=2)
        u = rng.uniform(-3, 3, size=1)
        i = model.cell_of(running_system, x, u)
        assert i is not None
        law = running_system.laws[i]
        expected = law.A @ x + law.B @ u + law.b
        assert np.array_equal(model.step(running_system, i, x, u), expected)
    with pytest.raises(IndexError):
        model.step(running_system, 7, np.zeros(2), np.zeros(1))


def test_cell_of_reports_overlap():
    cell = Polyhedron(Ts=np.zeros((0, 1)), cs=np.zeros(0),
                      Tw=np.array([[1.0]]), cw=np.array([5.0]))
    law = AffineLaw(A=np.array([[0.5]]), B=np.zeros((1, 0)), b=np.zeros(1))
    system = PwaSystem(d=1, m=0, cells=(cell, cell), laws=(law, law),
                       input_polytope=Polyhedron.empty_blocks(0),
                       init=Polyhedron.empty_blocks(1))
    with pytest.raises(PartitionError):
        model.cell_of(system, np.array([0.0]), np.zeros(0))
    assert model.cell_of(system, np.array([6.0]), np.zeros(0)) is None


def test_polyhedron_validation():
    with pytest.raises(ModelError):
        Polyhedron(Ts=np.zeros((1, 2)), cs=np.zeros(2),
                   Tw=np.zeros((0, 2)), cw=np.zeros(0))
    with pytest.raises(ModelError):
        Polyhedron(Ts=np.zeros((1, 2)), cs=np.zeros(1),
                   Tw=np.zeros((1, 3)), cw=np.zeros(1))
    poly = Polyhedron.empty_blocks(2)
    with pytest.raises(ModelError):
        poly.contains(np.zeros(3))


def test_affine_law_validation():
    with pytest.raises(ModelError):
        AffineLaw(A=np.zeros((2, 3)), B=np.zeros((2, 1)), b=np.zeros(2))
    with pytest.raises(ModelError):
        AffineLaw(A=np.zeros((2, 2)), B=np.zeros((1, 1)), b=np.zeros(2))


def test_system_json_roundtrip(running_system, tmp_path):
    path = tmp_path / "sys.json"
    model.save_system(str(path), running_system)
    loaded = model.load_system(str(path))
    assert loaded.d == running_system.d and loaded.m == running_system.m
    for a, b in zip(loaded.cells, running_system.cells):
        assert np.array_equal(a.Ts, b.Ts) and np.array_equal(a.cs, b.cs)
        assert np.array_equal(a.Tw, b.Tw) and np.array_equal(a.cw, b.cw)
    for a, b in zip(loaded.laws, running_system.laws):
        assert np.array_equal(a.A, b.A) and np.array_equal(a.B, b.B)
        assert np.array_equal(a.b, b.b)
    assert np.array_equal(loaded.init.Tw, running_system.init.Tw)


def test_arrays_are_frozen(running_system):
    with pytest.raises(ValueError):
        running_system.cells[0].Ts[0, 0] = 99.0
