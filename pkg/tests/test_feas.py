"""LP feasibility layer: Motzkin alternative, switch graph, set checks."""

import numpy as np
import pytest

from pwqlyap import feas, model
from pwqlyap.model import AffineLaw, Polyhedron, PwaSystem

# Fireable switches of the bundled example: only (1,0), (1,2), (2,1) are
# provably impossible.
L_KNOWN = np.ones((4, 4), dtype=bool)
L_KNOWN[1, 0] = L_KNOWN[1, 2] = L_KNOWN[2, 1] = False


def test_lp_feasible_trivial():
    # p >= 0, sum p = 1, 0^T p = 0.
    Aeq = np.array([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
    res = feas.lp_feasible(Aeq, np.array([0.0, 1.0]), np.zeros(3))
    assert res.status == "feasible"
    assert np.max(np.abs(Aeq @ res.point - [0.0, 1.0])) < 1e-8
    assert np.min(res.point) >= -1e-12


def test_lp_infeasible_single_variable():
    # p >= 0, sum p = 1, p_1 = 2 sum p collapses to p_1 = 0 and p_1 = 1.
    Aeq = np.array([[1.0], [-1.0]])
    res = feas.lp_feasible(Aeq, np.array([1.0, 0.0]), np.zeros(1))
    assert res.status == "infeasible"
    assert res.point is None


def test_motzkin_running_pruned_switch(running_system):
    quad = model.switch_quadratization(running_system.cells[1],
                                       running_system.laws[1],
                                       running_system.cells[0])
    status, cert = feas.motzkin_alternative(quad)
    assert status == "feasible"
    assert cert.residual(quad) <= 1e-8
    assert abs(np.sum(cert.p_strict) - 1.0) <= 1e-8
    assert np.min(cert.p_strict) >= -1e-12 and np.min(cert.p_weak) >= -1e-12
    combined = (quad.E[: quad.n_strict].T @ cert.p_strict
                + quad.E[quad.n_strict:].T @ cert.p_weak)
    assert np.max(np.abs(combined)) <= 1e-8


def test_motzkin_nonempty_switch(running_system):
    quad = model.switch_quadratization(running_system.cells[0],
                                       running_system.laws[0],
                                       running_system.cells[0])
    status, cert = feas.motzkin_alternative(quad)
    assert status == "infeasible"
    assert cert is None


def test_switch_fireable_running_golden(running_system):
    assert feas.switch_fireable(running_system, 1, 0) is False
    assert feas.switch_fireable(running_system, 0, 1) is True
    with pytest.raises(IndexError):
        feas.switch_fireable(running_system, 0, 7)


def test_switch_graph_running_golden(running_system, running_graph):
    assert np.array_equal(running_graph.L, L_KNOWN)
    pairs = running_graph.fireable_pairs()
    assert (1, 0) not in pairs and (0, 1) in pairs
    assert len(pairs) == 13


def test_graph_covers_simulated_transitions(running_system, running_graph):
    """Every transition observed along 100k simulated steps is fireable."""
    rng = np.random.default_rng(11)
    observed = set()
    steps_total = 0
    while steps_total < 100_000:
        x = rng.uniform(-9, 9, size=2)
        u = rng.uniform(-3, 3, size=1)
        prev = model.cell_of(running_system, x, u)
        for _ in range(200):
            x = model.step(running_system, prev, x, u)
            u = rng.uniform(-3, 3, size=1)
            steps_total += 1
            cur = model.cell_of(running_system, x, u)
            if cur is None:
                break
            observed.add((prev, cur))
            prev = cur
    assert observed
    for i, j in observed:
        assert running_graph.L[i, j], f"observed switch ({i},{j}) marked unfireable"


def test_cells_disjoint_running(running_system):
    assert feas.cells_disjoint(running_system) == []


def _toy(cells, d=1, m=0, init=None):
    laws = tuple(AffineLaw(A=np.zeros((d, d)), B=np.zeros((d, m)),
                           b=np.zeros(d)) for _ in cells)
    return PwaSystem(d=d, m=m, cells=tuple(cells), laws=laws,
                     input_polytope=Polyhedron.empty_blocks(m),
                     init=init if init is not None else Polyhedron.empty_blocks(d))


def test_cells_disjoint_reports_overlap():
    half = Polyhedron(Ts=np.zeros((0, 1)), cs=np.zeros(0),
                      Tw=np.array([[1.0]]), cw=np.array([1.0]))
    system = _toy([half, half])
    assert feas.cells_disjoint(system) == [(0, 1)]


def test_init_intersects_running_cells(running_system):
    for i in range(running_system.n_cells):
        assert feas.init_intersects_cell(running_system, i) is True


def test_init_misses_far_cell():
    near = Polyhedron(Ts=np.zeros((0, 1)), cs=np.zeros(0),
                      Tw=np.array([[1.0]]), cw=np.array([0.0]))
    far = Polyhedron(Ts=np.array([[-1.0]]), cs=np.array([0.0]),
                     Tw=np.zeros((0, 1)), cw=np.zeros(0))
    init = Polyhedron(Ts=np.zeros((0, 1)), cs=np.zeros(0),
                      Tw=np.array([[1.0], [-1.0]]), cw=np.array([-2.0, 3.0]))
    system = _toy([near, far], init=init)
    # init is [-3, -2]: inside the x <= 0 cell, disjoint from x > 0.
    assert feas.init_intersects_cell(system, 0) is True
    assert feas.init_intersects_cell(system, 1) is False


def test_input_bounded_running(running_system):
    assert feas.input_unbounded_coords(running_system) == []


def test_input_unbounded_coordinate_detected():
    one_sided = Polyhedron(Ts=np.zeros((0, 1)), cs=np.zeros(0),
                           Tw=np.array([[-1.0]]), cw=np.array([1.0]))
    cell = Polyhedron(Ts=np.zeros((0, 2)), cs=np.zeros(0),
                      Tw=np.array([[0.0, -1.0]]), cw=np.array([1.0]))
    law = AffineLaw(A=np.zeros((1, 1)), B=np.zeros((1, 1)), b=np.zeros(1))
    system = PwaSystem(d=1, m=1, cells=(cell,), laws=(law,),
                       input_polytope=one_sided,
                       init=Polyhedron.empty_blocks(2))
    assert feas.input_unbounded_coords(system) == [0]
