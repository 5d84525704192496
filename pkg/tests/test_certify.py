"""Certificate-facing analysis: membership, simulation, audit, bounds."""

import numpy as np
import pytest

from pwqlyap import certify, model, sdp
from pwqlyap.model import AffineLaw, Polyhedron, PwaSystem


def _free_cert(n_cells, n, alpha=1.0, beta=4.0):
    zero = np.zeros((n, n))
    return sdp.Certificate(alpha=alpha, beta=beta, eps=0.0,
                           P=tuple(zero for _ in range(n_cells)),
                           q=tuple(np.zeros(n) for _ in range(n_cells)),
                           residuals=())


def _escaping_system():
    """Single bounded strict cell whose law jumps out of it."""
    cell = Polyhedron(Ts=np.array([[1.0], [-1.0]]), cs=np.array([1.0, 1.0]),
                      Tw=np.zeros((0, 1)), cw=np.zeros(0))
    law = AffineLaw(A=np.zeros((1, 1)), B=np.zeros((1, 0)), b=np.array([9.0]))
    init = Polyhedron(Ts=np.zeros((0, 1)), cs=np.zeros(0),
                      Tw=np.array([[1.0], [-1.0]]), cw=np.array([0.5, 0.5]))
    return PwaSystem(d=1, m=0, cells=(cell,), laws=(law,),
                     input_polytope=Polyhedron.empty_blocks(0), init=init)


def test_membership_trivial_cert(running_system):
    cert = _free_cert(4, 3)
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.uniform(-9, 9, size=2)
        u = rng.uniform(-3, 3, size=1)
        assert certify.sublevel_membership(cert, running_system, x, u) is True


def test_membership_monotone_in_alpha(running_system, running_cert):
    rng = np.random.default_rng(1)
    bigger = sdp.Certificate(alpha=running_cert.alpha + 100.0,
                             beta=running_cert.beta, eps=0.0,
                             P=running_cert.P, q=running_cert.q,
                             residuals=running_cert.residuals)
    for _ in range(200):
        x = rng.uniform(-20, 20, size=2)
        u = rng.uniform(-3, 3, size=1)
        if certify.sublevel_membership(running_cert, running_system, x, u):
            assert certify.sublevel_membership(bigger, running_system, x, u)


def test_membership_outside_partition_raises():
    system = _escaping_system()
    cert = _free_cert(1, 1)
    with pytest.raises(ValueError):
        certify.sublevel_membership(cert, system, np.array([5.0]), np.zeros(0))


def test_membership_far_point_excluded(running_system, running_cert):
    # Far outside the norm ball the boundedness block forces V > alpha.
    z = np.array([1e4, 1e4, 0.0])
    i = model.cell_of(running_system, z[:2], z[2:])
    assert running_cert.value(i, z) > running_cert.alpha
    assert certify.sublevel_membership(running_cert, running_system,
                                       z[:2], z[2:]) is False


def test_simulate_linked_by_step(running_system):
    rng = np.random.default_rng(2)
    inputs = rng.uniform(-3, 3, size=(30, 1))
    traj = certify.simulate(running_system, np.array([1.0, 2.0]),
                            inputs, steps=30)
    assert traj.reason == "steps-exhausted"
    assert len(traj) == 30
    for k in range(len(traj) - 1):
        i = int(traj.cells[k])
        assert running_system.cells[i].contains(
            np.concatenate([traj.states[k], traj.inputs[k]]))
        nxt = model.step(running_system, i, traj.states[k], traj.inputs[k])
        assert np.array_equal(traj.states[k + 1], nxt)
        assert np.array_equal(traj.inputs[k], inputs[k])


def test_simulate_policy_forms(running_system):
    x0 = np.array([0.0, 0.0])
    const = certify.simulate(running_system, x0, np.array([1.5]), steps=5)
    assert np.all(const.inputs == 1.5)
    called = certify.simulate(running_system, x0,
                              lambda k, x: np.array([0.1 * k]), steps=5)
    assert np.allclose(called.inputs[:, 0], 0.1 * np.arange(5))
    with pytest.raises(ValueError):
        certify.simulate(running_system, x0, np.zeros((3, 1)), steps=5)


def test_simulate_partition_escape():
    system = _escaping_system()
    traj = certify.simulate(system, np.array([0.0]),
                            certify.constant_policy(np.zeros(0)), steps=10)
    assert traj.reason == "no-containing-cell"
    assert len(traj) == 1


def test_uniform_policy_stays_in_polytope(running_system):
    rng = np.random.default_rng(3)
    policy = certify.uniform_policy(running_system, rng)
    draws = np.array([policy(k, np.zeros(2)) for k in range(200)])
    assert np.all(np.abs(draws) <= 3.0)
    assert draws.std() > 0.5


def test_audit_clean_and_deterministic(running_system, running_cert):
    first = certify.audit(running_cert, running_system, trials=500, steps=20,
                          rng_seed=7)
    second = certify.audit(running_cert, running_system, trials=500, steps=20,
                           rng_seed=7)
    assert first.clean
    assert first.to_json() == second.to_json()
    assert first.points == 500 * 20
    other = certify.audit(running_cert, running_system, trials=500, steps=20,
                          rng_seed=8)
    assert other.max_V_excess != first.max_V_excess


def test_audit_zero_trials(running_system, running_cert):
    report = certify.audit(running_cert, running_system, trials=0, steps=10,
                           rng_seed=0)
    assert report.clean and report.points == 0


def test_audit_flags_corrupted_certificate(running_system, running_cert):
    halved = sdp.Certificate(alpha=running_cert.alpha / 2.0,
                             beta=running_cert.beta, eps=0.0,
                             P=running_cert.P, q=running_cert.q,
                             residuals=running_cert.residuals)
    report = certify.audit(halved, running_system, trials=2000, steps=50,
                           rng_seed=7)
    assert report.sublevel_violations > 0
    assert not report.clean
    assert report.examples
    assert report.max_V_excess > 0


def test_audit_counts_partition_failures():
    system = _escaping_system()
    cert = _free_cert(1, 1, alpha=1.0, beta=100.0)
    report = certify.audit(cert, system, trials=100, steps=5, rng_seed=0)
    assert report.partition_failures == 100
    assert not report.clean


def test_state_bounds(running_cert):
    bounds = certify.state_bounds(running_cert)
    root = float(np.sqrt(running_cert.beta))
    assert bounds.shape == (3, 2)
    assert np.allclose(bounds[:, 0], -root)
    assert np.allclose(bounds[:, 1], root)
