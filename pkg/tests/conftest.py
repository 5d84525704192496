"""Shared fixtures: the bundled running example, solved once per session."""

import pathlib

import pytest

from pwqlyap import feas, model, sdp

EXAMPLES = pathlib.Path(__file__).resolve().parent.parent / "examples"


@pytest.fixture(scope="session")
def running_system():
    return model.load_system(str(EXAMPLES / "running.json"))


@pytest.fixture(scope="session")
def running_source():
    return (EXAMPLES / "running.prog").read_text()


@pytest.fixture(scope="session")
def running_graph(running_system):
    return feas.build_switch_graph(running_system)


@pytest.fixture(scope="session")
def running_program(running_system, running_graph):
    return sdp.assemble_program(running_system, running_graph)


@pytest.fixture(scope="session")
def running_solution(running_program):
    solution = sdp.solve(running_program)
    assert solution.status in ("optimal", "near-optimal")
    return solution


@pytest.fixture(scope="session")
def running_cert(running_solution, running_program):
    cert = sdp.extract_certificate(running_solution, running_program)
    assert isinstance(cert, sdp.Certificate)
    return cert
