"""Shared fixtures."""

from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp

from kvbeam.fem import AssembledPencil, assemble
from kvbeam.model import MotionKind, TransmissionConfig


def small_pencil(M, K, D=None, kind=MotionKind.LONGITUDINAL) -> AssembledPencil:
    """Pencil from explicit (dense) matrices, without a mesh."""
    M = sp.csr_matrix(np.atleast_2d(np.asarray(M, float)))
    K = sp.csr_matrix(np.atleast_2d(np.asarray(K, float)))
    D = sp.csr_matrix(M.shape) if D is None else sp.csr_matrix(np.atleast_2d(np.asarray(D, float)))
    return AssembledPencil(M, K, D, kind)


@pytest.fixture(scope="session")
def default_config() -> TransmissionConfig:
    return TransmissionConfig.default()


@pytest.fixture(scope="session")
def weak_interface_config() -> TransmissionConfig:
    """Transversal interface hypothesis violated: q2 < q1 at l."""
    return TransmissionConfig.uniform(q1=1.0, q2=0.5)


@pytest.fixture(scope="session")
def long_pencil_64(default_config) -> AssembledPencil:
    return assemble(default_config, MotionKind.LONGITUDINAL, 64)


@pytest.fixture(scope="session")
def trans_pencil_32(default_config) -> AssembledPencil:
    return assemble(default_config, MotionKind.TRANSVERSAL, 32)


# Acceptance verdict lines, echoed in the terminal summary so they survive
# output capturing.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
