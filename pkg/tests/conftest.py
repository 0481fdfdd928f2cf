"""Shared oracles. Each one is independent of the code under test."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import sqrtm

from acceptance_registry import RESULTS


def cvx_optimum(gram: np.ndarray, priors) -> tuple[float, np.ndarray]:
    """Optimal USD weights from a generic SDP solver."""
    cp = pytest.importorskip("cvxpy")
    d = gram.shape[0]
    a = cp.Variable(d)
    g = np.asarray(gram, dtype=complex)
    cons = [g - cp.diag(a) >> 0, a >= 0]
    prob = cp.Problem(cp.Maximize(np.asarray(priors) @ a), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value), np.asarray(a.value)


def grid_optimum_2(s: float, priors, n: int = 200) -> float:
    """Best q.alpha over an n x n grid of [0,1]^2 restricted to the feasible set."""
    x = np.linspace(0, 1, n)
    a1, a2 = np.meshgrid(x, x, indexing="ij")
    ok = (a1 <= 1) & (a2 <= 1) & ((1 - a1) * (1 - a2) >= s * s)
    return float(np.max(np.where(ok, priors[0] * a1 + priors[1] * a2, -1)))


def srm_error(states: np.ndarray, priors) -> float:
    """Error probability of the (weighted) square-root measurement."""
    q = np.asarray(priors, dtype=float)
    psi = np.asarray(states, dtype=complex)
    w = np.sqrt(q)[:, None] * psi
    g = w.conj() @ w.T
    root = sqrtm(g)
    return float(1 - np.sum(np.abs(np.diag(root)) ** 2))


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: (int(k.split(".")[0]), k)):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
