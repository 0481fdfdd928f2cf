"""Minimum-error discrimination, the baseline that USD is compared against."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import StateEnsemble
from .errors import ConvergenceError, InfeasibleError

MESD_TOL = 1e-10
MAX_ITER = 100_000
CERT_TOL = 1e-7


def helstrom_overlap(s: float, priors) -> float:
    """Minimum error for two pure states with overlap magnitude ``s``."""
    q1, q2 = (float(x) for x in priors)
    return float(0.5 * (1 - np.sqrt(max(0.0, 1 - 4 * q1 * q2 * s * s))))


def helstrom_2(ensemble: StateEnsemble) -> float:
    if ensemble.num_states != 2:
        raise ValueError("helstrom_2 needs exactly two states")
    return helstrom_overlap(abs(ensemble.gram()[0, 1]), ensemble.priors)


def _inv_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w.min() <= 0:
        raise InfeasibleError("operator not positive definite on the state span")
    return (v * w**-0.5) @ v.conj().T


@dataclass(frozen=True)
class MesdResult:
    p_error: float
    povm: np.ndarray  # (d, n, n), sums to the identity on C^n
    iterations: int
    last_change: float
    certificate_min_eigenvalue: float  # min_j lambda_min(Y - q_j rho_j); >= 0 at the optimum
    certificate_hermiticity: float  # max |Y - Y^H|
    converged: bool

    @property
    def p_success(self) -> float:
        return 1.0 - self.p_error

    def to_json(self) -> dict:
        return {
            "p_error": self.p_error,
            "p_success": self.p_success,
            "iterations": self.iterations,
            "last_change": self.last_change,
            "certificate_min_eigenvalue": self.certificate_min_eigenvalue,
            "certificate_hermiticity": self.certificate_hermiticity,
            "converged": self.converged,
            "povm": self.povm,
        }


def mesd_bound(ensemble: StateEnsemble, tol: float = MESD_TOL, max_iter: int = MAX_ITER) -> MesdResult:
    """Minimum error probability by the iterative maximum-likelihood fixed point.

    Works in an orthonormal basis of the span of the states, where the
    weighted states ``rho~_j = q_j |v_j><v_j|`` have full-rank sum. The
    update is ``Pi_j <- R^-1/2 rho~_j Pi_j rho~_j R^-1/2`` with
    ``R = sum_j rho~_j Pi_j rho~_j``, started from the pretty-good
    measurement. When the change grows between steps the update is damped
    with factor 1/2. Optimality is certified through ``Y = sum_j q_j rho_j Pi_j``:
    every ``Y - q_j rho_j`` must be PSD.
    """
    q = np.asarray(ensemble.priors, dtype=float)
    psi = ensemble.states
    d, n = psi.shape
    basis, _ = np.linalg.qr(psi.T)  # (n, d) columns span the states
    v = psi @ basis.conj()  # v[j, a] = <b_a|psi_j>
    rho = np.einsum("ja,jb->jab", v, v.conj())
    rho_w = q[:, None, None] * rho

    s_inv = _inv_sqrt(rho_w.sum(axis=0))
    pi = np.einsum("ab,jbc,cd->jad", s_inv, rho_w, s_inv)
    damping = 1.0
    prev_change = np.inf
    change = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        t = np.einsum("jab,jbc,jcd->jad", rho_w, pi, rho_w)
        r_inv = _inv_sqrt(t.sum(axis=0))
        new = np.einsum("ab,jbc,cd->jad", r_inv, t, r_inv)
        new = 0.5 * (new + np.conj(np.transpose(new, (0, 2, 1))))
        if damping < 1.0:
            new = (1 - damping) * pi + damping * new
        change = float(np.abs(new - pi).max())
        if change > prev_change and damping == 1.0:
            damping = 0.5
        pi, prev_change = new, change
        if change < tol:
            break

    p_succ = float(np.einsum("jab,jba->", rho_w, pi).real)
    y = np.einsum("jab,jbc->ac", rho_w, pi)
    herm = float(np.abs(y - y.conj().T).max())
    y = 0.5 * (y + y.conj().T)
    cert = min(float(np.linalg.eigvalsh(y - rw).min()) for rw in rho_w)

    # Lift back to C^n; the orthogonal complement of the span goes to outcome 0.
    full = np.einsum("ia,jab,kb->jik", basis, pi, basis.conj())
    full[0] += np.eye(n) - basis @ basis.conj().T
    converged = change < tol and cert >= -CERT_TOL and herm <= 1e-8
    result = MesdResult(1.0 - p_succ, full, it, change, cert, herm, converged)
    if not converged:
        raise ConvergenceError(
            f"MESD iteration did not converge (change {change:.3e}, certificate {cert:.3e})", result
        )
    return result
