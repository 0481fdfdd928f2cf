"""Numeric optimal USD for any number of states and any Berry phase.

The feasible set ``{alpha : G - diag(alpha) >= 0, alpha >= 0}`` is a
spectrahedron in the diagonal variables, so a primal log-det barrier method
with Newton centering solves it directly:

    minimize  -q.alpha - mu * (log det(G - diag(alpha)) + sum_j log(alpha_j))

for a decreasing sequence of ``mu``. On the central path the barrier
gradient supplies a dual certificate ``Z = mu (G - diag alpha)^-1``,
``lambda = mu / alpha`` with duality gap ``2 d mu``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .analytic import AlphaVector, make_alpha, success_prob
from .ensemble import DualBasis, StateEnsemble, dual_basis
from .errors import ConvergenceError, InfeasibleError

MAX_STATES = 12
MU_START = 1.0
MU_FACTOR = 5.0
GAP_TOL = 1e-9
KKT_TOL = 1e-6
NEWTON_TOL = 1e-12  # on the scale-free decrement lambda^2 / mu
GRAD_TOL = 1e-12
MAX_CENTERING = 100
MAX_NEWTON = 2000
INIT_FRACTION = 0.5


@dataclass(frozen=True)
class SolverReport:
    alpha_star: AlphaVector
    p_success: float
    iterations: int
    duality_gap: float
    surface_gap: float
    kkt_residual: float
    mu: float
    converged: bool = True

    def to_json(self) -> dict:
        return {
            "alpha_star": self.alpha_star.alphas,
            "feasible": self.alpha_star.feasible,
            "f_value": self.alpha_star.f_value,
            "p_success": self.p_success,
            "iterations": self.iterations,
            "duality_gap": self.duality_gap,
            "surface_gap": self.surface_gap,
            "kkt_residual": self.kkt_residual,
            "mu": self.mu,
            "converged": self.converged,
        }


def _slack_inverse(gram: np.ndarray, alpha: np.ndarray) -> np.ndarray | None:
    """``(G - diag alpha)^-1`` or None when the slack is not positive definite."""
    s = gram - np.diag(alpha)
    try:
        chol = np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        return None
    linv = np.linalg.inv(chol)
    return linv.conj().T @ linv


def barrier_value(gram: np.ndarray, priors: np.ndarray, alpha: np.ndarray, mu: float) -> float:
    if np.any(alpha <= 0):
        return np.inf
    try:
        chol = np.linalg.cholesky(gram - np.diag(alpha))
    except np.linalg.LinAlgError:
        return np.inf
    logdet = 2.0 * np.log(np.diag(chol).real).sum()
    return float(-priors @ alpha - mu * (logdet + np.log(alpha).sum()))


def barrier_gradient(gram: np.ndarray, priors: np.ndarray, alpha: np.ndarray, mu: float) -> np.ndarray:
    sinv = _slack_inverse(gram, alpha)
    if sinv is None or np.any(alpha <= 0):
        raise ValueError("alpha is not strictly feasible")
    return -priors + mu * (np.diag(sinv).real - 1.0 / alpha)


def barrier_hessian(gram: np.ndarray, alpha: np.ndarray, mu: float) -> np.ndarray:
    sinv = _slack_inverse(gram, alpha)
    if sinv is None or np.any(alpha <= 0):
        raise ValueError("alpha is not strictly feasible")
    return mu * (np.abs(sinv) ** 2 + np.diag(1.0 / alpha**2))


def _centering(gram, q, alpha, mu, budget):
    """Damped Newton on the barrier for fixed ``mu``. Returns (alpha, steps, grad)."""
    steps = 0
    while True:
        sinv = _slack_inverse(gram, alpha)
        grad = -q + mu * (np.diag(sinv).real - 1.0 / alpha)
        hess = mu * (np.abs(sinv) ** 2 + np.diag(1.0 / alpha**2))
        step = -np.linalg.solve(hess, grad)
        decrement = float(-grad @ step)
        if (
            decrement / mu <= NEWTON_TOL
            or np.abs(grad).max() <= GRAD_TOL
            or steps >= min(budget, MAX_CENTERING)
        ):
            return alpha, steps, grad
        t = 1.0
        f0 = barrier_value(gram, q, alpha, mu)
        while True:
            trial = alpha + t * step
            ft = barrier_value(gram, q, trial, mu)
            # Second clause tolerates rounding once the decrease is below float resolution.
            if ft <= f0 - 0.25 * t * decrement or (np.isfinite(ft) and t * decrement < 1e-15 * (1 + abs(f0))):
                break
            t *= 0.5
            if t < 1e-20:
                return alpha, steps, grad
        alpha = trial
        steps += 1


def _kkt(gram, q, alpha, mu) -> tuple[float, float]:
    sinv = _slack_inverse(gram, alpha)
    z = mu * sinv
    lam = mu / alpha
    stationarity = float(np.abs(q - np.diag(z).real + lam).max())
    gap = float(2 * len(alpha) * mu)
    return stationarity, gap


def solve_gram(gram: np.ndarray, priors: Sequence[float]) -> SolverReport:
    """Maximize ``q.alpha`` over the convex set of a positive definite Gram matrix."""
    g = np.asarray(gram, dtype=complex)
    g = 0.5 * (g + g.conj().T)
    q = np.asarray(priors, dtype=float)
    d = g.shape[0]
    if d > MAX_STATES:
        raise ValueError(f"solver supports at most {MAX_STATES} states, got {d}")
    lam_min = float(np.linalg.eigvalsh(g).min())
    if lam_min <= 0:
        raise InfeasibleError("Gram matrix is singular; states linearly dependent")
    # alpha = c*1 is strictly interior for any 0 < c < lambda_min(G).
    alpha = np.full(d, INIT_FRACTION * lam_min)
    mu = MU_START
    total = 0
    best = None  # last iterate whose centering met the stationarity tolerance
    converged = False
    while True:
        alpha, steps, grad = _centering(g, q, alpha, mu, MAX_NEWTON - total)
        total += steps
        stationarity, gap = _kkt(g, q, alpha, mu)
        if stationarity < KKT_TOL:
            best = (alpha, mu, stationarity, gap)
            if gap < GAP_TOL:
                converged = True
                break
        elif best is not None and best[3] < KKT_TOL:
            # Rounding in (G - diag alpha)^-1 stops further centering; keep the
            # last certified iterate (its gap still bounds the P_s error).
            converged = True
            break
        if total >= MAX_NEWTON:
            break
        mu /= MU_FACTOR
    if best is not None and (converged or best[3] < gap):
        alpha, mu, stationarity, gap = best
    av = make_alpha(g, alpha)
    report = SolverReport(
        alpha_star=av,
        p_success=success_prob(av, q),
        iterations=total,
        duality_gap=gap,
        surface_gap=abs(av.f_value),
        kkt_residual=max(stationarity, gap),
        mu=mu,
        converged=converged,
    )
    if not converged:
        raise ConvergenceError(f"barrier solver did not converge in {MAX_NEWTON} Newton steps", report)
    return report


def solve_optimal_alpha(ensemble: StateEnsemble) -> SolverReport:
    return solve_gram(ensemble.gram(), ensemble.priors)


@dataclass(frozen=True)
class UsdPovm:
    alpha: AlphaVector
    dual: DualBasis
    elements: np.ndarray  # (d, n, n) conclusive elements
    inconclusive: np.ndarray  # (n, n)
    min_inconclusive_eigenvalue: float = field(default=0.0)

    def all_elements(self) -> list[np.ndarray]:
        return [*self.elements, self.inconclusive]

    def outcome_matrix(self, ensemble: StateEnsemble) -> np.ndarray:
        """``P[x, y] = <psi_x|M_y|psi_x>`` with the inconclusive outcome last."""
        ops = self.all_elements()
        psi = ensemble.states
        return np.array([[float(np.real(p.conj() @ m @ p)) for m in ops] for p in psi])


def build_povm(ensemble: StateEnsemble, alpha: Sequence[float] | AlphaVector) -> UsdPovm:
    a = np.asarray(alpha.alphas if isinstance(alpha, AlphaVector) else alpha, dtype=float)
    if a.shape != (ensemble.num_states,):
        raise ValueError("alpha length does not match the number of states")
    if np.any(a < -1e-12):
        raise InfeasibleError("M_? not PSD: negative alpha")
    dual = dual_basis(ensemble)
    n = ensemble.dimension
    elements = np.array([aj * np.outer(v, v.conj()) for aj, v in zip(a, dual.vectors)])
    inconclusive = np.eye(n) - elements.sum(axis=0)
    inconclusive = 0.5 * (inconclusive + inconclusive.conj().T)
    lam = float(np.linalg.eigvalsh(inconclusive).min())
    if lam < -1e-9:
        raise InfeasibleError(f"M_? not PSD (smallest eigenvalue {lam:.3e})")
    return UsdPovm(make_alpha(ensemble.gram(), a), dual, elements, inconclusive, lam)


def _principal_minor(s: np.ndarray, j: int) -> complex:
    keep = [i for i in range(s.shape[0]) if i != j]
    if not keep:
        return 1.0
    return np.linalg.det(s[np.ix_(keep, keep)])


def surface_gradient(gram: np.ndarray, alpha: Sequence[float]) -> np.ndarray:
    """``d det(G - diag alpha) / d alpha_j`` = minus the j-th principal cofactor."""
    s = np.asarray(gram, dtype=complex) - np.diag(np.asarray(alpha, dtype=float))
    return np.array([-_principal_minor(s, j).real for j in range(s.shape[0])])


def kkt_check(
    gram: np.ndarray,
    priors: Sequence[float],
    alpha: Sequence[float] | AlphaVector,
    *,
    boundary_tol: float = 1e-7,
    surface_tol: float = 1e-6,
) -> float:
    """Tangency residual of a claimed surface solution.

    ``max_{j<k} |q_j df/da_k - q_k df/da_j|`` divided by
    ``max(1, |grad f|_inf) * |q|_inf``. The gradient of ``f`` vanishes at the
    rank-one vertex, where the residual is zero as it should be.
    """
    g = gram.gram if hasattr(gram, "gram") else np.asarray(gram, dtype=complex)
    a = np.asarray(alpha.alphas if isinstance(alpha, AlphaVector) else alpha, dtype=float)
    q = np.asarray(priors, dtype=float)
    if np.any(a <= boundary_tol):
        raise InfeasibleError("KKT ratio test inapplicable; boundary solution (some alpha_j = 0)")
    f = float(np.linalg.det(g - np.diag(a)).real)
    if abs(f) > surface_tol:
        raise InfeasibleError(f"KKT ratio test inapplicable; alpha is not on the surface (f = {f:.3e})")
    grad = surface_gradient(g, a)
    worst = max((abs(q[j] * grad[k] - q[k] * grad[j]) for j, k in combinations(range(len(a)), 2)), default=0.0)
    scale = max(1.0, float(np.abs(grad).max())) * max(float(np.abs(q).max()), 1e-300)
    return float(worst / scale)
