"""Projective realizations of USD measurements on an enlarged space.

States are embedded by zero padding: a vector in C^n becomes the first ``n``
coordinates of C^(n + d_ext). A detection vector has the form

    D_j  ~  (psi~_j, a_j)

where ``a_j`` lives in the ``d_ext`` appended coordinates. Orthogonality of
the ``D_j`` then reads ``<psi~_j|psi~_k> + <a_j|a_k> = 0`` and the conclusive
probability of state ``j`` is ``1 / (<psi~_j|psi~_j> + |a_j|^2)``.

Routes provided here:

* :func:`realize_povm` builds the dilation of any admissible weight vector
  from an eigendecomposition (complex coefficients, minimal ``d_ext``);
* :func:`extend_2` and :func:`extend_3_closed_form` are the closed forms for
  two and three states;
* :func:`extend_general` searches real coefficients with penalized Powell
  restarts, and :func:`min_extension_dim` sweeps ``d_ext`` with it.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import least_squares, minimize

from .analytic import AlphaVector
from .ensemble import LgTripleParams, StateEnsemble, dual_vectors, gram_matrix
from .errors import ClosedFormUnavailableError, InfeasibleError
from .solver import SolverReport, solve_optimal_alpha

log = logging.getLogger(__name__)

ORTHO_TOL = 1e-10
CONSTRAINT_TOL = 1e-8
ALPHA_FLOOR = 1e-7
RANK_TOL = 1e-8
PENALTY_WEIGHTS = (1e2, 1e3, 1e4, 1e5, 1e6, 1e7)


def embed(states: np.ndarray, total_dim: int) -> np.ndarray:
    states = np.atleast_2d(np.asarray(states, dtype=complex))
    out = np.zeros((states.shape[0], total_dim), dtype=complex)
    out[:, : states.shape[1]] = states
    return out


def gauge_fix(vectors: np.ndarray) -> np.ndarray:
    """Rotate each row so its largest-magnitude coordinate is real positive.

    Zero rows are left alone.
    """
    v = np.array(vectors, dtype=complex)
    for row in v:
        k = int(np.argmax(np.abs(row)))
        if abs(row[k]) > 0:
            row *= np.conj(row[k]) / abs(row[k])
    return v


def _lowdin(rows: np.ndarray) -> np.ndarray:
    """Symmetric orthonormalization; the closest orthonormal set to ``rows``."""
    m = rows.conj() @ rows.T
    w, v = np.linalg.eigh(m)
    inv_sqrt = (v * w**-0.5) @ v.conj().T
    return inv_sqrt.conj() @ rows


@dataclass(frozen=True)
class ProjectiveMeasurement:
    """Orthonormal measurement on C^(state_dim + d_ext).

    Row ``j`` of ``detection`` identifies state ``j``; an all-zero row marks an
    outcome that never fires (its weight is zero). ``completion`` spans the
    rest of the space and is pooled into the inconclusive outcome.
    """

    state_dim: int
    d_ext: int
    detection: np.ndarray
    completion: np.ndarray

    @property
    def total_dim(self) -> int:
        return self.state_dim + self.d_ext

    @property
    def active(self) -> np.ndarray:
        return np.linalg.norm(self.detection, axis=1) > 0

    def basis(self) -> np.ndarray:
        return np.vstack([self.detection[self.active], self.completion])

    def orthonormality_error(self) -> float:
        b = self.basis()
        return float(np.abs(b.conj() @ b.T - np.eye(b.shape[0])).max())

    def amplitudes(self, ensemble: StateEnsemble) -> np.ndarray:
        """``A[x, y] = <D_y|psi_x>`` over detection vectors."""
        psi = embed(ensemble.states, self.total_dim)
        return psi @ self.detection.conj().T

    def unambiguity_error(self, ensemble: StateEnsemble) -> float:
        p = np.abs(self.amplitudes(ensemble)) ** 2
        np.fill_diagonal(p, 0.0)
        return float(p.max())

    def conclusive_probs(self, ensemble: StateEnsemble) -> np.ndarray:
        return np.abs(np.diag(self.amplitudes(ensemble))) ** 2

    def p_success(self, ensemble: StateEnsemble) -> float:
        return float(ensemble.priors @ self.conclusive_probs(ensemble))

    def to_json(self) -> dict:
        return {
            "state_dim": self.state_dim,
            "d_ext": self.d_ext,
            "total_dim": self.total_dim,
            "detection": self.detection,
            "completion": self.completion,
        }


def _finish(state_dim: int, detection: np.ndarray) -> ProjectiveMeasurement:
    """Orthonormalize (if needed), gauge-fix and complete a detection set."""
    detection = np.asarray(detection, dtype=complex)
    total = detection.shape[1]
    active = np.linalg.norm(detection, axis=1) > 0
    rows = detection[active]
    if rows.size:
        err = np.abs(rows.conj() @ rows.T - np.eye(rows.shape[0])).max()
        if err > 1e-14:
            rows = _lowdin(rows)
        detection = detection.copy()
        detection[active] = gauge_fix(rows)
        completion = null_space(detection[active].conj()).T
    else:
        completion = np.eye(total, dtype=complex)
    completion = gauge_fix(completion)
    return ProjectiveMeasurement(state_dim, total - state_dim, detection, completion)


def _alpha_array(alpha: Sequence[float] | AlphaVector) -> np.ndarray:
    return np.asarray(alpha.alphas if isinstance(alpha, AlphaVector) else alpha, dtype=float)


def extension_matrix(ensemble: StateEnsemble, alpha: Sequence[float] | AlphaVector) -> tuple[np.ndarray, np.ndarray]:
    """``C = I - A^1/2 G~ A^1/2`` on the active outcomes, and the active mask.

    ``C`` is the Gram matrix the appended coordinates must reproduce. It is
    PSD exactly when ``alpha`` is admissible.
    """
    a = _alpha_array(alpha).copy()
    a[a < ALPHA_FLOOR] = 0.0
    active = a > 0
    dual = dual_vectors(ensemble.states)[active]
    r = np.sqrt(a[active])
    c = np.eye(int(active.sum())) - r[:, None] * gram_matrix(dual) * r[None, :]
    return 0.5 * (c + c.conj().T), active


def required_extension_dim(ensemble: StateEnsemble, alpha: Sequence[float] | AlphaVector, rank_tol: float = RANK_TOL) -> int:
    """Numerical rank of :func:`extension_matrix`: the fewest appended dimensions."""
    c, _ = extension_matrix(ensemble, alpha)
    if c.size == 0:
        return 0
    return int((np.linalg.eigvalsh(c) > rank_tol).sum())


def realize_povm(
    ensemble: StateEnsemble, alpha: Sequence[float] | AlphaVector, rank_tol: float = RANK_TOL
) -> ProjectiveMeasurement:
    """Exact dilation of the USD POVM with weights ``alpha``.

    Weights below ``ALPHA_FLOOR`` are dropped (lowering a weight keeps it
    admissible). Appended coordinates come from ``C = V W V^H``:
    ``a_j = conj(V[j]) * sqrt(W)`` over eigenvalues above ``rank_tol``.
    """
    c, active = extension_matrix(ensemble, alpha)
    a = _alpha_array(alpha)
    n, d = ensemble.dimension, ensemble.num_states
    if c.size == 0:
        return _finish(n, np.zeros((d, n), dtype=complex))
    w, v = np.linalg.eigh(c)
    if w.min() < -1e-9:
        raise InfeasibleError(f"alpha outside the convex set (extension Gram eigenvalue {w.min():.3e})")
    keep = w > rank_tol
    ext = v[:, keep].conj() * np.sqrt(w[keep])[None, :]
    total = n + int(keep.sum())
    dual = dual_vectors(ensemble.states)
    detection = np.zeros((d, total), dtype=complex)
    idx = np.flatnonzero(active)
    detection[idx, :n] = np.sqrt(a[idx])[:, None] * dual[idx]
    detection[idx, n:] = ext
    return _finish(n, detection)


def synthesize(ensemble: StateEnsemble) -> tuple[ProjectiveMeasurement, SolverReport]:
    """Optimal USD measurement as an explicit projective measurement."""
    report = solve_optimal_alpha(ensemble)
    return realize_povm(ensemble, report.alpha_star), report


def _real_gauge(states: np.ndarray) -> np.ndarray:
    """Rephase states ``k >= 1`` so that ``<psi_0|psi_k>`` is real nonnegative."""
    states = np.array(states, dtype=complex)
    g = gram_matrix(states)
    for k in range(1, states.shape[0]):
        if abs(g[0, k]) > 0:
            states[k] *= np.exp(-1j * np.angle(g[0, k]))
    return states


def extend_2(ensemble: StateEnsemble) -> ProjectiveMeasurement:
    """Closed-form optimal projective measurement for two qubit states."""
    if ensemble.num_states != 2 or ensemble.dimension != 2:
        raise ValueError("extend_2 needs two states of dimension 2")
    states = _real_gauge(ensemble.states)
    s = float(abs(gram_matrix(states)[0, 1]))
    if s >= 1:
        raise InfeasibleError("identical states (s = 1) cannot be discriminated")
    q1, q2 = (float(x) for x in ensemble.priors)
    dual = dual_vectors(states)
    if s < 1e-15:
        return _finish(2, states)
    r = np.sqrt(q2 / q1) if q1 > 0 else np.inf
    if q1 > 0 and q2 > 0 and s < r < 1 / s:
        mu_sq = np.sqrt(s**2 * q1 * q2 / (q1 - s**2 * q2) ** 2) - s**2 * (q1 - q2) / (
            (1 - s**2) * (q1 - s**2 * q2)
        )
        mu = np.sqrt(mu_sq)
        nu = s / ((1 - s**2) * mu)
        detection = np.zeros((2, 3), dtype=complex)
        detection[:, :2] = dual
        detection[:, 2] = (mu, nu)
        detection /= np.linalg.norm(detection, axis=1)[:, None]
        return _finish(2, detection)
    keep = 0 if r <= s else 1
    detection = np.zeros((2, 2), dtype=complex)
    detection[keep] = dual[keep] / np.linalg.norm(dual[keep])
    return _finish(2, detection)


@dataclass(frozen=True)
class Extension3Coefficients:
    kappa: float
    a: np.ndarray  # (a1, a2, a3)
    dual_overlaps: np.ndarray  # <psi~_1|psi~_2>, <psi~_1|psi~_3>, <psi~_2|psi~_3>
    gamma: float | None = None
    lambda_: float | None = None
    omega: float | None = None


def extend_3_closed_form(
    ensemble: StateEnsemble, params: LgTripleParams | None = None
) -> tuple[ProjectiveMeasurement, Extension3Coefficients]:
    """Four-dimensional measurement for three qutrit states via ``kappa``.

    Realizes the first-type surface weights. Requires real dual-basis
    overlaps (after rephasing) with ``-g12 g13 / g23 >= 0``.
    """
    if ensemble.num_states != 3 or ensemble.dimension != 3:
        raise ValueError("extend_3_closed_form needs three states of dimension 3")
    states = _real_gauge(ensemble.states)
    dual = dual_vectors(states)
    gt = gram_matrix(dual)
    off = np.array([gt[0, 1], gt[0, 2], gt[1, 2]])
    if np.abs(off.imag).max() > 1e-12:
        raise ClosedFormUnavailableError(
            "closed-form extension inapplicable (complex dual-basis overlaps, nonzero Berry phase); use extend_general"
        )
    g12, g13, g23 = off.real
    if min(abs(g12), abs(g13), abs(g23)) < 1e-14:
        raise ClosedFormUnavailableError(
            "closed-form extension inapplicable (vanishing dual-basis overlap); use extend_general"
        )
    radicand = -g12 * g13 / g23
    if radicand < 0:
        raise ClosedFormUnavailableError(
            f"closed-form extension inapplicable (kappa radicand {radicand:.6g} < 0); use extend_general"
        )
    kappa = float(np.sqrt(radicand))
    a = np.array([kappa, kappa * g23 / g13, kappa * g23 / g12])
    detection = np.zeros((3, 4), dtype=complex)
    detection[:, :3] = dual
    detection[:, 3] = a
    detection /= np.linalg.norm(detection, axis=1)[:, None]
    gamma = lam = omega = None
    if params is not None:
        lg = lg_coefficients(params)
        gamma, lam, omega = lg.gamma, lg.lambda_, lg.omega
    coeffs = Extension3Coefficients(kappa, a, off.real, gamma, lam, omega)
    return _finish(3, detection), coeffs


@dataclass(frozen=True)
class LgCoefficients:
    gamma: float
    gamma_mirror: float  # gamma with theta and phi exchanged; used by D3
    lambda_: float
    omega: float
    omega_radicand: float


def _gamma(theta: float, phi: float, xi: float) -> float:
    ct, cp = 1 / np.tan(theta / 2), 1 / np.tan(phi / 2)
    sec2, csc2 = 1 / np.cos(xi) ** 2, 1 / np.sin(xi) ** 2
    return cp * sec2 - ct * csc2 + ct**2 * cp * csc2 * sec2


def lg_coefficients(params: LgTripleParams, simplified: bool = False) -> LgCoefficients:
    """Gamma, Lambda, Omega of the explicit LG measurement vectors.

    ``simplified=True`` uses the closed forms specialised to theta = 2pi/3,
    xi = pi/3 and insists on those angles.
    """
    th, ph, xi = params.theta, params.phi, params.xi
    cp = 1 / np.tan(ph / 2)
    if simplified:
        if abs(th - 2 * np.pi / 3) > 1e-12 or abs(xi - np.pi / 3) > 1e-12:
            raise ValueError("simplified coefficients need theta = 2pi/3 and xi = pi/3")
        r3 = np.sqrt(3.0)
        gamma = 4 / 9 * (13 * cp - r3)
        gamma_m = 4 / r3 - 4 / 3 * cp + 16 / (3 * r3) * cp**2
        lam = 4 * cp / (3 * r3) - 1
        num = 9 - 42 * r3 * cp + 51 * cp**2 - 52 * r3 * cp**3
        den = 4 * r3 * cp - 9
        if den == 0:
            raise ClosedFormUnavailableError("Omega undefined (Lambda = 0)")
        radicand = 4 / 9 * num / den
    else:
        ct = 1 / np.tan(th / 2)
        sec2, csc2, cot2 = 1 / np.cos(xi) ** 2, 1 / np.sin(xi) ** 2, 1 / np.tan(xi) ** 2
        gamma = _gamma(th, ph, xi)
        gamma_m = _gamma(ph, th, xi)
        lam = -1 + ct * cp * csc2
        if lam == 0:
            raise ClosedFormUnavailableError("Omega undefined (Lambda = 0)")
        radicand = -(
            sec2 * (cp * (1 + ct**2 * csc2) - ct * cot2) * (ct * (1 + cp**2 * csc2) - cp * cot2)
        ) / lam
    if radicand < 0:
        raise ClosedFormUnavailableError(f"Omega radicand {radicand:.6g} < 0; closed form undefined at these angles")
    return LgCoefficients(float(gamma), float(gamma_m), float(lam), float(np.sqrt(radicand)), float(radicand))


def lg_closed_form_vectors(params: LgTripleParams, simplified: bool = False) -> tuple[np.ndarray, LgCoefficients]:
    """Normalized, gauge-fixed D1, D2, D3 in (l0, l1, l2, l3) from Gamma/Lambda/Omega.

    D3 is the image of D2 under l1 -> -l1 with theta and phi exchanged, so it
    carries ``gamma_mirror`` and cot(theta/2).
    """
    c = lg_coefficients(params, simplified)
    th, ph, xi = params.theta, params.phi, params.xi
    ct, cp = 1 / np.tan(th / 2), 1 / np.tan(ph / 2)
    sec, csc = 1 / np.cos(xi), 1 / np.sin(xi)
    g, gm, lam, om = c.gamma, c.gamma_mirror, c.lambda_, c.omega
    vecs = np.array(
        [
            [(1 + ct * cp) * sec, (cp - ct) * sec, (1 - ct * cp) * csc, om],
            [g * cp * sec, -g * sec, -g * cp * csc, lam * om * sec**2],
            [gm * ct * sec, gm * sec, -gm * ct * csc, lam * om * sec**2],
        ],
        dtype=complex,
    )
    vecs /= np.linalg.norm(vecs, axis=1)[:, None]
    return gauge_fix(vecs), c


@dataclass(frozen=True)
class ExtensionCoefficients:
    a: np.ndarray  # (d, d_ext) real
    constraint_residual: float


def _restart_task(args) -> tuple[float, float, np.ndarray]:
    """One penalized-Powell run followed by a least-squares constraint polish."""
    gt_off, gdiag, q, d_ext, seed = args
    d = len(q)
    iu = np.triu_indices(d, 1)
    target = gt_off[iu]
    rng = np.random.default_rng(seed)
    scale = np.sqrt(max(np.abs(target).mean(), 1e-3))
    x = rng.normal(scale=scale, size=d * d_ext)

    def residual(x):
        a = x.reshape(d, d_ext)
        return target + (a @ a.T)[iu]

    def p_succ(x):
        a = x.reshape(d, d_ext)
        return float(np.sum(q / (gdiag + np.einsum("ij,ij->i", a, a))))

    for w in PENALTY_WEIGHTS:
        res = minimize(
            lambda x: -p_succ(x) + w * float(residual(x) @ residual(x)),
            x,
            method="Powell",
            options={"xtol": 1e-8, "ftol": 1e-12, "maxfev": 20000},
        )
        x = res.x
    method = "lm" if len(target) >= x.size else "trf"
    x = least_squares(residual, x, method=method, xtol=1e-15, ftol=1e-15, gtol=1e-15).x
    return p_succ(x), float(np.abs(residual(x)).max()), x


def default_restarts(d: int) -> int:
    return 50 if d <= 4 else 200


def _dual_real(ensemble: StateEnsemble) -> np.ndarray:
    dual = dual_vectors(_real_gauge(ensemble.states))
    gt = gram_matrix(dual)
    if np.abs(gt.imag).max() > 1e-12:
        raise InfeasibleError(
            "complex dual-basis overlaps cannot be cancelled by real extension coefficients; use realize_povm"
        )
    return gt.real


def extend_general(
    ensemble: StateEnsemble,
    d_ext: int,
    restarts: int | None = None,
    rng_seed: int = 0,
    workers: int = 1,
) -> tuple[ProjectiveMeasurement, ExtensionCoefficients, float]:
    """Best real extension coefficients with ``d_ext`` appended dimensions.

    Each restart minimizes ``-P_s + w * |constraint residual|^2`` with Powell
    while ``w`` ramps over ``PENALTY_WEIGHTS``, then solves the constraints by
    least squares from there. The feasible restart with the largest ``P_s``
    wins (lowest index on ties). Restart ``i`` is seeded with child ``i`` of
    ``SeedSequence(rng_seed)``, so results do not depend on ``workers``.
    """
    if d_ext < 0:
        raise ValueError("d_ext must be nonnegative")
    gt = _dual_real(ensemble)
    q = np.asarray(ensemble.priors, dtype=float)
    d, n = ensemble.num_states, ensemble.dimension
    states = _real_gauge(ensemble.states)
    dual = dual_vectors(states)
    gdiag = np.diag(gt).copy()
    off = gt - np.diag(gdiag)

    if d_ext == 0:
        worst = float(np.abs(off).max()) if d > 1 else 0.0
        if worst > CONSTRAINT_TOL:
            raise InfeasibleError(
                f"extension dimension too small: d_ext = 0 leaves dual-basis overlap {worst:.3e} uncancelled"
            )
        detection = dual / np.linalg.norm(dual, axis=1)[:, None]
        pm = _finish(n, detection)
        return pm, ExtensionCoefficients(np.zeros((d, 0)), worst), float(np.sum(q / gdiag))

    restarts = default_restarts(d) if restarts is None else restarts
    seeds = np.random.SeedSequence(rng_seed).spawn(restarts)
    tasks = [(off, gdiag, q, d_ext, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_restart_task, tasks, chunksize=max(1, restarts // (4 * workers))))
    else:
        results = [_restart_task(t) for t in tasks]

    best = None
    for p, resid, x in results:
        if resid <= CONSTRAINT_TOL and (best is None or p > best[0]):
            best = (p, resid, x)
    if best is None:
        raise InfeasibleError(
            f"extension dimension too small: no feasible coefficients with d_ext = {d_ext} after {restarts} restarts"
        )
    p, resid, x = best
    a = x.reshape(d, d_ext)
    detection = np.zeros((d, n + d_ext), dtype=complex)
    detection[:, :n] = dual
    detection[:, n:] = a
    detection /= np.linalg.norm(detection, axis=1)[:, None]
    return _finish(n, detection), ExtensionCoefficients(a, resid), float(p)


@dataclass(frozen=True)
class ExtensionSweep:
    state_dim: int
    num_states: int
    p_optimal: float
    curve: tuple[tuple[int, float | None], ...]  # (d_ext, best P_s or None if infeasible)
    d_ext_min: int | None
    tol: float
    capped: bool

    @property
    def total_dim(self) -> int | None:
        return None if self.d_ext_min is None else self.state_dim + self.d_ext_min

    def gap(self, d_ext: int) -> float:
        """``P_opt - P_s(d_ext)``; infinite where no feasible extension was found."""
        for k, p in self.curve:
            if k == d_ext:
                return np.inf if p is None else self.p_optimal - p
        raise KeyError(d_ext)


def min_extension_dim(
    ensemble: StateEnsemble,
    tol: float = 1e-4,
    restarts: int | None = None,
    rng_seed: int = 0,
    cap: int | None = None,
    workers: int = 1,
) -> ExtensionSweep:
    """Smallest ``d_ext`` whose best real extension reaches the POVM optimum within ``tol``.

    The sweep stops at the first success; otherwise it ends at the cap
    ``d(d+1)/2 - n`` appended dimensions (total dimension d(d+1)/2).
    """
    d, n = ensemble.num_states, ensemble.dimension
    p_opt = solve_optimal_alpha(ensemble).p_success
    cap = max(d * (d + 1) // 2 - n, 0) if cap is None else cap
    curve: list[tuple[int, float | None]] = []
    found = None
    for k in range(cap + 1):
        try:
            _, _, p = extend_general(ensemble, k, restarts, rng_seed, workers)
        except InfeasibleError:
            p = None
        curve.append((k, p))
        log.info("d=%d d_ext=%d P_s=%s (optimum %.9f)", d, k, p, p_opt)
        if p is not None and p_opt - p < tol:
            found = k
            break
    return ExtensionSweep(n, d, float(p_opt), tuple(curve), found, tol, found is None)
