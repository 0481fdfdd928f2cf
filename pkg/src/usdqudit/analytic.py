"""Closed-form optimal USD weights for two states and for zero-Berry-phase qutrits.

A weight vector ``alpha`` describes the conclusive POVM elements
``alpha_j |psi~_j><psi~_j|``; it is admissible iff ``G - diag(alpha)`` is
positive semidefinite.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .ensemble import GramData, StateEnsemble, gram_data_from_matrix
from .errors import ClosedFormUnavailableError, InfeasibleError

PSD_TOL = 1e-10
BOX_TOL = 1e-12
BERRY_TOL = 1e-9
TIE_TOL = 1e-12


def _as_gram(gram: GramData | np.ndarray) -> np.ndarray:
    return gram.gram if isinstance(gram, GramData) else np.asarray(gram, dtype=complex)


@dataclass(frozen=True)
class AlphaVector:
    alphas: np.ndarray
    feasible: bool
    f_value: float

    def __len__(self) -> int:
        return len(self.alphas)


def in_convex_set(gram: GramData | np.ndarray, alpha: Sequence[float] | AlphaVector) -> tuple[bool, float]:
    """PSD test of ``G - diag(alpha)``; returns ``(feasible, det)``."""
    g = _as_gram(gram)
    a = np.asarray(alpha.alphas if isinstance(alpha, AlphaVector) else alpha, dtype=float)
    if a.shape != (g.shape[0],):
        raise ValueError(f"alpha has length {a.size}, Gram matrix is {g.shape[0]}x{g.shape[0]}")
    s = g - np.diag(a)
    lam_min = float(np.linalg.eigvalsh(s).min())
    f_value = float(np.linalg.det(s).real)
    return lam_min >= -PSD_TOL, f_value


def make_alpha(gram: GramData | np.ndarray, alphas: Sequence[float]) -> AlphaVector:
    """Wrap ``alphas`` with its feasibility flag and determinant value."""
    a = np.asarray(alphas, dtype=float).copy()
    psd, f_value = in_convex_set(gram, a)
    in_box = bool(np.all(a >= -BOX_TOL) and np.all(a <= 1 + BOX_TOL))
    a.setflags(write=False)
    return AlphaVector(a, bool(psd and in_box and np.all(np.isfinite(a))), f_value)


def success_prob(alpha: Sequence[float] | AlphaVector, priors: Sequence[float]) -> float:
    a = np.asarray(alpha.alphas if isinstance(alpha, AlphaVector) else alpha, dtype=float)
    q = np.asarray(priors, dtype=float)
    if a.shape != q.shape:
        raise ValueError(f"alpha length {a.size} does not match {q.size} priors")
    return float(q @ a)


def pairwise_conditions(gram: GramData | np.ndarray, alpha: Sequence[float]) -> dict[tuple[int, int], float]:
    """2x2 principal minors ``(1-a_j)(1-a_k) - |G_jk|^2``; all must be >= 0."""
    g = _as_gram(gram)
    a = np.asarray(alpha, dtype=float)
    return {
        (j, k): float((g[j, j].real - a[j]) * (g[k, k].real - a[k]) - abs(g[j, k]) ** 2)
        for j, k in combinations(range(g.shape[0]), 2)
    }


def f3_cubic(gram: GramData | np.ndarray, alpha: Sequence[float]) -> float:
    """Explicit determinant of ``G - diag(alpha)`` for three states.

    (1-a1)(1-a2)(1-a3) - s1^2 (1-a1) - s2^2 (1-a2) - s3^2 (1-a3)
        + 2 s1 s2 s3 cos(Phi)
    """
    gd = gram if isinstance(gram, GramData) else gram_data_from_matrix(gram)
    if gd.magnitudes is None:
        raise ValueError("f3_cubic needs a 3x3 Gram matrix")
    s1, s2, s3 = gd.magnitudes
    u1, u2, u3 = 1.0 - np.asarray(alpha, dtype=float)
    return float(
        u1 * u2 * u3 - s1**2 * u1 - s2**2 * u2 - s3**2 * u3 + 2 * s1 * s2 * s3 * np.cos(gd.berry_phase)
    )


def idp_alpha(s: float, priors: Sequence[float]) -> np.ndarray:
    """Optimal two-state weights for overlap magnitude ``s``."""
    q1, q2 = (float(x) for x in priors)
    if not 0 <= s < 1:
        raise InfeasibleError(f"overlap magnitude s={s} must lie in [0, 1); identical states cannot be discriminated")
    if s == 0:
        return np.array([1.0, 1.0])
    if q1 > 0 and q2 > 0:
        r = np.sqrt(q2 / q1)
        if s <= r <= 1 / s:
            return np.array([1 - r * s, 1 - s / r])
    # Boundary regime: conclusively identify only the likelier state.
    if q1 >= q2:
        return np.array([1 - s * s, 0.0])
    return np.array([0.0, 1 - s * s])


def idp_optimal_2(ensemble: StateEnsemble) -> AlphaVector:
    if ensemble.num_states != 2:
        raise ValueError("idp_optimal_2 needs exactly two states")
    g = ensemble.gram()
    return make_alpha(g, idp_alpha(abs(g[0, 1]), ensemble.priors))


@dataclass(frozen=True)
class SurfaceCandidate:
    kind: str  # "first" or "second"
    permutation: tuple[int, int, int] | None  # (x, y, z), 0-based, second type only
    alpha: AlphaVector | None  # None when the formula is undefined
    p_success: float | None
    note: str = ""

    @property
    def usable(self) -> bool:
        return self.alpha is not None and self.alpha.feasible


@dataclass(frozen=True)
class SurfaceSolutionSet:
    candidates: tuple[SurfaceCandidate, ...]

    def feasible(self) -> list[SurfaceCandidate]:
        return [c for c in self.candidates if c.usable]

    def best(self) -> SurfaceCandidate:
        """Feasible candidate with the largest success probability.

        Ties within 1e-12 go to the first-type solution.
        """
        feas = self.feasible()
        if not feas:
            raise InfeasibleError("no feasible surface solution; the optimum lies on a face alpha_j = 0")
        top = max(c.p_success for c in feas)
        for c in feas:
            if c.p_success >= top - TIE_TOL:
                return c  # candidates are ordered first-type first
        raise AssertionError("unreachable")


def surface_solutions_3(gram: GramData | np.ndarray, priors: Sequence[float]) -> SurfaceSolutionSet:
    """All four zero-Berry-phase surface candidates, flagged rather than filtered."""
    gd = gram if isinstance(gram, GramData) else gram_data_from_matrix(gram)
    if gd.magnitudes is None:
        raise ValueError("surface solutions need exactly three states")
    if abs(gd.berry_phase) > BERRY_TOL:
        raise ClosedFormUnavailableError(
            f"analytic surface solutions unavailable (Berry phase {gd.berry_phase:.6g} != 0); use solver"
        )
    q = np.asarray(priors, dtype=float)
    s = np.asarray(gd.magnitudes, dtype=float)
    out: list[SurfaceCandidate] = []

    if np.all(s == 0):
        a = make_alpha(gd, np.ones(3))
        out.append(SurfaceCandidate("first", None, a, success_prob(a, q)))
    elif np.any(s == 0):
        out.append(SurfaceCandidate("first", None, None, None, "undefined: zero overlap magnitude in denominator"))
    else:
        u = np.array([s[1] * s[2] / s[0], s[0] * s[2] / s[1], s[0] * s[1] / s[2]])
        a = make_alpha(gd, 1 - u)
        out.append(SurfaceCandidate("first", None, a, success_prob(a, q)))

    rq = np.sqrt(q)
    for x in range(3):
        y, z = (i for i in range(3) if i != x)
        if np.any(rq == 0):
            out.append(SurfaceCandidate("second", (x, y, z), None, None, "undefined: zero prior in denominator"))
            continue
        u = np.empty(3)
        u[x] = (rq[y] * s[z] + rq[z] * s[y]) / rq[x]
        u[y] = (rq[x] * s[z] - rq[z] * s[x]) / rq[y]
        u[z] = (rq[x] * s[y] - rq[y] * s[x]) / rq[z]
        a = make_alpha(gd, 1 - u)
        out.append(SurfaceCandidate("second", (x, y, z), a, success_prob(a, q)))
    return SurfaceSolutionSet(tuple(out))

