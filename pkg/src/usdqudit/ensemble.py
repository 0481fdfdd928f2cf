"""Discrimination instances: pure-state ensembles, Gram data and dual bases.

Index convention for qutrit overlaps: with (j, k, l) a cyclic permutation of
(1, 2, 3),

    <psi_j|psi_k> = s_l * exp(i * zeta_l)

so ``s_l`` is the overlap magnitude between the two states whose indices
differ from ``l``, and the anticyclic entries are the complex conjugates.
The Berry phase is ``zeta_1 + zeta_2 + zeta_3`` (wrapped to (-pi, pi]), which
equals ``arg(G_12 G_23 G_31)`` and is invariant under rephasing the states.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import NotDiscriminableError
from .serialize import complex_from_json, complex_to_json

NORM_TOL = 1e-12
PRIOR_TOL = 1e-12
INDEPENDENCE_TOL = 1e-10

# 0-based (j, k) pair whose overlap magnitude is s_l, for l = 0, 1, 2 (cyclic order).
CYCLIC_PAIRS = ((1, 2), (2, 0), (0, 1))


def gram_matrix(states: np.ndarray) -> np.ndarray:
    """``G[j, k] = <psi_j|psi_k>`` for row-stacked state vectors."""
    states = np.asarray(states, dtype=complex)
    return states.conj() @ states.T


def _check_independent(gram: np.ndarray) -> float:
    lam_min = float(np.linalg.eigvalsh(gram).min())
    if lam_min <= INDEPENDENCE_TOL:
        raise NotDiscriminableError(
            "ensemble not USD-discriminable: states linearly dependent "
            f"(smallest Gram eigenvalue {lam_min:.3e} <= {INDEPENDENCE_TOL:g})"
        )
    return lam_min


@dataclass(frozen=True)
class StateEnsemble:
    """``d`` pure states of dimension ``n`` with prior probabilities.

    ``states`` is stored row-wise with shape ``(d, n)``. Construction validates
    normalization, priors and linear independence, and raises on the first
    violation.
    """

    states: np.ndarray
    priors: np.ndarray
    min_gram_eigenvalue: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        states = np.array(self.states, dtype=complex)
        if states.ndim != 2 or states.shape[0] < 1 or states.shape[1] < 1:
            raise ValueError(f"states must be a non-empty (d, n) array, got shape {states.shape}")
        priors = np.array(self.priors, dtype=float)
        d, n = states.shape
        if priors.shape != (d,):
            raise ValueError(f"expected {d} priors, got shape {priors.shape}")
        if d > n:
            raise NotDiscriminableError(
                f"ensemble not USD-discriminable: states linearly dependent ({d} states in dimension {n})"
            )
        norms = np.linalg.norm(states, axis=1)
        for j, nrm in enumerate(norms):
            if abs(nrm - 1.0) > NORM_TOL:
                raise ValueError(f"state {j} is not normalized (norm {nrm:.15g})")
        if not np.all(np.isfinite(priors)) or np.any(priors < 0):
            raise ValueError("priors must be finite and nonnegative")
        if abs(priors.sum() - 1.0) > PRIOR_TOL:
            raise ValueError(f"priors must sum to 1 (sum {priors.sum():.15g})")
        lam_min = _check_independent(gram_matrix(states))
        states.setflags(write=False)
        priors.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "min_gram_eigenvalue", lam_min)

    @property
    def num_states(self) -> int:
        return self.states.shape[0]

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    def gram(self) -> np.ndarray:
        return gram_matrix(self.states)

    def with_priors(self, priors: Sequence[float]) -> "StateEnsemble":
        return StateEnsemble(self.states, np.asarray(priors, dtype=float))

    def to_json(self) -> dict[str, Any]:
        return {
            "dimension": self.dimension,
            "states": complex_to_json(self.states),
            "priors": [float(q) for q in self.priors],
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "StateEnsemble":
        for key in ("dimension", "states", "priors"):
            if key not in obj:
                raise ValueError(f"ensemble JSON missing key {key!r}")
        states = complex_from_json(obj["states"])
        if states.ndim != 2:
            raise ValueError("'states' must be a list of state vectors")
        if states.shape[1] != int(obj["dimension"]):
            raise ValueError(
                f"state length {states.shape[1]} does not match dimension {obj['dimension']}"
            )
        return cls(states, np.asarray(obj["priors"], dtype=float))


def load_ensemble(path: str | Path) -> StateEnsemble:
    with open(path) as fh:
        return StateEnsemble.from_json(json.load(fh))


@dataclass(frozen=True)
class LgTripleParams:
    """Angles of the Laguerre-Gaussian qutrit family (radians).

    The physical domain is the open box 0 < xi < pi/2, 0 < theta, phi < pi.
    Closed-box endpoints are accepted so that degenerate members can be
    reported as non-discriminable by :func:`lg_triple` instead of rejected
    as malformed.
    """

    xi: float
    theta: float
    phi: float

    def __post_init__(self) -> None:
        eps = 1e-15
        if not (-eps <= self.xi <= np.pi / 2 + eps):
            raise ValueError(f"xi={self.xi} outside [0, pi/2]")
        for name in ("theta", "phi"):
            v = getattr(self, name)
            if not (-eps <= v <= np.pi + eps):
                raise ValueError(f"{name}={v} outside [0, pi]")

    @property
    def interior(self) -> bool:
        return 0 < self.xi < np.pi / 2 and 0 < self.theta < np.pi and 0 < self.phi < np.pi


def lg_triple_states(params: LgTripleParams) -> np.ndarray:
    """The three real qutrit states in the (l0, l1, l2) basis, row-stacked."""
    c, s = np.cos(params.xi), np.sin(params.xi)
    th, ph = params.theta, params.phi
    return np.array(
        [
            [c, 0.0, s],
            [c * np.cos(th), c * np.sin(th), s],
            [c * np.cos(ph), -c * np.sin(ph), s],
        ],
        dtype=complex,
    )


def lg_triple(params: LgTripleParams, priors: Sequence[float]) -> StateEnsemble:
    return StateEnsemble(lg_triple_states(params), np.asarray(priors, dtype=float))


@dataclass(frozen=True)
class GramData:
    gram: np.ndarray
    magnitudes: np.ndarray | None = None
    phases: np.ndarray | None = None
    berry_phase: float | None = None

    @property
    def num_states(self) -> int:
        return self.gram.shape[0]


def _wrap(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    w = float(np.angle(np.exp(1j * angle)))
    return np.pi if np.isclose(w, -np.pi, atol=1e-14) else w


def gram_data_from_matrix(gram: np.ndarray) -> GramData:
    gram = np.array(gram, dtype=complex)
    gram.setflags(write=False)
    if gram.shape != (3, 3):
        return GramData(gram)
    entries = np.array([gram[j, k] for j, k in CYCLIC_PAIRS])
    mags = np.abs(entries)
    phases = np.where(mags > 0, np.angle(entries), 0.0)
    berry = _wrap(float(phases.sum()))
    return GramData(gram, mags, phases, berry)


def gram_data(ensemble: StateEnsemble) -> GramData:
    return gram_data_from_matrix(ensemble.gram())


def gram_from_qutrit_overlaps(magnitudes: Sequence[float], phases: Sequence[float] = (0, 0, 0)) -> np.ndarray:
    """Inverse of :func:`gram_data` for d=3: build G from (s_l, zeta_l)."""
    g = np.eye(3, dtype=complex)
    for (j, k), s, z in zip(CYCLIC_PAIRS, magnitudes, phases):
        g[j, k] = s * np.exp(1j * z)
        g[k, j] = np.conj(g[j, k])
    return g


@dataclass(frozen=True)
class DualBasis:
    vectors: np.ndarray  # (d, n), row j is the reciprocal vector of state j

    def gram(self) -> np.ndarray:
        """``<psi~_j|psi~_k>``; equals the inverse state Gram matrix."""
        return gram_matrix(self.vectors)


def dual_vectors(states: np.ndarray) -> np.ndarray:
    """Reciprocal vectors with ``<psi~_j|psi_k> = delta_jk``.

    ``psi~_j = sum_k conj(Ginv[j, k]) psi_k``. For real Gram matrices this is
    the usual ``sum_k Ginv[j, k] psi_k``.
    """
    states = np.asarray(states, dtype=complex)
    g = gram_matrix(states)
    _check_independent(g)
    ginv = np.linalg.inv(g)
    ginv = 0.5 * (ginv + ginv.conj().T)
    return ginv.conj() @ states


def dual_basis(ensemble: StateEnsemble) -> DualBasis:
    return DualBasis(dual_vectors(ensemble.states))


def ensemble_from_gram(gram: np.ndarray, priors: Sequence[float]) -> StateEnsemble:
    """States in dimension d whose Gram matrix is ``gram`` (Cholesky factor rows)."""
    gram = np.asarray(gram, dtype=complex)
    _check_independent(gram)
    chol = np.linalg.cholesky(gram)
    states = chol.conj()
    # Cholesky rows have unit norm only up to rounding; renormalize.
    states = states / np.linalg.norm(states, axis=1)[:, None]
    return StateEnsemble(states, np.asarray(priors, dtype=float))


def pattern_gram(d: int, big: float = 0.3, small: float = 0.1) -> np.ndarray:
    """Real Gram matrix with overlap ``big`` on the anti-diagonal and the last
    row/column, ``small`` elsewhere (1-based indices j, k)."""
    g = np.eye(d)
    for j in range(1, d + 1):
        for k in range(1, d + 1):
            if j == k:
                continue
            hit = (j + k == d + 1) or (j == d and k < d) or (j < d and k == d)
            g[j - 1, k - 1] = big if hit else small
    return g


def pattern_ensemble(d: int, priors: Sequence[float] | None = None) -> StateEnsemble:
    if priors is None:
        priors = np.full(d, 1.0 / d)
    return ensemble_from_gram(pattern_gram(d), priors)


def orthonormal_ensemble(d: int, priors: Sequence[float] | None = None) -> StateEnsemble:
    if priors is None:
        priors = np.full(d, 1.0 / d)
    return StateEnsemble(np.eye(d, dtype=complex), np.asarray(priors, dtype=float))


def random_ensemble(
    d: int,
    n: int | None = None,
    rng: np.random.Generator | None = None,
    *,
    real: bool = False,
    priors: Sequence[float] | None = None,
    min_eigenvalue: float = 1e-3,
) -> StateEnsemble:
    """Haar-random pure states (rejection-sampled for a well-conditioned Gram).

    Priors are Dirichlet(1) draws unless given.
    """
    rng = np.random.default_rng() if rng is None else rng
    n = d if n is None else n
    while True:
        x = rng.normal(size=(d, n))
        if not real:
            x = x + 1j * rng.normal(size=(d, n))
        x = x / np.linalg.norm(x, axis=1)[:, None]
        if np.linalg.eigvalsh(gram_matrix(x)).min() > min_eigenvalue:
            break
    q = rng.dirichlet(np.ones(d)) if priors is None else np.asarray(priors, dtype=float)
    q = q / q.sum()
    return StateEnsemble(x, q)
