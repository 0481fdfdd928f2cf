"""Photon-counting simulation of the projective USD measurement.

Each (prepared state, outcome) cell of a count table is an independent
Poisson variable with mean ``mean_total * P(outcome | state)``. Random
streams are derived from ``numpy.random.SeedSequence`` so any seeded run is
reproducible bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .ensemble import LgTripleParams, StateEnsemble, lg_triple
from .mesd import mesd_bound
from .naimark import ProjectiveMeasurement, embed, gauge_fix, synthesize

log = logging.getLogger(__name__)

DEFAULT_MEAN_TOTAL = 1e4
DEFAULT_REPETITIONS = 1000
ROW_SUM_TOL = 1e-8

# Prior sets used for the LG sweep, keyed by label.
DEFAULT_PRIOR_SETS: dict[str, tuple[float, float, float]] = {
    "uniform": (1 / 3, 1 / 3, 1 / 3),
    "5/12,7/24,7/24": (5 / 12, 7 / 24, 7 / 24),
    "1/2,1/4,1/4": (1 / 2, 1 / 4, 1 / 4),
}


@dataclass(frozen=True)
class OutcomeDistribution:
    """``probs[x, y]``: probability of outcome ``y`` given state ``x``.

    Columns ``0..d-1`` are the detection outcomes, column ``d`` is the pooled
    inconclusive outcome. Rows sum to one.
    """

    probs: np.ndarray
    priors: np.ndarray

    @property
    def p_success(self) -> float:
        return float(self.priors @ np.diag(self.probs[:, :-1]))

    @property
    def p_error(self) -> float:
        conclusive = self.probs[:, :-1]
        return float(self.priors @ (conclusive.sum(axis=1) - np.diag(conclusive)))

    @property
    def p_fail(self) -> float:
        return float(self.priors @ self.probs[:, -1])


def outcome_probs(
    measurement: ProjectiveMeasurement, ensemble: StateEnsemble, noise: float = 0.0
) -> OutcomeDistribution:
    """Born-rule outcome table, optionally after depolarizing the embedded state.

    With ``noise = eps`` each of the ``N`` basis vectors gains ``eps / N``
    while the ideal probabilities are scaled by ``1 - eps``; the completion
    vectors then contribute ``eps * m / N`` to the inconclusive column.
    """
    if not 0 <= noise <= 1:
        raise ValueError("noise must lie in [0, 1]")
    total = measurement.total_dim
    psi = embed(ensemble.states, total)
    det = np.abs(psi @ measurement.detection.conj().T) ** 2
    inc = (np.abs(psi @ measurement.completion.conj().T) ** 2).sum(axis=1)
    probs = np.column_stack([det, inc])
    rows = probs.sum(axis=1)
    if np.abs(rows - 1).max() > ROW_SUM_TOL:
        raise ValueError(f"measurement is not complete: row sums {rows}")
    probs = probs / rows[:, None]
    if noise > 0:
        active = measurement.active
        probs = (1 - noise) * probs
        probs[:, :-1][:, active] += noise / total
        probs[:, -1] += noise * measurement.completion.shape[0] / total
    return OutcomeDistribution(probs, np.asarray(ensemble.priors, dtype=float))


@dataclass(frozen=True)
class CountTable:
    """Counts per (prepared state, outcome); inconclusive outcome last."""

    counts: np.ndarray
    mean_total: float
    rng_seed: int | None  # None marks exact expected counts

    def to_json(self) -> dict:
        return {"counts": self.counts, "mean_total": self.mean_total, "rng_seed": self.rng_seed}


def expected_counts(dist: OutcomeDistribution, mean_total: float = DEFAULT_MEAN_TOTAL) -> CountTable:
    return CountTable(mean_total * dist.probs, float(mean_total), None)


def simulate_counts(
    dist: OutcomeDistribution, mean_total: float = DEFAULT_MEAN_TOTAL, rng_seed: int = 0
) -> CountTable:
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    return CountTable(rng.poisson(mean_total * dist.probs), float(mean_total), rng_seed)


@dataclass(frozen=True)
class EmpiricalStats:
    p_success: float
    p_error: float
    p_fail: float
    conditional: np.ndarray  # row-normalized counts


def _stats_arrays(counts: np.ndarray, priors: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized over leading axes of ``counts`` (..., d, d+1)."""
    counts = np.asarray(counts, dtype=float)
    totals = counts.sum(axis=-1)
    if np.any(totals <= 0):
        raise ValueError("a prepared state has zero total counts; empirical probabilities undefined")
    cond = counts / totals[..., None]
    d = cond.shape[-2]
    diag = np.diagonal(cond[..., :d], axis1=-2, axis2=-1)
    wrong = cond[..., :d].sum(axis=-1) - diag
    return diag @ priors, wrong @ priors, cond[..., d] @ priors


def empirical_stats(counts: CountTable | np.ndarray, priors: Sequence[float]) -> EmpiricalStats:
    c = counts.counts if isinstance(counts, CountTable) else np.asarray(counts)
    q = np.asarray(priors, dtype=float)
    ps, pe, pf = _stats_arrays(c, q)
    c = np.asarray(c, dtype=float)
    return EmpiricalStats(float(ps), float(pe), float(pf), c / c.sum(axis=1)[:, None])


@dataclass(frozen=True)
class SweepPoint:
    phi: float
    theta: float
    xi: float
    priors_label: str
    priors: tuple[float, ...]
    p_success: float  # solver optimum (noiseless theory)
    p_success_expected: float  # exact expectation of the simulated distribution
    p_success_mean: float
    p_success_std: float
    p_error_mean: float
    p_error_std: float
    p_fail_mean: float
    p_err_mesd: float
    total_dim: int
    repetitions: int
    p_success_samples: np.ndarray = field(repr=False)
    status: str = "ok"

    @property
    def single_sample(self) -> bool:
        return self.repetitions == 1


def _std(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


def _sweep_point(phi, label, priors, params_kw, mean_total, repetitions, noise, seed) -> SweepPoint:
    params = LgTripleParams(phi=phi, **params_kw)
    ens = lg_triple(params, priors)
    meas, report = synthesize(ens)
    dist = outcome_probs(meas, ens, noise)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(mean_total * dist.probs, size=(repetitions, *dist.probs.shape))
    ps, pe, pf = _stats_arrays(counts, ens.priors)
    return SweepPoint(
        phi=float(phi),
        theta=float(params.theta),
        xi=float(params.xi),
        priors_label=label,
        priors=tuple(float(q) for q in priors),
        p_success=report.p_success,
        p_success_expected=dist.p_success,
        p_success_mean=float(ps.mean()),
        p_success_std=_std(ps),
        p_error_mean=float(pe.mean()),
        p_error_std=_std(pe),
        p_fail_mean=float(pf.mean()),
        p_err_mesd=mesd_bound(ens).p_error,
        total_dim=meas.total_dim,
        repetitions=repetitions,
        p_success_samples=ps,
    )


def monte_carlo_sweep(
    phis: Sequence[float],
    prior_sets: Mapping[str, Sequence[float]] | None = None,
    *,
    theta: float = 2 * np.pi / 3,
    xi: float = np.pi / 3,
    mean_total: float = DEFAULT_MEAN_TOTAL,
    repetitions: int = DEFAULT_REPETITIONS,
    noise: float = 0.0,
    rng_seed: int = 0,
) -> list[SweepPoint]:
    """Theory and Monte Carlo success/error rates across ``phi`` and prior sets.

    Point ``k`` (phi-major, prior-set-minor) draws from child ``k`` of
    ``SeedSequence(rng_seed)``, so each point's numbers do not depend on
    which other points are run. A point that raises is reported with its
    error in ``status`` and NaN statistics; the sweep continues.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    prior_sets = DEFAULT_PRIOR_SETS if prior_sets is None else prior_sets
    items = [(phi, label, tuple(q)) for phi in phis for label, q in prior_sets.items()]
    seeds = np.random.SeedSequence(rng_seed).spawn(len(items))
    out = []
    for (phi, label, q), seed in zip(items, seeds):
        try:
            out.append(_sweep_point(phi, label, q, {"theta": theta, "xi": xi}, mean_total, repetitions, noise, seed))
        except Exception as exc:  # noqa: BLE001 - one bad point must not kill the sweep
            log.warning("sweep point phi=%g priors=%s failed: %s", phi, label, exc)
            nan = float("nan")
            out.append(
                SweepPoint(float(phi), float(theta), float(xi), label, tuple(float(x) for x in q), nan, nan, nan, nan, nan, nan, nan, nan,
                           0, repetitions, np.array([]), f"error: {exc}")
            )
    return out


SWEEP_COLUMNS = (
    "phi", "priors_label", "p_succ_theory", "p_succ_mc_mean", "p_succ_mc_std",
    "p_err_mc_mean", "p_err_mc_std", "p_err_mesd",
    "theta", "xi", "q1", "q2", "q3", "p_succ_expected", "p_fail_mc_mean", "total_dim", "repetitions", "status",
)


def sweep_rows(points: Sequence[SweepPoint]) -> list[dict]:
    return [
        {
            "phi": p.phi, "priors_label": p.priors_label, "p_succ_theory": p.p_success,
            "p_succ_mc_mean": p.p_success_mean, "p_succ_mc_std": p.p_success_std,
            "p_err_mc_mean": p.p_error_mean, "p_err_mc_std": p.p_error_std, "p_err_mesd": p.p_err_mesd,
            "theta": p.theta, "xi": p.xi, "q1": p.priors[0], "q2": p.priors[1], "q3": p.priors[2],
            "p_succ_expected": p.p_success_expected, "p_fail_mc_mean": p.p_fail_mean,
            "total_dim": p.total_dim, "repetitions": p.repetitions, "status": p.status,
        }
        for p in points
    ]


def mub4_bases() -> np.ndarray:
    """Five mutually unbiased bases of C^4, shape (5, 4, 4), row-stacked vectors.

    Basis 0 is the computational basis. The others are common eigenbases of
    commuting two-qubit Pauli pairs (XI, IX), (YI, IY), (XY, YZ), (XZ, YX);
    together with (ZI, IZ) these five classes partition the 15 nontrivial
    Paulis, which makes the bases mutually unbiased.
    """
    i2 = np.eye(2)
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    y = np.array([[0, -1j], [1j, 0]])
    z = np.diag([1.0, -1.0]).astype(complex)
    pairs = [
        (np.kron(x, i2), np.kron(i2, x)),
        (np.kron(y, i2), np.kron(i2, y)),
        (np.kron(x, y), np.kron(y, z)),
        (np.kron(x, z), np.kron(y, x)),
    ]
    bases = [np.eye(4, dtype=complex)]
    for p, q in pairs:
        # Eigenvalues of P + 2Q are -3, -1, 1, 3: nondegenerate, so one joint basis.
        _, v = np.linalg.eigh(p + 2 * q)
        bases.append(gauge_fix(v.T))
    return np.array(bases)


@dataclass(frozen=True)
class CrosstalkResult:
    counts: np.ndarray  # (P, M) prepared vector x measured vector
    visibilities: np.ndarray  # one per basis group
    noise: float
    exact: bool

    def to_json(self) -> dict:
        return {
            "counts": self.counts,
            "visibilities": self.visibilities,
            "noise": self.noise,
            "exact": self.exact,
        }


def crosstalk_visibility(
    prep_groups: np.ndarray | None = None,
    meas_groups: np.ndarray | None = None,
    noise: float = 0.0,
    mean_total: float = DEFAULT_MEAN_TOTAL,
    rng_seed: int | None = None,
) -> CrosstalkResult:
    """Crosstalk table between prepared and measured basis vectors.

    ``P(m | p) = (1 - eps) |<m|p>|^2 + eps / dim``. Each group's visibility
    is the diagonal sum of its own block over the block sum. With
    ``rng_seed=None`` the counts are exact expectations, otherwise Poisson
    draws.
    """
    prep = mub4_bases() if prep_groups is None else np.asarray(prep_groups, dtype=complex)
    meas = prep if meas_groups is None else np.asarray(meas_groups, dtype=complex)
    g, k, dim = prep.shape
    p_vecs = prep.reshape(g * k, dim)
    m_vecs = meas.reshape(-1, dim)
    # Rounding strips float noise so ideal overlaps come out as exactly 0, 1/dim or 1.
    overlap = np.round(np.abs(p_vecs.conj() @ m_vecs.T) ** 2, 12)
    probs = (1 - noise) * overlap + noise / dim
    if rng_seed is None:
        counts = mean_total * probs
    else:
        counts = np.random.default_rng(np.random.SeedSequence(rng_seed)).poisson(mean_total * probs).astype(float)
    vis = np.empty(g)
    for i in range(g):
        block = counts[i * k : (i + 1) * k, i * k : (i + 1) * k]
        vis[i] = np.trace(block) / block.sum()
    return CrosstalkResult(counts, vis, float(noise), rng_seed is None)
