import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from conftest import srm_error
from usdqudit.ensemble import LgTripleParams, StateEnsemble, lg_triple, orthonormal_ensemble, random_ensemble
from usdqudit.errors import ConvergenceError
from usdqudit.mesd import helstrom_2, helstrom_overlap, mesd_bound
from usdqudit.solver import solve_optimal_alpha

PI = np.pi
# Regression constant for the symmetric LG triple, equal priors; pinned from the
# square-root measurement and confirmed by the brute-force search below.
LG_SYMMETRIC_MESD = 0.17508504286947035


def two_states(s, priors):
    return StateEnsemble(np.array([[1.0, 0.0], [s, np.sqrt(1 - s * s)]]), priors)


def test_helstrom_examples():
    assert helstrom_overlap(0.0, [0.3, 0.7]) == 0.0
    assert helstrom_overlap(0.5, [0.5, 0.5]) == pytest.approx((1 - np.sqrt(0.75)) / 2, abs=1e-15)
    assert helstrom_overlap(0.5, [0.5, 0.5]) == pytest.approx(0.066987, abs=1e-6)
    assert helstrom_overlap(1.0, [0.3, 0.7]) == pytest.approx(0.3, abs=1e-15)
    assert helstrom_2(two_states(0.5, [0.5, 0.5])) == pytest.approx(0.066987, abs=1e-6)


def test_helstrom_needs_two_states():
    with pytest.raises(ValueError):
        helstrom_2(orthonormal_ensemble(3))


def test_orthonormal_zero_error():
    assert mesd_bound(orthonormal_ensemble(3, [0.2, 0.3, 0.5])).p_error == pytest.approx(0.0, abs=1e-12)


def test_two_states_example():
    assert mesd_bound(two_states(0.5, [0.5, 0.5])).p_error == pytest.approx(0.066987, abs=1e-6)


def _brute_force_real_projective(states, priors):
    """Best 3-outcome orthogonal measurement over rotations of R^3 (grid then refine)."""
    q = np.asarray(priors)
    psi = np.real(states)

    def err(v):
        u = Rotation.from_rotvec(v).as_matrix()
        return 1 - float(np.sum(q * np.einsum("ij,ji->i", u.T, psi.T) ** 2))

    grid = np.linspace(-PI, PI, 13)
    starts = sorted(((err(np.array([a, b, c])), (a, b, c)) for a in grid for b in grid for c in grid))[:10]
    return min(minimize(err, s, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15}).fun for _, s in starts)


def test_lg_symmetric_regression_constant():
    ens = lg_triple(LgTripleParams(PI / 3, 2 * PI / 3, 2 * PI / 3), [1 / 3] * 3)
    assert srm_error(ens.states, ens.priors) == pytest.approx(LG_SYMMETRIC_MESD, abs=1e-12)
    assert _brute_force_real_projective(ens.states, ens.priors) == pytest.approx(LG_SYMMETRIC_MESD, abs=1e-8)
    assert mesd_bound(ens).p_error == pytest.approx(LG_SYMMETRIC_MESD, abs=1e-9)


def test_lg_asymmetric_against_brute_force():
    ens = lg_triple(LgTripleParams(PI / 3, 2 * PI / 3, 0.8 * PI), [0.5, 0.25, 0.25])
    assert mesd_bound(ens).p_error == pytest.approx(_brute_force_real_projective(ens.states, ens.priors), abs=1e-7)


def test_matches_helstrom_random():
    rng = np.random.default_rng(12)
    for _ in range(100):
        ens = random_ensemble(2, rng=rng)
        assert mesd_bound(ens).p_error == pytest.approx(helstrom_2(ens), abs=1e-6)


@pytest.mark.parametrize("d,n", [(3, 3), (4, 4), (3, 5)])
def test_povm_and_certificate(d, n):
    rng = np.random.default_rng(d * 10 + n)
    for _ in range(10):
        ens = random_ensemble(d, n, rng=rng)
        res = mesd_bound(ens)
        np.testing.assert_allclose(res.povm.sum(axis=0), np.eye(n), atol=1e-9)
        for m in res.povm:
            assert np.linalg.eigvalsh(m).min() >= -1e-9
        assert res.certificate_min_eigenvalue >= -1e-7
        assert res.certificate_hermiticity <= 1e-8
        assert 0 <= res.p_error <= 1 - ens.priors.max() + 1e-12


def test_invariant_under_global_unitary():
    rng = np.random.default_rng(1)
    for _ in range(10):
        ens = random_ensemble(3, rng=rng)
        z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        u, _ = np.linalg.qr(z)
        rotated = StateEnsemble(ens.states @ u.T, ens.priors)
        assert mesd_bound(rotated).p_error == pytest.approx(mesd_bound(ens).p_error, abs=1e-8)


def test_below_usd_failure():
    rng = np.random.default_rng(3)
    for d in (2, 3):
        for _ in range(100):
            ens = random_ensemble(d, rng=rng)
            assert mesd_bound(ens).p_error <= 1 - solve_optimal_alpha(ens).p_success + 1e-9


def test_non_convergence_reported():
    ens = random_ensemble(4, rng=np.random.default_rng(0))
    with pytest.raises(ConvergenceError) as info:
        mesd_bound(ens, max_iter=1)
    assert info.value.report is not None and info.value.report.iterations == 1
