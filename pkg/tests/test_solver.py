import numpy as np
import pytest

from conftest import cvx_optimum
from usdqudit.analytic import idp_alpha, success_prob
from usdqudit.ensemble import (
    LgTripleParams,
    StateEnsemble,
    gram_from_qutrit_overlaps,
    lg_triple,
    orthonormal_ensemble,
    random_ensemble,
)
from usdqudit.errors import InfeasibleError
from usdqudit.solver import (
    barrier_gradient,
    barrier_value,
    build_povm,
    kkt_check,
    solve_gram,
    solve_optimal_alpha,
)

PI = np.pi


def two_states(s, priors):
    return StateEnsemble(np.array([[1.0, 0.0], [s, np.sqrt(1 - s * s)]]), priors)


def test_two_states_equal_priors():
    rep = solve_optimal_alpha(two_states(0.5, [0.5, 0.5]))
    assert rep.p_success == pytest.approx(0.5, abs=1e-6)
    assert rep.alpha_star.feasible and rep.kkt_residual < 1e-6 and rep.converged


def test_lg_symmetric():
    rep = solve_optimal_alpha(lg_triple(LgTripleParams(PI / 3, 2 * PI / 3, 2 * PI / 3), [1 / 3] * 3))
    assert rep.p_success == pytest.approx(0.375, abs=1e-6)
    np.testing.assert_allclose(rep.alpha_star.alphas, 0.375, atol=1e-6)


def test_orthonormal():
    rep = solve_optimal_alpha(orthonormal_ensemble(4, [0.1, 0.2, 0.3, 0.4]))
    np.testing.assert_allclose(rep.alpha_star.alphas, 1.0, atol=1e-6)
    assert rep.p_success == pytest.approx(1.0, abs=1e-6)


def test_too_many_states():
    with pytest.raises(ValueError, match="at most 12"):
        solve_gram(np.eye(13), np.full(13, 1 / 13))


def test_matches_idp_on_random_pairs():
    rng = np.random.default_rng(2)
    for _ in range(100):
        s = rng.uniform(0.01, 0.99)
        q = rng.dirichlet([1, 1])
        rep = solve_optimal_alpha(two_states(s, q))
        assert rep.p_success == pytest.approx(success_prob(idp_alpha(s, q), q), abs=1e-6)


@pytest.mark.parametrize("d", [3, 4, 6, 8])
def test_matches_sdp_oracle_complex(d):
    rng = np.random.default_rng(100 + d)
    for _ in range(5):
        ens = random_ensemble(d, rng=rng)
        rep = solve_optimal_alpha(ens)
        p_ref, _ = cvx_optimum(ens.gram(), ens.priors)
        assert rep.p_success == pytest.approx(p_ref, abs=1e-6)
        assert rep.kkt_residual < 1e-6 and rep.alpha_star.feasible


def test_nonzero_berry_phase_changes_optimum():
    q = [1 / 3] * 3
    p0 = solve_gram(gram_from_qutrit_overlaps([0.5] * 3), q).p_success
    p1 = solve_gram(gram_from_qutrit_overlaps([0.5] * 3, [PI / 6] * 3), q).p_success
    ref, _ = cvx_optimum(gram_from_qutrit_overlaps([0.5] * 3, [PI / 6] * 3), q)
    assert p1 == pytest.approx(ref, abs=1e-6)
    assert p0 == pytest.approx(0.5, abs=1e-6)  # first-type 1 - s
    assert abs(p1 - p0) > 1e-2


def test_report_json_and_determinism():
    ens = random_ensemble(4, rng=np.random.default_rng(0))
    a, b = solve_optimal_alpha(ens), solve_optimal_alpha(ens)
    np.testing.assert_array_equal(a.alpha_star.alphas, b.alpha_star.alphas)
    doc = a.to_json()
    assert set(doc) >= {"alpha_star", "p_success", "iterations", "duality_gap", "surface_gap", "kkt_residual"}


def test_shrinking_all_overlaps_never_lowers_optimum():
    # G -> tG + (1-t)I maps feasible alpha to t*alpha + (1-t), so P_s cannot drop.
    rng = np.random.default_rng(9)
    for _ in range(20):
        ens = random_ensemble(3, rng=rng)
        g, q = ens.gram(), ens.priors
        prev = solve_gram(g, q).p_success
        for t in (0.8, 0.6, 0.4, 0.2):
            p = solve_gram(t * g + (1 - t) * np.eye(3), q).p_success
            assert p >= prev - 1e-7
            prev = p


def test_reducing_a_single_overlap_can_lower_optimum():
    # Counterexample to per-entry monotonicity, confirmed by the SDP oracle.
    q = [0.4, 0.35, 0.25]
    hi = gram_from_qutrit_overlaps([0.5351246, 0.2434086, 0.40157408])
    lo = gram_from_qutrit_overlaps([0.5351246, 0.17038602, 0.40157408])
    p_hi, p_lo = solve_gram(hi, q).p_success, solve_gram(lo, q).p_success
    assert p_hi == pytest.approx(cvx_optimum(hi, q)[0], abs=1e-6)
    assert p_lo == pytest.approx(cvx_optimum(lo, q)[0], abs=1e-6)
    assert p_lo < p_hi - 0.04


def test_barrier_gradient_finite_difference():
    rng = np.random.default_rng(4)
    for _ in range(50):
        ens = random_ensemble(3, rng=rng)
        g, q = ens.gram(), ens.priors
        lam = np.linalg.eigvalsh(g).min()
        alpha = rng.uniform(0.1, 0.8, 3) * lam
        mu = 10 ** rng.uniform(-3, 0)
        grad = barrier_gradient(g, q, alpha, mu)
        h = 1e-6
        fd = np.array(
            [
                (barrier_value(g, q, alpha + h * e, mu) - barrier_value(g, q, alpha - h * e, mu)) / (2 * h)
                for e in np.eye(3)
            ]
        )
        np.testing.assert_allclose(grad, fd, rtol=1e-4, atol=1e-8)


def test_povm_zero_alpha_is_identity_inconclusive():
    ens = random_ensemble(3, rng=np.random.default_rng(1))
    povm = build_povm(ens, [0, 0, 0])
    np.testing.assert_allclose(povm.inconclusive, np.eye(3), atol=1e-15)


def test_povm_boundary_two_states_rank_one():
    povm = build_povm(two_states(0.5, [0.5, 0.5]), [0.5, 0.5])
    w = np.linalg.eigvalsh(povm.inconclusive)
    assert (w > 1e-10).sum() == 1


def test_povm_symmetric_triple():
    ens = lg_triple(LgTripleParams(PI / 3, 2 * PI / 3, 2 * PI / 3), [1 / 3] * 3)
    povm = build_povm(ens, [0.375] * 3)
    np.testing.assert_allclose(np.diag(povm.outcome_matrix(ens)), 0.375, atol=1e-10)


def test_povm_infeasible_alpha():
    with pytest.raises(InfeasibleError, match="M_\\? not PSD"):
        build_povm(two_states(0.5, [0.5, 0.5]), [0.6, 0.6])


def test_povm_invariants_random():
    rng = np.random.default_rng(6)
    for d in (2, 3, 4, 5):
        for _ in range(10):
            ens = random_ensemble(d, rng=rng)
            rep = solve_optimal_alpha(ens)
            povm = build_povm(ens, rep.alpha_star)
            total = povm.elements.sum(axis=0) + povm.inconclusive
            np.testing.assert_allclose(total, np.eye(d), atol=1e-10)
            assert povm.min_inconclusive_eigenvalue >= -1e-9
            for m in povm.elements:
                assert np.linalg.eigvalsh(m).min() >= -1e-12
            p = povm.outcome_matrix(ens)
            off = p[:, :d][~np.eye(d, dtype=bool)]
            assert off.max() <= 1e-10
            np.testing.assert_allclose(np.diag(p), rep.alpha_star.alphas, atol=1e-10)


def test_kkt_symmetric_case():
    g = gram_from_qutrit_overlaps([0.625] * 3)
    assert kkt_check(g, [1 / 3] * 3, [0.375] * 3) < 1e-8


def test_kkt_idp_interior():
    s, q = 0.4, [0.6, 0.4]
    a = idp_alpha(s, q)
    assert kkt_check(np.array([[1, s], [s, 1]]), q, a) < 1e-8


def test_kkt_boundary_inapplicable():
    with pytest.raises(InfeasibleError, match="boundary solution"):
        kkt_check(np.array([[1, 0.5], [0.5, 1]]), [0.95, 0.05], [0.75, 0.0])


def test_kkt_detects_non_tangent_point():
    # on the surface but not optimal for these priors
    s, q = 0.4, [0.6, 0.4]
    a = idp_alpha(s, [0.5, 0.5])
    assert kkt_check(np.array([[1, s], [s, 1]]), q, a) > 1e-3
