import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from isingmix import (
    IsingParams,
    MixtureParams,
    ParameterMask,
    activation_sets,
    check_assumptions,
    family_example2,
    family_example4,
    fisher_information,
    local_identifiability_test,
    verify_equal_distribution,
)
from isingmix.identifiability import (
    OutOfFamilyError,
    example2_mask,
    example2_mixture,
    example4_cell_equations,
    example4_mask,
    example4_mixture,
    score_matrix,
)
from isingmix.model import (
    DimensionError,
    cell_probabilities,
    log_mixture_cell_probabilities,
    mixture_cell_probabilities,
    mixture_from_free,
    n_pairs,
    pair_index,
    theta_from_free,
)

finite = st.floats(-2.5, 2.5)
weight = st.floats(0.05, 0.95)


def _random_mixture(rng, d, K, shared):
    w = np.clip(rng.dirichlet(np.ones(K)), 0.05, None)
    w /= w.sum()
    main = rng.normal(0, 0.7, d)
    comps = tuple(IsingParams(main if shared else rng.normal(0, 0.7, d),
                              rng.normal(0, 0.7, n_pairs(d))) for _ in range(K))
    return MixtureParams(w, comps, shared)


def _log_pmix_of(params, mask, x):
    """Log cell probabilities as a function of the free coordinates ``x``."""
    d, K = params.d, params.K
    x = np.asarray(x, float)
    pos = 0
    w = params.weights.copy()
    if mask.free_weights:
        w[:K - 1] = x[:K - 1]
        w[K - 1] = 1 - w[:K - 1].sum()
        pos = K - 1
    mats = params.theta_matrix().copy()
    mi = np.flatnonzero(mask.free_main)
    if params.shared_main:
        mats[:, mi] = x[pos:pos + mi.size]
        pos += mi.size
    else:
        for k in range(K):
            mats[k, mi] = x[pos:pos + mi.size]
            pos += mi.size
    for k in range(K):
        ii = d + np.flatnonzero(mask.free_inter[k])
        mats[k, ii] = x[pos:pos + ii.size]
        pos += ii.size
    comps = tuple(IsingParams(m[:d], m[d:]) for m in mats)
    return log_mixture_cell_probabilities(MixtureParams(w, comps, params.shared_main))


def _x0(params, mask):
    parts = []
    if mask.free_weights:
        parts.append(params.weights[:-1])
    mats = params.theta_matrix()
    mi = np.flatnonzero(mask.free_main)
    if params.shared_main:
        parts.append(mats[0, mi])
    else:
        parts.extend(mats[k, mi] for k in range(params.K))
    parts.extend(mats[k, params.d + np.flatnonzero(mask.free_inter[k])] for k in range(params.K))
    return np.concatenate(parts)


class TestFisher:
    def test_bernoulli_information(self):
        single = MixtureParams.single(IsingParams(np.zeros(1), np.zeros(0)))
        info = fisher_information(single, ParameterMask(False, np.zeros((1, 0)), np.ones(1)))
        assert abs(info[0, 0] - 0.25) < 1e-15

    def test_scores_match_finite_differences(self):
        rng = np.random.default_rng(0)
        for i in range(20):
            params = _random_mixture(rng, 3, 2, bool(i % 2))
            mask = ParameterMask.all_free(2, 3)
            S = score_matrix(params, mask)
            x0 = _x0(params, mask)
            h = 1e-6
            for j in range(x0.size):
                e = np.zeros_like(x0)
                e[j] = h
                fd = (_log_pmix_of(params, mask, x0 + e) - _log_pmix_of(params, mask, x0 - e)) / (2 * h)
                np.testing.assert_allclose(S[j], fd, atol=1e-7)

    def test_information_identity(self):
        rng = np.random.default_rng(1)
        for i in range(10):
            params = _random_mixture(rng, 3, 2, bool(i % 2))
            mask = ParameterMask.all_free(2, 3)
            S = score_matrix(params, mask)
            p = mixture_cell_probabilities(params)
            assert np.abs(S @ p).max() < 1e-12
            x0 = _x0(params, mask)
            h = 1e-4
            n = x0.size
            neg_hess = np.zeros((n, n))
            f = lambda x: p @ _log_pmix_of(params, mask, x)
            for a in range(n):
                for b in range(n):
                    ea, eb = np.eye(n)[a] * h, np.eye(n)[b] * h
                    neg_hess[a, b] = -(f(x0 + ea + eb) - f(x0 + ea - eb) - f(x0 - ea + eb)
                                       + f(x0 - ea - eb)) / (4 * h * h)
            np.testing.assert_allclose(neg_hess, fisher_information(params, mask), atol=1e-6)

    @given(st.integers(0, 2**31 - 1), st.integers(2, 4), st.integers(1, 3), st.booleans())
    def test_symmetric_psd(self, seed, d, K, shared):
        params = _random_mixture(np.random.default_rng(seed), d, K, shared)
        info = fisher_information(params, ParameterMask.all_free(K, d))
        np.testing.assert_array_equal(info, info.T)
        assert np.linalg.eigvalsh(info).min() >= -1e-12

    def test_mask_dimension_checked(self):
        params = _random_mixture(np.random.default_rng(0), 3, 2, True)
        with pytest.raises(DimensionError):
            fisher_information(params, ParameterMask.all_free(2, 4))

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            ParameterMask(False, np.zeros((1, 3), bool), np.zeros(3, bool))


class TestRankTest:
    @pytest.mark.parametrize("d", [2, 3, 4, 5])
    def test_ising_identifiable(self, d):
        rng = np.random.default_rng(d)
        th = IsingParams.from_vector(rng.normal(0, 0.8, d * (d + 1) // 2), d)
        res = local_identifiability_test(MixtureParams.single(th), ParameterMask.all_free(1, d))
        assert res.identifiable_at_point and res.rank == d * (d + 1) // 2

    def test_example2_not_identifiable(self):
        for t in (-1.0, 0.3, 2.0):
            res = local_identifiability_test(example2_mixture(t, 0.3), example2_mask())
            assert not res.identifiable_at_point

    def test_single_free_component_with_fixed_weights(self):
        rng = np.random.default_rng(5)
        params = _random_mixture(rng, 4, 2, True)
        inter = np.zeros((2, 6), bool)
        inter[0] = True
        mask = ParameterMask(False, inter, np.zeros(4, bool))
        assert check_assumptions(params, mask).prop_single_component
        assert local_identifiability_test(params, mask).identifiable_at_point

    def test_eigenvalues_descending(self):
        res = local_identifiability_test(example4_mixture(1.0, -1.0, 0.4), example4_mask())
        assert np.all(np.diff(res.eigenvalues) <= 0)

    def test_tol_validated(self):
        with pytest.raises(ValueError):
            local_identifiability_test(example2_mixture(1.0, 0.4), example2_mask(), tol=0)


class TestActivation:
    def test_example3_components(self):
        c1 = IsingParams.from_pairs(4, {(1, 2): 0.8}, np.zeros(4))
        c2 = IsingParams.from_pairs(4, {(3, 4): -0.4}, np.zeros(4))
        g1, g2 = activation_sets(c1), activation_sets(c2)
        assert g1.activation_vertices == {1, 2} and g1.edges == {(1, 2)}
        assert g2.activation_vertices == {3, 4} and g2.edges == {(3, 4)}
        assert g1.projected().vertices == (1, 2)
        assert g1.vertices == (1, 2, 3, 4)

    def test_zero_and_dense(self):
        assert activation_sets(IsingParams.zeros(5)).edges == frozenset()
        assert activation_sets(IsingParams.zeros(5)).activation_vertices == frozenset()
        dense = activation_sets(IsingParams.from_vector(np.ones(15), 5))
        assert len(dense.edges) == 10 and dense.activation_vertices == set(range(1, 6))

    def test_tolerance(self):
        th = IsingParams.from_pairs(3, {(1, 2): 1e-13, (2, 3): 1e-11}, np.zeros(3))
        assert activation_sets(th).edges == {(2, 3)}

    def test_project_subset(self):
        g = activation_sets(IsingParams.from_vector(np.ones(10), 4))
        sub = g.project({1, 3, 4})
        assert sub.edges == {(1, 3), (1, 4), (3, 4)}


class TestAssumptions:
    def test_example3_certified_by_disjointness(self):
        params = MixtureParams(np.array([0.4, 0.6]), (
            IsingParams.from_pairs(4, {(1, 2): 0.8}, np.zeros(4)),
            IsingParams.from_pairs(4, {(3, 4): -0.4}, np.zeros(4))), shared_main=True)
        mask = ParameterMask.interactions(4, {0: [(1, 2)], 1: [(3, 4)]})
        rep = check_assumptions(params, mask)
        assert rep.disjoint_activation and rep.fixed_weights and rep.prop_disjoint
        assert not rep.prop_single_component
        assert local_identifiability_test(params, mask).identifiable_at_point

    def test_example4_not_certified(self):
        m, mask = example4_mixture(1.0, -1.0, 0.4), example4_mask()
        rep = check_assumptions(m, mask)
        assert rep.disjoint_activation and not rep.fixed_weights and not rep.certified
        assert not local_identifiability_test(m, mask).identifiable_at_point

    def test_all_zero_interactions_disjoint(self):
        z = IsingParams.zeros(3)
        params = MixtureParams(np.array([0.5, 0.5]), (z, z), shared_main=True)
        rep = check_assumptions(params, ParameterMask.all_free(2, 3))
        assert rep.disjoint_activation

    def test_unshared_mains_fail_first_assumption(self):
        params = _random_mixture(np.random.default_rng(0), 3, 2, False)
        assert not check_assumptions(params, ParameterMask.all_free(2, 3)).shared_main


class TestFamilies:
    def test_example2_identity_and_degenerate(self):
        assert family_example2(0.7, 0.4, 0.4) == pytest.approx((0.7, 0.4), abs=1e-15)
        for wa in (0.1, 0.5, 0.9):
            assert abs(family_example2(0.0, 0.4, wa)[0]) < 1e-15

    def test_example2_log2(self):
        t, w = family_example2(np.log(2), 0.4, 0.5)
        # hand-solved p00 equation: eta = 1 + 1/(4 (0.4/5 + 0.1/4))
        assert abs(np.exp(t) - (2 - 0.1 / (4 * (0.08 + 0.025)))) < 1e-14
        diff = verify_equal_distribution(example2_mixture(np.log(2), 0.4), example2_mixture(t, w))
        assert diff < 1e-12

    def test_example2_out_of_family(self):
        with pytest.raises(OutOfFamilyError):
            family_example2(-3.0, 0.8, 0.3)

    @given(finite, weight, weight)
    def test_example2_property(self, t, wt, wa):
        try:
            ta, w = family_example2(t, wt, wa)
        except OutOfFamilyError:
            assume(False)
        assert verify_equal_distribution(example2_mixture(t, wt), example2_mixture(ta, w)) < 1e-12

    def test_example4_identity(self):
        a, b, w = family_example4(1.0, -1.0, 0.4, 0.4)
        assert (a, b, w) == pytest.approx((1.0, -1.0, 0.4), abs=1e-15)

    def test_example4_reference_case(self):
        a, b, w = family_example4(1.0, -1.0, 0.4, 0.45)
        diff = verify_equal_distribution(example4_mixture(1.0, -1.0, 0.4), example4_mixture(a, b, w))
        assert diff < 1e-12

    def test_example4_third_equation_on_grid(self):
        ref = example4_cell_equations(1.0, -1.0, 0.4)
        for wa in np.linspace(0.05, 0.95, 19):
            try:
                a, b, w = family_example4(1.0, -1.0, 0.4, wa)
            except OutOfFamilyError:
                continue
            np.testing.assert_allclose(example4_cell_equations(a, b, w), ref, atol=1e-15)

    def test_cell_equations_are_cell_probabilities(self):
        p = mixture_cell_probabilities(example4_mixture(0.3, 1.2, 0.7))
        np.testing.assert_allclose(example4_cell_equations(0.3, 1.2, 0.7), p[[0, 12, 3]],
                                   atol=1e-16)

    @given(finite, finite, weight, weight)
    def test_example4_property(self, t1, t2, wt, wa):
        try:
            a, b, w = family_example4(t1, t2, wt, wa)
        except OutOfFamilyError:
            assume(False)
        assert verify_equal_distribution(example4_mixture(t1, t2, wt),
                                         example4_mixture(a, b, w)) < 1e-12


class TestDistributionIdentities:
    def test_equal_and_distinct(self):
        a = example4_mixture(1.0, -1.0, 0.4)
        assert verify_equal_distribution(a, a) == 0.0
        assert verify_equal_distribution(a, example4_mixture(1.1, -1.0, 0.4)) > 1e-4

    @given(st.integers(0, 2**31 - 1), st.integers(2, 5), st.integers(1, 3))
    def test_main_effect_ratios(self, seed, d, K):
        params = _random_mixture(np.random.default_rng(seed), d, K, True)
        p = mixture_cell_probabilities(params)
        for v in range(d):
            e_v = 1 << (d - 1 - v)
            assert abs(p[e_v] / p[0] - np.exp(params.components[0].main[v])) < 1e-10 * np.exp(
                abs(params.components[0].main[v]))

    @given(st.integers(0, 2**31 - 1))
    def test_disjoint_component_is_flat_on_other_activation_set(self, seed):
        rng = np.random.default_rng(seed)
        d = 5
        c1 = IsingParams.from_pairs(d, {(1, 2): rng.normal(), (2, 3): rng.normal()}, np.zeros(d))
        c2 = IsingParams.from_pairs(d, {(4, 5): rng.normal()}, np.zeros(d))
        p2 = cell_probabilities(c2)
        active = {0, 1, 2}
        for i in range(2**d):
            on = {v for v in range(d) if (i >> (d - 1 - v)) & 1}
            if on <= active:
                assert abs(p2[i] - p2[0]) < 1e-15
