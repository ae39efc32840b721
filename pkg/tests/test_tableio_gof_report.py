import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chi2

from isingmix import (
    BinaryTable,
    IsingParams,
    MixtureParams,
    PriorConfig,
    builtin_dataset,
    cell_probabilities,
    count_parameters,
    export_graph,
    fit_mle,
    gof_test,
    lrt_test,
    parse_table,
    serialize_table,
    significant_edges,
)
from isingmix.datasets import simulate_design
from isingmix.gof import deviance, pearson, top_expected_counts
from isingmix.model import DimensionError, DomainError
from isingmix.report import AnalysisReport
from isingmix.sampler import PosteriorSummary


class TestParse:
    def test_single_cell_placement_both_orders(self):
        d = 3
        toks = ["0"] * 8
        toks[1] = "5"  # second token
        last = parse_table(" ".join(toks), d, "last")
        first = parse_table(" ".join(toks), d, "first")
        assert last.N == first.N == 5
        assert last.counts[1] == 5  # cell 001
        assert first.counts[4] == 5  # first variable fastest: token 1 is cell 100

    def test_first_order_matches_transpose(self):
        rng = np.random.default_rng(0)
        counts = rng.integers(0, 9, 16)
        text_first = " ".join(str(c) for c in counts.reshape(2, 2, 2, 2).transpose(3, 2, 1, 0).ravel())
        np.testing.assert_array_equal(parse_table(text_first, 4, "first").counts, counts)

    @given(st.integers(1, 6), st.integers(0, 2**31 - 1), st.sampled_from(["last", "first"]))
    def test_round_trip(self, d, seed, order):
        rng = np.random.default_rng(seed)
        counts = rng.integers(0, 1000, 2**d).astype(float)
        counts[0] += 1
        t = BinaryTable(d, counts)
        back = parse_table(serialize_table(t, order), d, order)
        assert back.counts.tobytes() == t.counts.tobytes()

    def test_real_tables_round_trip_with_marker(self):
        t, _ = simulate_design("C")
        text = serialize_table(t)
        assert "counts: real" in text
        np.testing.assert_array_equal(parse_table(text).counts, t.counts)
        with pytest.raises(DomainError):
            parse_table(text, allow_real=False)

    def test_comments_and_inferred_d(self):
        t = parse_table("# header\n1 2 # trailing\n3 4\n")
        assert t.d == 2 and list(t.counts) == [1, 2, 3, 4]

    @pytest.mark.parametrize("text,exc", [("1 2 3", DimensionError), ("1 2 3 -4", DomainError),
                                          ("1 2 3 4.5", DomainError), ("1 2 x 4", DomainError)])
    def test_errors(self, text, exc):
        with pytest.raises(exc):
            parse_table(text, 2)

    def test_bad_order(self):
        with pytest.raises(DomainError):
            parse_table("1 2 3 4", 2, "middle")


class TestBuiltin:
    def test_rochdale(self):
        t = builtin_dataset("rochdale")
        assert t.N == 665 and int(np.sum(t.counts == 0)) == 165

    def test_nltcs(self):
        t = builtin_dataset("NLTCS")
        assert t.N == 21574 and t.counts[0] == 4419 and t.counts[-1] == 1056

    def test_unknown(self):
        with pytest.raises(KeyError):
            builtin_dataset("adult")


class TestGof:
    def test_parameter_counts(self):
        assert count_parameters(8, 1, True) == 36
        assert count_parameters(8, 2, True) == 65
        assert count_parameters(8, 2, False) == 73
        assert count_parameters(6, 3, True) == 6 + 45 + 2

    @pytest.mark.parametrize("d,K,shared", [(8, 1, True), (8, 2, True), (8, 2, False),
                                            (6, 2, True), (5, 2, True)])
    def test_df_formula(self, d, K, shared):
        rng = np.random.default_rng(0)
        main = rng.normal(size=d)
        comps = tuple(IsingParams(main if shared else rng.normal(size=d),
                                  rng.normal(size=d * (d - 1) // 2)) for _ in range(K))
        w = np.full(K, 1.0 / K)
        w[-1] = 1 - w[:-1].sum()
        params = MixtureParams(w, comps, shared) if K > 1 else MixtureParams.single(comps[0])
        t = BinaryTable(d, np.ones(2**d))
        g = gof_test(t, params)
        assert g.df == 2**d - 1 - count_parameters(d, K, shared)
        assert gof_test(t, params, df_convention="cells").df == 2**d - 1

    def test_perfect_fit(self):
        table, _ = simulate_design("A")
        g = gof_test(table, fit_mle(table))
        assert g.statistic < 1e-8 and g.p_value > 1 - 1e-9

    def test_zero_cells_contribute_nothing(self):
        n = np.array([0.0, 3.0, 5.0, 2.0])
        e = np.array([1.0, 3.0, 4.0, 2.0])
        assert abs(deviance(n, e) - 2 * 5 * np.log(5 / 4)) < 1e-15
        assert abs(pearson(n, e) - (1 + 0.25)) < 1e-15

    def test_impossible_cell_is_infinite(self):
        params = MixtureParams.single(IsingParams(np.array([-800.0, 0.0, 0.0]), np.zeros(3)))
        g = gof_test(BinaryTable(3, np.ones(8)), params)
        assert np.isinf(g.statistic) and g.p_value == 0.0

    def test_pearson_p_value(self):
        table, truth = simulate_design("A", N=2000, sampled=True, rng_seed=0)
        g = gof_test(table, truth, statistic="pearson")
        e = table.N * cell_probabilities(truth.components[0])
        stat = np.sum((table.counts - e) ** 2 / e)
        assert abs(g.statistic - stat) < 1e-9
        assert abs(g.p_value - chi2.sf(stat, 63 - 21)) < 1e-12

    def test_lrt_identical_fits(self):
        table, _ = simulate_design("A")
        fit = fit_mle(table)
        # same parameters as a degenerate two-component mixture
        c = fit.theta
        alt = MixtureParams(np.array([0.5, 0.5]), (c, c), shared_main=True)
        res = lrt_test(table, fit, alt)
        assert abs(res.statistic) < 1e-8 and res.p_value > 1 - 1e-6
        assert res.df == count_parameters(6, 2, True) - 21

    def test_lrt_design_c(self):
        table, _ = simulate_design("C")
        res = lrt_test(table, fit_mle(table), fit_mle(table, 2, True, J=3))
        assert res.statistic > 0 and not res.negative

    def test_lrt_df_d8(self):
        t = builtin_dataset("rochdale")
        z = IsingParams.zeros(8)
        alt = MixtureParams(np.array([0.5, 0.5]), (z, z), shared_main=True)
        assert lrt_test(t, MixtureParams.single(z), alt).df == 29

    def test_top_expected_counts(self):
        t = BinaryTable(2, [3.0, 9.0, 3.0, 1.0])
        rows = top_expected_counts(t, {"ising": MixtureParams.single(IsingParams.zeros(2))}, top=3)
        assert [r["cell"] for r in rows] == ["01", "00", "10"]
        assert rows[0]["expected_ising"] == 4.0


def _summary(gamma):
    gamma = np.atleast_2d(gamma)
    K, P = gamma.shape
    d = int((1 + np.sqrt(1 + 8 * P)) / 2)
    return PosteriorSummary(K, d, True, PriorConfig(), gamma, np.full(K, 1 / K),
                            np.zeros_like(gamma), np.zeros(K), 1000, 2, 0)


class TestReport:
    def test_all_below_tau(self):
        dot = export_graph(_summary(np.full(6, 0.2)), 0, 0.5)
        assert dot.count("--") == 0
        assert all(f"  {v};" in dot for v in range(1, 5))
        assert dot.startswith("graph {")

    def test_edges_and_labels(self):
        g = np.array([0.9, 0.1, 0.505, 0.2, 0.3, 0.999])
        dot = export_graph(_summary(g), 0, 0.5)
        assert '1 -- 2 [label="0.90"]' in dot
        assert '1 -- 4 [label="0.51"]' in dot
        assert '3 -- 4 [label="1.00"]' in dot
        assert dot.count("--") == 3
        assert [e[:2] for e in significant_edges(_summary(g))] == [(1, 2), (1, 4), (3, 4)]

    def test_threshold_is_strict(self):
        assert significant_edges(_summary(np.array([0.5, 0.6, 0.1]))) == [(1, 3, 0.6)]

    def test_invalid_component_and_tau(self):
        with pytest.raises(IndexError):
            export_graph(_summary(np.full(3, 0.9)), 1)
        with pytest.raises(DomainError):
            export_graph(_summary(np.full(3, 0.9)), 0, 1.0)

    def test_report_json_stable(self):
        s = _summary(np.array([[0.9, 0.1, 0.7], [0.2, 0.8, 0.4]]))
        a = AnalysisReport.from_summary("fit", {"source": "x", "d": 3, "N": 10}, {"K": 2}, s)
        b = AnalysisReport.from_summary("fit", {"source": "x", "d": 3, "N": 10}, {"K": 2}, s)
        assert a.to_json() == b.to_json()
        doc = json.loads(a.to_json())
        assert doc["significant_edges"][1] == [{"pair": [1, 3], "gamma_mean": 0.8}]
        assert doc["settings"]["tau"] == 0.5
