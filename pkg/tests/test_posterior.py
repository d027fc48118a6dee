import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from bisect_bayes import (
    BetaBernoulli,
    EdgeModel,
    FixedBernoulli,
    Graph,
    LabelVector,
    McmcConfig,
    UniformClassSize,
    canonicalize,
    class_size_marginal,
    enumerate_labelings,
    exact_posterior,
    log_prior_mass,
    mcmc_posterior,
    posterior_mass,
    posterior_mode,
    sample_graph,
)
from bisect_bayes.model import canonical_words
from bisect_bayes.posterior import (
    PosteriorTable,
    within_edge_counts,
    within_edge_counts_gray,
)

UNIFORM = FixedBernoulli(0.5)


class TestWithinEdgeCounts:
    @pytest.mark.parametrize("n", [2, 3, 5, 8, 10, 12])
    def test_gray_walk_matches_baseline_exactly(self, n):
        model = EdgeModel(0.6, 0.25)
        for seed in range(3):
            g = sample_graph(LabelVector(n, 0), model, seed)
            words, _ = canonical_words(n)
            assert np.array_equal(within_edge_counts(g, words), within_edge_counts_gray(g))


class TestExactPosterior:
    def test_p_equals_q_returns_prior(self):
        model = EdgeModel(0.4, 0.4)
        g = sample_graph(LabelVector.from_string("000111"), model, 2)
        for prior in [UNIFORM, BetaBernoulli(2.0, 1.0), UniformClassSize()]:
            table = exact_posterior(g, prior, model)
            for theta, prob in table.items():
                assert prob == pytest.approx(
                    math.exp(log_prior_mass(theta, prior)), rel=1e-10
                )

    def test_n1_point_mass(self):
        table = exact_posterior(Graph(1, []), UNIFORM, EdgeModel(0.5, 0.5))
        assert len(table) == 1
        assert table.probabilities[0] == pytest.approx(1.0, abs=1e-15)

    def test_matches_rational_oracle_n4(self):
        # exact rational posterior with Fraction arithmetic
        p, q = Fraction(9, 10), Fraction(1, 10)
        model = EdgeModel(float(p), float(q))
        theta0 = LabelVector.from_string("0011")
        g = sample_graph(theta0, model, 31)
        present = set(g.edges)

        def rational_likelihood(bits):
            value = Fraction(1)
            for i in range(4):
                for j in range(i + 1, 4):
                    prob = p if bits[i] == bits[j] else q
                    value *= prob if (i, j) in present else 1 - prob
            return value

        labs = list(enumerate_labelings(4))
        masses = {t: Fraction(1, 8) * rational_likelihood(t.bits) for t in labs}
        total = sum(masses.values())
        table = exact_posterior(g, UNIFORM, model)
        for t in labs:
            assert table.probability(t) == pytest.approx(
                float(masses[t] / total), rel=1e-12
            )

    @pytest.mark.parametrize("n", [2, 5, 8, 12])
    @pytest.mark.parametrize(
        "prior", [UNIFORM, FixedBernoulli(0.3), BetaBernoulli(1.5, 2.5), UniformClassSize()]
    )
    def test_normalization_and_support(self, n, prior):
        model = EdgeModel(0.7, 0.2)
        g = sample_graph(LabelVector(n, 0), model, 77)
        table = exact_posterior(g, prior, model)
        assert len(table) == 1 << (n - 1)
        assert abs(float(table.probabilities.sum()) - 1.0) < 1e-10
        assert (table.probabilities >= 0).all()

    def test_cap_guard(self):
        with pytest.raises(ValueError):
            exact_posterior(Graph(23, []), UNIFORM, EdgeModel(0.5, 0.4))

    def test_relabeling_invariance(self):
        # permuting vertices of graph and planted labeling together leaves
        # the planted labeling's mass unchanged
        model = EdgeModel(0.8, 0.2)
        theta0 = LabelVector.from_string("0010110")
        g = sample_graph(theta0, model, 13)
        base = exact_posterior(g, BetaBernoulli(1, 1), model).probability(theta0)
        rng = np.random.default_rng(4)
        for _ in range(5):
            perm = rng.permutation(7).tolist()
            relabeled = g.relabel(perm)
            bits = [0] * 7
            for i, b in enumerate(theta0.bits):
                bits[perm[i]] = b
            image = canonicalize(bits)
            moved = exact_posterior(relabeled, BetaBernoulli(1, 1), model)
            assert moved.probability(image) == pytest.approx(base, rel=1e-10)


class TestPosteriorMass:
    @pytest.fixture()
    def table(self):
        model = EdgeModel(0.85, 0.15)
        theta0 = LabelVector.from_string("00001111")
        return exact_posterior(sample_graph(theta0, model, 3), UNIFORM, model)

    def test_everything_is_one(self, table):
        assert posterior_mass(table, lambda t: True) == pytest.approx(1.0, abs=1e-10)

    def test_full_ball_is_one(self, table):
        center = LabelVector.from_string("00001111")
        assert table.mass_of_ball(center, 8) == pytest.approx(1.0, abs=1e-10)

    def test_ball_matches_predicate(self, table):
        from bisect_bayes import sym_distance

        center = LabelVector.from_string("00011011")
        for k in range(1, 5):
            direct = posterior_mass(table, lambda t: sym_distance(t, center) < k)
            assert table.mass_of_ball(center, k) == pytest.approx(direct, abs=1e-12)

    def test_class_size_predicate(self, table):
        direct = posterior_mass(table, lambda t: t.m == 2)
        assert table.mass_of_class_size(2) == pytest.approx(direct, abs=1e-12)

    def test_empty_class_unlikely_on_assortative_graphs(self):
        # strongly assortative draws leave almost no mass on the
        # single-community labeling
        model = EdgeModel(0.9, 0.1)
        theta0 = LabelVector.from_string("0000011111")
        small = 0
        reps = 200
        for seed in range(reps):
            g = sample_graph(theta0, model, seed)
            table = exact_posterior(g, UNIFORM, model)
            if table.mass_of_class_size(0) < 0.01:
                small += 1
        assert small >= 0.95 * reps


class TestPosteriorMode:
    def test_point_mass_table(self):
        model = EdgeModel(0.9, 0.1)
        theta0 = LabelVector.from_string("0000011111")
        table = exact_posterior(sample_graph(theta0, model, 8), UNIFORM, model)
        assert table.mode() == theta0

    def test_tie_breaks_lexicographically(self):
        model = EdgeModel(0.5, 0.5)
        g = sample_graph(LabelVector.from_string("000111"), model, 1)
        table = exact_posterior(g, UNIFORM, model)
        assert table.mode() == LabelVector.from_string("000000")

    def test_scaling_invariance(self):
        model = EdgeModel(0.8, 0.3)
        g = sample_graph(LabelVector.from_string("000111"), model, 5)
        table = exact_posterior(g, UNIFORM, model)
        scaled = PosteriorTable(
            table.n, table.words, table.class_sizes, table.log_unnormalized + 123.45
        )
        assert scaled.mode() == table.mode()
        assert np.allclose(scaled.probabilities, table.probabilities, atol=1e-12)

    def test_mode_recovers_planted_labeling(self):
        model = EdgeModel(0.9, 0.05)
        theta0 = LabelVector.from_string("0000011111")
        hits = 0
        reps = 200
        for seed in range(reps):
            g = sample_graph(theta0, model, seed)
            if exact_posterior(g, UNIFORM, model).mode() == theta0:
                hits += 1
        assert hits >= 0.95 * reps

    def test_mode_from_samples(self):
        a = LabelVector.from_string("0011")
        b = LabelVector.from_string("0101")
        assert posterior_mode([a, b, b]) == b
        assert posterior_mode([a, b]) == a  # tie: lexicographically smaller


class TestCsvOutput:
    def test_sorted_by_probability_then_labeling(self, tmp_path):
        import csv

        model = EdgeModel(0.75, 0.2)
        g = sample_graph(LabelVector.from_string("00011"), model, 9)
        table = exact_posterior(g, UNIFORM, model)
        path = tmp_path / "post.csv"
        with open(path, "w", newline="") as f:
            table.write_csv(f)
        with open(path) as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 16
        probs = [float(r["probability"]) for r in rows]
        assert probs == sorted(probs, reverse=True)
        assert sum(probs) == pytest.approx(1.0, abs=1e-10)
        keys = [(-float(r["probability"]), r["labeling"]) for r in rows]
        assert keys == sorted(keys)


class TestMcmc:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            McmcConfig(burn_in=0, samples=10, thin=1, seed=0)
        with pytest.raises(ValueError):
            McmcConfig(burn_in=1, samples=0, thin=1, seed=0)

    def test_default_config(self):
        cfg = McmcConfig.default(10, seed=3)
        assert (cfg.burn_in, cfg.samples, cfg.thin) == (1000, 10_000, 10)

    def test_deterministic_given_seed(self):
        model = EdgeModel(0.7, 0.3)
        g = sample_graph(LabelVector.from_string("000111"), model, 4)
        cfg = McmcConfig(burn_in=50, samples=500, thin=2, seed=11)
        r1 = mcmc_posterior(g, UNIFORM, model, cfg)
        r2 = mcmc_posterior(g, UNIFORM, model, cfg)
        assert r1.samples == r2.samples

    def test_samples_are_canonical(self):
        model = EdgeModel(0.6, 0.3)
        g = sample_graph(LabelVector.from_string("0000011111"), model, 6)
        cfg = McmcConfig(burn_in=100, samples=2000, thin=1, seed=2)
        result = mcmc_posterior(g, UniformClassSize(), model, cfg)
        assert len(result.samples) == 2000
        for s in result.samples[:50]:
            assert 2 * s.m <= 10
            assert isinstance(s, LabelVector)

    def test_uninformative_case_matches_folded_binomial(self):
        # with p == q and the uniform prior the posterior equals the prior,
        # whose class-size law is a folded Binomial(n, 1/2)
        n = 10
        model = EdgeModel(0.3, 0.3)
        g = sample_graph(LabelVector.from_string("0" * n), model, 12)
        cfg = McmcConfig(burn_in=1000, samples=100_000, thin=2, seed=9)
        result = mcmc_posterior(g, UNIFORM, model, cfg)
        target = class_size_marginal(UNIFORM, n)
        tv = 0.5 * float(np.abs(result.class_size_probabilities - target).sum())
        assert tv < 0.05

    def test_marginals_match_enumeration(self):
        model = EdgeModel(0.85, 0.15)
        theta0 = LabelVector.from_string("0000011111")
        g = sample_graph(theta0, model, 7)
        table = exact_posterior(g, UNIFORM, model)
        result = mcmc_posterior(g, UNIFORM, model, McmcConfig.default(10, seed=5))
        err = np.abs(
            result.inclusion_probabilities - table.inclusion_probabilities()
        ).max()
        assert err < 0.02

    def test_flow_balance(self):
        # reversibility: transitions a->b and b->a occur equally often in
        # a stationary run, up to Monte Carlo noise
        model = EdgeModel(0.7, 0.3)
        theta0 = LabelVector.from_string("00011")
        g = sample_graph(theta0, model, 21)
        cfg = McmcConfig(burn_in=2000, samples=150_000, thin=1, seed=5)
        result = mcmc_posterior(g, UNIFORM, model, cfg)
        words = result.sampled_words()
        trans = Counter(zip(words[:-1], words[1:]))
        checked = 0
        for (a, b), n_ab in trans.items():
            if a >= b:
                continue
            n_ba = trans.get((b, a), 0)
            total = n_ab + n_ba
            if total < 64:
                continue
            assert abs(n_ab - n_ba) <= 5.0 * math.sqrt(total)
            checked += 1
        assert checked > 10
