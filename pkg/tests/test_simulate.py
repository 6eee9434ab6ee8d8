"""
Unit tests for exact enumeration and population simulation.
"""

import json

import numpy as np
import pytest

from cmdesign.config import RNG_ALGORITHM
from cmdesign.errors import (
    ModelError,
    SharedSelectionUnsupported,
    StateSpaceTooLarge,
    UnknownNode,
)
from cmdesign.stats.estimation import causal_effect_plugin
from cmdesign.stats.model import saturated_binary_parametrization, tabular_model
from cmdesign.stats.simulate import (
    SimSpec,
    expected_frequencies,
    interventional_distribution,
    joint_table,
    metadata,
    simulate_dataset,
    write_metadata,
)

COLUMNS = ("X*", "Z*", "Y*")


def by_key(table):
    return {tuple(row[c] for c in COLUMNS): n for row, n in table.rows()}


@pytest.fixture
def case_control_model(fig1c):
    return saturated_binary_parametrization(fig1c, drop_ignorable=False)


class TestEnumeration:
    """Test cases for exact joint and interventional distributions."""

    def test_expected_frequencies_reproduce_data(self, case_control_model, case_control_params,
                                                 case_control_rows):
        """
        Test that the closed-form estimates reproduce the case-control counts.

        Verifies expected_frequencies for a population of 20000.
        """
        expected = by_key(expected_frequencies(case_control_model, case_control_params, 20000))

        assert expected.keys() == case_control_rows.keys()
        for key, n in case_control_rows.items():
            assert expected[key] == pytest.approx(n, abs=1e-6), key

    def test_joint_sums_to_one(self, case_control_model, case_control_params):
        """
        Test that the joint with data nodes is a distribution.

        Verifies joint_table with include_data.
        """
        joint = joint_table(case_control_model, case_control_params, include_data=True)

        assert joint.total() == pytest.approx(1.0)
        assert "X*" in joint.variables

    def test_ignorable_factor_required(self, fig1c, case_control_params):
        """
        Test that enumeration needs every selection factor.

        Verifies ModelError for a model without the first-stage factor.
        """
        model = saturated_binary_parametrization(fig1c)

        with pytest.raises(ModelError):
            joint_table(model, case_control_params)

    def test_interventional_distribution(self, fig1a):
        """
        Test that intervening fixes the treatment and keeps its descendants'
        mechanisms.

        Verifies truncated factorization on the front-door model.
        """
        model = tabular_model(fig1a)
        params = model.random_params(np.random.default_rng(5))

        dist = interventional_distribution(model, params, {"X": 1})

        assert dist.marginal(["X"]).value({"X": 1}) == pytest.approx(1.0)
        assert dist.marginal(["U"]).allclose(
            interventional_distribution(model, params, {}).marginal(["U"]))

    def test_intervention_on_projected_model(self, fig1c, case_control_params):
        """
        Test that intervening on a model without its confounder gives the
        causal effect, not the conditional.

        Verifies interventional_distribution goes through identification when
        latent variables were projected away.
        """
        model = saturated_binary_parametrization(fig1c)

        treated = interventional_distribution(model, case_control_params, {"X": 1})
        untreated = interventional_distribution(model, case_control_params, {"X": 0})

        assert model.projected_from is fig1c
        assert treated.total() == pytest.approx(1.0)
        assert treated.marginal(["X"]).value({"X": 1}) == pytest.approx(1.0)
        assert treated.marginal(["Y"]).value({"Y": 1}) == pytest.approx(0.4556, abs=0.002)
        assert untreated.marginal(["Y"]).value({"Y": 1}) == pytest.approx(0.4953, abs=0.002)
        assert treated.marginal(["Y"]).value({"Y": 1}) == pytest.approx(
            causal_effect_plugin(case_control_params, 1), abs=1e-9)

    def test_bad_interventions(self, fig1a):
        """
        Test that unknown nodes and values outside the domain are rejected.

        Verifies UnknownNode and ModelError.
        """
        model = tabular_model(fig1a)
        params = model.random_params(np.random.default_rng(5))

        with pytest.raises(UnknownNode):
            interventional_distribution(model, params, {"W": 1})
        with pytest.raises(ModelError):
            interventional_distribution(model, params, {"X": 2})

    def test_state_space_cap(self, case_control_model, case_control_params):
        """
        Test that enumeration stops above the cap.

        Verifies StateSpaceTooLarge.
        """
        with pytest.raises(StateSpaceTooLarge):
            joint_table(case_control_model, case_control_params, cap=4)


class TestSimulation:
    """Test cases for seeded population simulation."""

    def test_reproducible(self, case_control_model, case_control_params):
        """
        Test that the same seed gives the same population.

        Verifies chunked sampling with spawned generators.
        """
        spec = SimSpec(case_control_model, case_control_params, 5000, seed=3, chunk_size=700)

        first = simulate_dataset(spec)
        second = simulate_dataset(spec)

        assert by_key(first) == by_key(second)
        assert first.total() == 5000

    def test_seed_changes_draws(self, case_control_model, case_control_params):
        """
        Test that a different seed gives a different population.

        Verifies the seed reaches the generator.
        """
        a = simulate_dataset(SimSpec(case_control_model, case_control_params, 5000, seed=1))
        b = simulate_dataset(SimSpec(case_control_model, case_control_params, 5000, seed=2))

        assert by_key(a) != by_key(b)

    def test_close_to_expectation(self, case_control_model, case_control_params):
        """
        Test that the simulated design measures about 2000 of 20000.

        Verifies the selection mechanism of sampled data.
        """
        data = simulate_dataset(SimSpec(case_control_model, case_control_params, 20000, seed=9))

        measured = sum(n for row, n in data.rows() if row["X*"] is not None)
        assert measured == pytest.approx(2000, abs=200)
        assert set(data.columns) == set(COLUMNS)

    def test_mean_over_seeds_matches_expectation(self, case_control_model, case_control_params):
        """
        Test that the average of 200 seeded populations is within five
        standard errors of the exact expected counts, row by row.

        Verifies simulate_dataset against expected_frequencies.
        """
        n, seeds = 2000, 200
        expected = by_key(expected_frequencies(case_control_model, case_control_params, n))
        totals = dict.fromkeys(expected, 0.0)
        for seed in range(seeds):
            drawn = by_key(simulate_dataset(
                SimSpec(case_control_model, case_control_params, n, seed=seed)))
            assert set(drawn) <= set(expected)
            for key, count in drawn.items():
                totals[key] += count

        for key, mean in expected.items():
            p = mean / n
            se = np.sqrt(n * p * (1 - p) / seeds)
            assert totals[key] / seeds == pytest.approx(mean, abs=5 * se), key

    def test_shared_selection(self, nestedcc):
        """
        Test that a selection depending on other individuals is refused.

        Verifies SharedSelectionUnsupported.
        """
        model = tabular_model(nestedcc)
        params = model.random_params(np.random.default_rng(0))

        with pytest.raises(SharedSelectionUnsupported) as e:
            simulate_dataset(SimSpec(model, params, 100))
        assert e.value.exit_code == 4

    def test_invalid_spec(self, case_control_model, case_control_params):
        """
        Test that bad sizes and parameters are rejected up front.

        Verifies SimSpec validation.
        """
        with pytest.raises(ModelError):
            SimSpec(case_control_model, case_control_params, 0)
        with pytest.raises(ModelError):
            SimSpec(case_control_model, {**case_control_params, "theta_X": -0.2}, 10)
        with pytest.raises(ModelError):
            SimSpec(case_control_model, {"theta_X": 0.5}, 10)


class TestMetadata:
    """Test cases for the reproducibility record."""

    def test_fields(self, case_control_model, case_control_params):
        """
        Test that the record names seed, generator and spec hash.

        Verifies metadata contents.
        """
        spec = SimSpec(case_control_model, case_control_params, 100, seed=42)

        meta = metadata(spec)

        assert meta["seed"] == 42
        assert meta["generator"] == RNG_ALGORITHM
        assert meta["numpy_version"] == np.__version__
        assert len(meta["spec_hash"]) == 64

    def test_hash_tracks_parameters(self, case_control_model, case_control_params):
        """
        Test that the hash changes with the parameters but not the seed.

        Verifies spec_hash inputs.
        """
        base = metadata(SimSpec(case_control_model, case_control_params, 100, seed=1))
        reseeded = metadata(SimSpec(case_control_model, case_control_params, 100, seed=2))
        moved = metadata(SimSpec(case_control_model,
                                 {**case_control_params, "theta_X": 0.4}, 100, seed=1))

        assert base["spec_hash"] == reseeded["spec_hash"]
        assert base["spec_hash"] != moved["spec_hash"]

    def test_written_as_json(self, tmp_path, case_control_model, case_control_params):
        """
        Test that the record is written as JSON.

        Verifies write_metadata.
        """
        path = tmp_path / "sim.meta.json"

        write_metadata(path, SimSpec(case_control_model, case_control_params, 100, seed=7))

        assert json.loads(path.read_text(encoding="utf-8"))["seed"] == 7
