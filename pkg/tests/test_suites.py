"""Test seeded verification suites."""

import pytest

import src.averages
import src.estimates
from src.config import Config, EngineConfig, SpreadingConfig, VerifyConfig
from src.errors import InputError
from src.norm import get_engine
from src.suites import (
    ORACLE_MIN_VECTORS,
    ORACLE_SUPPORT,
    ORACLE_SUPPORT_MODIFIED,
    SUITES,
    SuiteContext,
    oracle_vector_count,
    random_vector,
    run_suite,
)


@pytest.fixture
def config():
    """Default configuration with a short classification horizon."""
    return Config(spreading=SpreadingConfig(horizon=256))


class TestRunSuite:
    """Tests for run_suite dispatch and seeding."""

    def test_unknown_suite(self):
        """Test an unknown name raises InputError."""
        with pytest.raises(InputError):
            run_suite("nope")

    def test_same_seed_same_report(self, config):
        """Test a fixed seed reproduces the report."""
        first = run_suite("mss", config, seed=11, samples=5)
        second = run_suite("mss", config, seed=11, samples=5)
        assert first.to_json() == second.to_json()
        assert first.seed == 11

    def test_config_seed_is_default(self, config):
        """Test the configured seed is used when none is given."""
        report = run_suite("scc", config)
        assert report.seed == config.verify.seed

    def test_params_reach_the_suite(self, config):
        """Test extra parameters override suite defaults."""
        report = run_suite("height-fact", config, seed=1, samples=3, params={"M": 1})
        assert report.params["M"] == 1
        assert report.instances == 3

    def test_random_vector_respects_limits(self):
        """Test random vectors stay within the support bound."""
        ctx = SuiteContext("t", Config(), 1, 1)
        for _ in range(20):
            x = random_vector(ctx.rng, 4, positive=True)
            assert 1 <= len(x.support) <= 4
            assert all(c > 0 for _, c in x.items)


class TestSuitesPass:
    """Each suite passes on a small seeded run."""

    @pytest.mark.parametrize(
        "name,samples",
        [
            ("scc", 1),
            ("lp-identity", 1),
            ("modified-dominance", 3),
            ("x2", 3),
            ("height-fact", 3),
            ("mss", 5),
            ("delta", 1),
            ("classify", 1),
            ("prune", 3),
            ("regroup", 2),
            ("ave1", 5),
            ("restrict", 3),
        ],
    )
    def test_suite_passes(self, config, name, samples):
        """Test the suite reports a nonnegative worst slack."""
        report = run_suite(name, config, seed=3, samples=samples)
        assert report.lemma == name
        assert report.instances > 0
        assert report.passed, report.witness

    def test_every_suite_is_listed(self):
        """Test the registry holds the documented suites."""
        assert set(SUITES) == {
            "oracle",
            "duality",
            "scc",
            "lp-identity",
            "modified-dominance",
            "x2",
            "height-fact",
            "theta1",
            "restrict",
            "mss",
            "delta",
            "classify",
            "prune",
            "regroup",
            "ave1",
        }

    def test_scc_covers_every_case(self, config):
        """Test the special convex combination suite runs every case once."""
        report = run_suite("scc", config, seed=3, samples=1)
        assert report.instances == len(report.params["cases"])

    @pytest.mark.parametrize("name", ["oracle", "duality"])
    def test_oracle_suites_pass(self, config, name):
        """Test the oracle and duality suites pass on a fixed vector count."""
        report = run_suite(name, config, seed=3, samples=1, params={"vectors": 8})
        assert report.instances == 8
        assert report.passed, report.witness


class TestSuiteParameters:
    """Suites draw at the documented sizes and spaces."""

    def test_oracle_draws_at_least_the_minimum(self):
        """Test the default oracle run covers at least ORACLE_MIN_VECTORS vectors."""
        ctx = SuiteContext("oracle", Config(), 1, 10)
        assert oracle_vector_count(ctx) * 4 >= ORACLE_MIN_VECTORS
        assert ORACLE_SUPPORT == 7
        assert ORACLE_SUPPORT_MODIFIED == 6

    def test_oracle_count_follows_large_sample_counts(self):
        """Test more samples than the minimum raise the vector count."""
        ctx = SuiteContext("oracle", Config(), 1, 400)
        assert oracle_vector_count(ctx) == 100

    def test_x2_reaches_support_eight(self, config):
        """Test the x2 suite records support 8 on the modified space."""
        report = run_suite("x2", config, seed=3, samples=1)
        assert report.params["max_support"] == 8
        assert report.params["space"].startswith("T_M[")

    @pytest.mark.parametrize("name,samples", [("prune", 2), ("regroup", 1)])
    def test_tree_suites_use_modified_space(self, config, name, samples):
        """Test pruning and regrouping run in the modified space."""
        report = run_suite(name, config, seed=5, samples=samples)
        assert report.params["space"].startswith("T_M[")
        assert report.passed, report.witness

    def test_theta1_on_modified_space(self):
        """Test the theta1 suite checks built trees in the modified space."""
        config = Config(verify=VerifyConfig(family_cap=40, fallback_samples=5))
        report = run_suite("theta1", config, seed=2, samples=1)
        assert report.params["space"].startswith("T_M[")
        assert report.params["tree_eps"] == ["3/4", "1/2", "1/3"]
        assert report.instances > 0
        assert report.passed, report.witness


class TestEngineSettingsReachChecks:
    """Configured cap and precision reach the engines built by the checks."""

    @pytest.fixture
    def tuned(self):
        """Raised caps and a non-default precision."""
        return Config(cap_override=20, engine=EngineConfig(precision=96))

    def _spy(self, monkeypatch, module):
        calls = []

        def recording(spec, cap=None, precision=64, *rest):
            calls.append((cap, precision))
            return get_engine(spec, cap, precision, *rest)

        monkeypatch.setattr(module, "get_engine", recording)
        return calls

    def test_x2(self, monkeypatch, tuned):
        """Test verify_x2 engines use the override cap and configured precision."""
        calls = self._spy(monkeypatch, src.estimates)
        run_suite("x2", tuned, seed=1, samples=1)
        assert calls
        assert set(calls) == {(20, 96)}

    def test_height_fact(self, monkeypatch, tuned):
        """Test the height fact engine uses the override cap."""
        calls = self._spy(monkeypatch, src.estimates)
        run_suite("height-fact", tuned, seed=1, samples=1)
        assert set(calls) == {(20, 96)}

    def test_restrict(self, monkeypatch, tuned):
        """Test restriction checks norm bundles with the ambient space settings."""
        calls = self._spy(monkeypatch, src.averages)
        report = run_suite("restrict", tuned, seed=1, samples=1)
        assert report.params["space"] == "T[(S_n, 1/2^n)]"
        assert set(calls) == {(20, 96)}
