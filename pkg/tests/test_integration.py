"""Integration tests for tsirelson-norms."""

import json
from fractions import Fraction

import pytest


class TestAveragingPipeline:
    """Averaging trees flowing into restriction, functionals and estimates."""

    def test_build_restrict_and_norm_bundles(self):
        """Test bundles of a restricted tree have norm at most 1 in T[(S_n, 2^-n)]."""
        from src.averages import BasisSupply, build_averaging_tree, check_restriction, restrict_average
        from src.spaces import mixed_schreier

        tree = build_averaging_tree(BasisSupply(1), 1, Fraction(1, 2), power_of_two=True)
        restricted = restrict_average(tree, [1], level=1)
        report = check_restriction(tree, restricted, mixed_schreier())
        assert report.ok
        assert all(value.certainly_le(1) for value in report.bundle_norms)

    def test_tree_certificate_feeds_estimates(self):
        """Test a built tree's certificate passes the allowable-splitting bound."""
        from src.averages import BasisSupply, build_averaging_tree
        from src.estimates import verify_theta1
        from src.spaces import mixed_schreier

        tree = build_averaging_tree(BasisSupply(1), 1, Fraction(3, 4))
        report = verify_theta1(tree, 0, mixed_schreier(), seed=1)
        assert report.passed
        assert report.params["M"] == 1

    def test_antichain_functional_evaluates(self):
        """Test an antichain functional of a tree is valid and evaluates on its root."""
        from src.averages import BasisSupply, antichain_functional, build_averaging_tree
        from src.enclosure import Enclosure
        from src.trees import evaluate

        tree = build_averaging_tree(BasisSupply(1), 1, Fraction(3, 4))
        f = antichain_functional(tree, [(0, 1), (0, 2), (0, 3)], Fraction(1, 2))
        assert evaluate(f, tree.root.vector).same_value(Enclosure.exact(Fraction(1, 2)))


class TestFunctionalPipeline:
    """Norming functionals flowing into tree transformations."""

    def test_regroup_norming_functional(self):
        """Test regrouping a norming functional keeps it valid and keeps its value."""
        from src.estimates import regroup_node
        from src.norm import get_engine
        from src.spaces import tsirelson
        from src.trees import Node, evaluate, validate_tree
        from src.vectors import BlockVector

        spec = tsirelson()
        x = BlockVector.ones(range(3, 9))
        engine = get_engine(spec)
        f = engine.norming_functional(x)
        assert evaluate(f, x).same_value(engine.norm(x))
        for path, node, _ in list(f.walk()):
            if isinstance(node, Node):
                order = f.order(path)
                for k in range(order, order + node.weight_index + 1):
                    g = regroup_node(f, path, k)
                    assert validate_tree(g) == []
                    assert evaluate(g, x).same_value(evaluate(f, x))

    def test_functional_json_round_trip(self):
        """Test a norming functional re-parses and evaluates the same."""
        from src.norm import get_engine
        from src.spaces import mixed_schreier
        from src.trees import NormingTree, evaluate
        from src.vectors import BlockVector

        spec = mixed_schreier()
        x = BlockVector.from_mapping({2: 1, 3: -1, 5: Fraction(1, 2)})
        f = get_engine(spec).norming_functional(x)
        again = NormingTree.from_json(json.loads(json.dumps(f.to_json())))
        assert evaluate(again, x).same_value(evaluate(f, x))


class TestCommandLinePipeline:
    """CLI commands chained through files."""

    def test_verify_then_merge(self, tmp_path, capsys):
        """Test suite reports written with --out merge into a pass matrix."""
        from src.main import run

        files = []
        for suite in ("scc", "lp-identity"):
            out = tmp_path / f"{suite}.json"
            assert run(["verify", suite, "--seed", "3", "--out", str(out)]) == 0
            files.append(str(out))
        capsys.readouterr()
        assert run(["report-merge", *files]) == 0
        merged = json.loads(capsys.readouterr().out)
        assert merged["pass"] is True
        assert set(merged["matrix"]) == {"scc", "lp-identity"}

    def test_merge_output_merges_again(self, tmp_path, capsys):
        """Test a merged report can be merged with further reports."""
        from src.main import run

        report = tmp_path / "mss.json"
        assert run(["verify", "mss", "--seed", "2", "--samples", "3", "--out", str(report)]) == 0
        merged = tmp_path / "merged.json"
        assert run(["report-merge", str(report), "--out", str(merged)]) == 0
        assert run(["report-merge", str(merged), str(report)]) == 0
        data = json.loads(capsys.readouterr().out)
        assert len(data["reports"]) == 1
        first = json.loads(report.read_text())
        assert data["instances"] == 2 * first["instances"]

    def test_logs_go_to_configured_directory(self, tmp_path, capsys):
        """Test a config with log_dir writes JSON log lines for commands."""
        from src.config import LoggingConfig
        from src.logging import setup_logging
        from src.main import run

        config_file = tmp_path / "config.yaml"
        config_file.write_text(f"logging:\n  log_dir: {tmp_path / 'logs'}\n  format: json\n")
        assert run(["rank", "--set", "2,3", "--config", str(config_file)]) == 0
        setup_logging(LoggingConfig())
        lines = (tmp_path / "logs" / "tsirelson.log").read_text().splitlines()
        records = [json.loads(line) for line in lines]
        assert any(r.get("command") == "rank" for r in records)

    @pytest.mark.parametrize("preset", ["tsirelson", "mixed-schreier", "modified-mixed-schreier", "power-law"])
    def test_norm_matches_functional(self, preset, capsys):
        """Test norm and functional agree for every preset on a small vector."""
        from src.main import run

        vec = '{"coeffs": {"3": "1", "4": "-1/2", "6": "1"}}'
        assert run(["norm", "--spec", preset, "--vec", vec]) == 0
        norm = json.loads(capsys.readouterr().out)["norm"]
        assert run(["functional", "--spec", preset, "--vec", vec]) == 0
        functional = json.loads(capsys.readouterr().out)
        assert functional["norm"] == norm
