import tempfile
from fractions import Fraction
from pathlib import Path

from django.core.exceptions import ValidationError
from django.test import SimpleTestCase, override_settings

from sparsedom.experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    coerce_param,
    parse_config_text,
    parse_ratio,
    run_experiment,
)
from sparsedom.reporting import load_report, validate_report


def counterexample_config(**overrides):
    params = {"layers": "0", "tn_sizes": "3"}
    params.update(overrides.pop("params", {}))
    return ExperimentConfig.from_sources(experiment="counterexample", params=params, **overrides)


class ConfigTextTests(SimpleTestCase):
    def test_comments_and_later_keys(self):
        text = "# run\nexperiment = theoremB\n\n--Depth = 6\ndepth = 8\nper-layer-n = 3\n"
        self.assertEqual(parse_config_text(text), {"experiment": "theoremB", "depth": "8", "per_layer_n": "3"})

    def test_lines_without_separator(self):
        with self.assertRaises(ValidationError):
            parse_config_text("experiment theoremB")

    def test_ratios(self):
        self.assertEqual(parse_ratio("1/10"), Fraction(1, 10))
        self.assertEqual(parse_ratio("0.25"), Fraction(1, 4))
        for bad in ("1", "0", "x", "1/0"):
            with self.assertRaises(ValueError):
                parse_ratio(bad)

    def test_params_follow_their_defaults(self):
        self.assertEqual(coerce_param("3;4", (3, 4, 5)), (3, 4))
        self.assertEqual(coerce_param("1/2", 1.0), 0.5)
        self.assertEqual(coerce_param("7", 0), 7)
        self.assertTrue(coerce_param("yes", False))
        self.assertEqual(coerce_param("0:0,1:2", "0:0"), "0:0,1:2")
        with self.assertRaises(ValueError):
            coerce_param("maybe", True)


class ExperimentConfigTests(SimpleTestCase):
    def test_file_then_flags(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "run.conf"
            path.write_text("experiment = theoremB\ndepth = 6\nr = 1/4\nintervals = 12\n")
            config = ExperimentConfig.from_sources(path, depth="8", seed=None)
        self.assertEqual(config.depth, 8)
        self.assertEqual(config.r, Fraction(1, 4))
        self.assertEqual(config.seed, 0)
        self.assertEqual(config.params, {"intervals": "12"})

    def test_missing_file(self):
        with self.assertRaises(ValidationError):
            ExperimentConfig.from_sources("/nonexistent/run.conf")

    def test_every_field_error_is_listed(self):
        with self.assertRaises(ValidationError) as caught:
            ExperimentConfig.from_sources(depth="deep", r="2")
        self.assertEqual(set(caught.exception.message_dict), {"experiment", "depth", "r"})

    def test_unknown_experiment(self):
        with self.assertRaises(ValidationError):
            ExperimentConfig.from_sources(experiment="theoremC").validate()

    @override_settings(SPARSEDOM_MAX_DEPTH=12)
    def test_depth_and_format_checks(self):
        config = ExperimentConfig.from_sources(experiment="theoremB", depth="13", seed="-1", format="xml")
        with self.assertRaises(ValidationError) as caught:
            config.validate()
        self.assertEqual(set(caught.exception.message_dict), {"depth", "seed", "format"})

    def test_bad_parameter(self):
        with self.assertRaises(ValidationError):
            counterexample_config(params={"layers": "two"}).validate()

    def test_experiment_checks_become_config_errors(self):
        with self.assertRaises(ValidationError):
            counterexample_config(params={"c0": "-1"}).validate()

    def test_defaults_resolve(self):
        config = ExperimentConfig.from_sources(experiment="stopping-mt", reps="3", seed="5")
        context = config.validate()
        self.assertEqual(context.depth, EXPERIMENTS["stopping-mt"].depth)
        self.assertEqual(config.seeds, [5, 6, 7])
        self.assertEqual(context.ratio(Fraction(1, 2)), 0.5)

    def test_unseeded_experiments_run_once(self):
        self.assertEqual(counterexample_config(reps="4", seed="2").seeds, [2])


class RunExperimentTests(SimpleTestCase):
    def test_counterexample_run(self):
        result = run_experiment(counterexample_config(), record=False, write=False)
        self.assertTrue(result.passed)
        self.assertIsNone(result.path)
        self.assertEqual(
            sorted(result.payload["summary"]),
            ["counterexample-forced-set", "tn-large-averages", "tn-preserved-mean", "tn-vanishing-left"],
        )
        self.assertEqual(len(validate_report(result.payload)), 4)

    def test_same_seed_same_report(self):
        first = run_experiment(counterexample_config(), record=False, write=False).payload
        second = run_experiment(counterexample_config(), record=False, write=False).payload
        first.pop("generated_at")
        second.pop("generated_at")
        self.assertEqual(first, second)

    def test_report_is_written(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "counterexample.json"
            result = run_experiment(counterexample_config(out=str(out)), record=False)
            self.assertEqual(result.path, out)
            self.assertEqual(load_report(out)["experiment"], "counterexample")

    def test_invalid_config_runs_nothing(self):
        with self.assertRaises(ValidationError):
            run_experiment(counterexample_config(params={"layers": "-1"}), record=False, write=False)
