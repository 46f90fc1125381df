"""
Management command: sparsedom
=============================
Runs one registered experiment and writes its report.

Usage
-----
    python manage.py sparsedom theoremB --depth 8 --reps 100
    python manage.py sparsedom percentile-weak-type --r 1/10 --out reports/weak.json
    python manage.py sparsedom weighted-sharpness-flat --param p=2 --format csv
    python manage.py sparsedom stopping-mt --config runs/stopping.conf --seed 7

Exit codes: 0 when every asserted inequality holds, 1 on an audit failure,
2 on a config error. Flags override values read from --config.
"""

import logging

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from sparsedom.experiments import EXPERIMENTS, ExperimentConfig, run_experiment
from sparsedom.reporting import FORMATS

logger = logging.getLogger(__name__)

AUDIT_FAILURE = 1
CONFIG_ERROR = 2


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ValueError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


def _messages(error: ValidationError):
    if hasattr(error, "error_dict"):
        return [f"{field}: {message}" for field, items in sorted(error.message_dict.items()) for message in items]
    return list(error.messages)


class Command(BaseCommand):
    help = "Run a sparse domination experiment and write its report"

    def add_arguments(self, parser):
        parser.add_argument("experiment", nargs="?", help=f"one of: {', '.join(EXPERIMENTS)}")
        parser.add_argument("--depth", help="grid depth N")
        parser.add_argument("--r", help="ratio r, fractions such as 1/10 allowed")
        parser.add_argument("--seed", help="first seed")
        parser.add_argument("--reps", help="number of seeds")
        parser.add_argument("--out", help="report path")
        parser.add_argument("--config", help="plain-text key = value config file")
        parser.add_argument("--operator", help="operator spec (JSON)")
        parser.add_argument("--weight", help="weight spec (JSON)")
        parser.add_argument("--format", choices=FORMATS, help="report format")
        parser.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                            help="experiment parameter, repeatable")
        parser.add_argument("--no-record", action="store_true", help="skip saving the run to the database")
        parser.add_argument("--list", action="store_true", help="list the experiments and exit")

    def handle(self, *args, **options):
        if options["list"]:
            for experiment in EXPERIMENTS.values():
                self.stdout.write(f"{experiment.id:26s} {experiment.description}")
            return

        try:
            params = dict(_param(item) for item in options["param"])
            config = ExperimentConfig.from_sources(
                options["config"],
                experiment=options["experiment"],
                depth=options["depth"],
                r=options["r"],
                seed=options["seed"],
                reps=options["reps"],
                out=options["out"],
                operator=options["operator"],
                weight=options["weight"],
                format=options["format"],
                params=params,
            )
            self.stdout.write(f"Running {config.experiment}...")
            result = run_experiment(config, record=not options["no_record"])
        except ValidationError as exc:
            for message in _messages(exc):
                self.stderr.write(self.style.ERROR(message))
            raise CommandError("Invalid experiment config", returncode=CONFIG_ERROR) from exc
        except ValueError as exc:
            raise CommandError(f"Invalid experiment config: {exc}", returncode=CONFIG_ERROR) from exc

        for inequality_id, entry in result.payload["summary"].items():
            proof = entry["proof_constant"]
            line = f"   {inequality_id:32s} C = {entry['best_constant']}  (proof {proof if proof is not None else 'reported'})"
            self.stdout.write(line if entry["passed"] else self.style.WARNING(line))
        if result.path is not None:
            self.stdout.write(f"   Report            : {result.path}")

        if not result.passed:
            failed = ", ".join(sorted({report.inequality_id for report in result.failures}))
            raise CommandError(f"Audit failed: {failed}", returncode=AUDIT_FAILURE)
        self.stdout.write(self.style.SUCCESS(f"{config.experiment} passed"))
