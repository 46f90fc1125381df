# sparsedom/management/commands/generate_run_summary.py
from django.core.management.base import BaseCommand, CommandError
from sparsedom.runs import DEFAULT_SUMMARY_DAYS, summarize_runs


class Command(BaseCommand):
    help = 'Summarize persisted experiment runs: pass rate and worst constants'

    def add_arguments(self, parser):
        parser.add_argument("--days", type=int, default=DEFAULT_SUMMARY_DAYS)

    def handle(self, *args, **options):
        days = options["days"]
        if days < 1:
            raise CommandError(f"--days must be at least 1, got {days}")
        self.stdout.write(f"Summarizing runs over the last {days} day(s)...")
        summary = summarize_runs(days)

        if not summary:
            self.stdout.write(self.style.WARNING("No runs in the window"))
            return

        for experiment, entry in summary.items():
            style = self.style.SUCCESS if entry["passed"] == entry["runs"] else self.style.WARNING
            self.stdout.write(style(
                f"{experiment}: {entry['passed']}/{entry['runs']} passed "
                f"({entry['pass_rate']:.1%}), {entry['errors']} error(s)"
            ))
            for inequality_id, constant in sorted(entry["worst_constants"].items()):
                self.stdout.write(f"   {inequality_id:32s} worst C = {constant:.6g}")
            for inequality_id in entry["unbounded"]:
                self.stdout.write(self.style.ERROR(f"   {inequality_id:32s} unbounded"))
