#sparsedom/models.py
from django.db import models


class ExperimentRun(models.Model):
    #One invocation of the experiment runner
    experiment = models.CharField(max_length=64)
    seed = models.IntegerField(default=0)
    depth = models.IntegerField(default=0)
    reps = models.IntegerField(default=1)
    ratio = models.CharField(max_length=32, blank=True, help_text="r as written, e.g. 1/10")
    parameters = models.JSONField(default=dict)

    #for the Outcome
    passed = models.BooleanField(default=False)
    report_count = models.IntegerField(default=0)
    failed_count = models.IntegerField(default=0)
    report_path = models.CharField(max_length=500, blank=True)
    report = models.JSONField(default=dict, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    #for the Metadata
    is_complete = models.BooleanField(default=False)
    error_occurred = models.BooleanField(default=False)
    error_message = models.TextField(blank=True)

    class Meta:
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['experiment'], name='sparsedom_e_experim_5c1f0a_idx'),
            models.Index(fields=['created_at'], name='sparsedom_e_created_8d2b41_idx'),
        ]

    def __str__(self):
        verdict = "pass" if self.passed else "fail"
        return f"{self.experiment} seed {self.seed} ({verdict})"


class DominationRecord(models.Model):
    #One audited inequality lhs <= C * rhs inside a run
    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='records')
    seed = models.IntegerField(default=0)
    inequality_id = models.CharField(max_length=100)
    best_constant = models.FloatField(null=True, blank=True, help_text="Null when unbounded")
    unbounded = models.BooleanField(default=False)
    proof_constant = models.FloatField(null=True, blank=True, help_text="Null when reported only")
    witness_leaf = models.IntegerField(null=True, blank=True)
    passed = models.BooleanField(default=False)
    measured = models.JSONField(default=dict, blank=True)

    class Meta:
        indexes = [
            models.Index(fields=['inequality_id'], name='sparsedom_d_inequal_3a9e77_idx'),
        ]

    def __str__(self):
        constant = "inf" if self.unbounded else f"{self.best_constant:.6g}"
        return f"{self.inequality_id}: {constant}"
