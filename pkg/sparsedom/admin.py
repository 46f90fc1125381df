import logging
from django.contrib import admin
from django.utils.html import format_html
from django.db.models import Count
from .models import DominationRecord, ExperimentRun

logger = logging.getLogger(__name__)

# Shared helpers to truncate text and for the verdict badges

def _truncate(text, length=60):
    """Return text truncated to `length` chars with ellipsis if needed."""
    text = text or ""
    return text[:length] + "…" if len(text) > length else text


def _verdict_badge(passed, error=False):
    """
    pass  - every asserted inequality held
    fail  - some audit exceeded its proof constant
    error - the run raised before producing reports
    """
    colours = {
        "pass":  ("#16a34a", "#dcfce7"),
        "fail":  ("#dc2626", "#fee2e2"),
        "error": ("#6b7280", "#f3f4f6"),
    }
    key = "error" if error else ("pass" if passed else "fail")
    fg, bg = colours[key]
    return format_html(
        '<span style="background:{bg};color:{fg};padding:2px 10px;'
        'border-radius:12px;font-size:11px;font-weight:600;'
        'letter-spacing:.5px;">{label}</span>',
        bg=bg, fg=fg, label=key.upper(),
    )


def _constant(value, unbounded=False):
    if unbounded:
        return "∞"
    if value is None:
        return "—"
    return f"{value:.6g}"

# Admin site - uses the Default Django styling


admin.site.site_header = "Sparse Domination Lab Administration"
admin.site.site_title = "Sparse Domination Lab Admin"
admin.site.index_title = "Dashboard"


class DominationRecordInline(admin.TabularInline):
    model = DominationRecord
    extra = 0
    max_num = 50
    readonly_fields = ("seed", "inequality_id", "constant_display", "proof_display", "witness_leaf", "verdict")
    fields = ("seed", "inequality_id", "constant_display", "proof_display", "witness_leaf", "verdict")
    can_delete = False
    verbose_name = "Audited inequality"
    verbose_name_plural = "Audited inequalities"

    @admin.display(description="Constant")
    def constant_display(self, obj):
        return _constant(obj.best_constant, obj.unbounded)

    @admin.display(description="Proof constant")
    def proof_display(self, obj):
        return _constant(obj.proof_constant) if obj.proof_constant is not None else "reported"

    @admin.display(description="Verdict")
    def verdict(self, obj):
        return _verdict_badge(obj.passed)


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ("experiment", "seed", "depth", "reps", "ratio", "verdict", "record_count", "created_at")
    search_fields = ("experiment", "report_path")
    list_filter = ("experiment", "passed", "error_occurred", "created_at")
    readonly_fields = ("created_at", "report_path", "report")
    date_hierarchy = "created_at"
    ordering = ("-created_at",)
    list_per_page = 30
    inlines = [DominationRecordInline]

    fieldsets = (
        ("Experiment", {
            "fields": ("experiment", "seed", "depth", "reps", "ratio", "parameters"),
        }),
        ("Outcome", {
            "fields": ("passed", "report_count", "failed_count", "report_path"),
        }),
        ("Report", {
            "fields": ("report",),
            "classes": ("collapse",),
        }),
        ("Metadata", {
            "fields": ("is_complete", "error_occurred", "error_message", "created_at"),
        }),
    )

    @admin.display(description="Verdict", ordering="passed")
    def verdict(self, obj):
        return _verdict_badge(obj.passed, obj.error_occurred)

    @admin.display(description="Records", ordering="record_total")
    def record_count(self, obj):
        return getattr(obj, "record_total", obj.records.count())

    def get_queryset(self, request):
        return super().get_queryset(request).annotate(record_total=Count("records"))


@admin.register(DominationRecord)
class DominationRecordAdmin(admin.ModelAdmin):
    list_display = ("inequality_id", "run_link", "seed", "constant_display", "proof_constant", "verdict")
    search_fields = ("inequality_id", "run__experiment")
    list_filter = ("inequality_id", "passed", "unbounded")
    readonly_fields = ("run", "seed", "inequality_id", "best_constant", "unbounded", "proof_constant", "witness_leaf", "passed", "measured")
    ordering = ("-run__created_at", "seed")
    list_per_page = 40

    @admin.display(description="Run", ordering="run__experiment")
    def run_link(self, obj):
        return _truncate(str(obj.run), 40)

    @admin.display(description="Constant", ordering="best_constant")
    def constant_display(self, obj):
        return _constant(obj.best_constant, obj.unbounded)

    @admin.display(description="Verdict", ordering="passed")
    def verdict(self, obj):
        return _verdict_badge(obj.passed)
