from django.db import models
from django.utils import timezone


class BenchRun(models.Model):
    """
    One ``sat bench`` invocation: the bands it covered and the per-band
    summary computed from its rows.
    """
    created_at = models.DateTimeField(default=timezone.now)
    bands = models.JSONField(default=list, blank=True)
    workers = models.PositiveIntegerField(default=1)
    variables = models.PositiveIntegerField(default=0)
    summary = models.JSONField(default=list, blank=True)

    class Meta:
        db_table = 'rcm_bench_runs'
        ordering = ['-created_at']

    def __str__(self):
        return f"BenchRun {self.pk} ({', '.join(self.bands)})"

    @property
    def accuracy(self):
        rows = list(self.rows.all())
        if not rows:
            return None
        return sum(row.verdict == row.oracle_verdict for row in rows) / len(rows)


class BenchRow(models.Model):
    """A single solved instance of a benchmark run"""
    run = models.ForeignKey(
        BenchRun,
        on_delete=models.CASCADE,
        related_name='rows'
    )
    instance_id = models.CharField(max_length=255)
    band = models.CharField(max_length=32, db_index=True)
    verdict = models.CharField(max_length=64)
    oracle_verdict = models.CharField(max_length=8)
    trajectory_tokens = models.PositiveIntegerField()
    max_active_context = models.PositiveIntegerField()
    max_depth = models.PositiveIntegerField()
    steps = models.PositiveIntegerField()
    wall_time = models.FloatField()

    class Meta:
        db_table = 'rcm_bench_rows'
        ordering = ['run', 'instance_id']
        unique_together = ['run', 'instance_id']
        indexes = [
            models.Index(fields=['run', 'band'], name='rcm_bench_run_band_idx'),
        ]

    def __str__(self):
        return f"{self.instance_id} [{self.band}] -> {self.verdict}"
