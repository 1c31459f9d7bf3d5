from django.db import models, transaction

from .constants import CAMPAIGN_KINDS


# 캠페인 매니저
class CampaignManager(models.Manager):
    def create_from_report(self, report):
        """Store a ConvergenceReport and its rows in one transaction."""
        payload = report.to_json()
        with transaction.atomic():
            campaign = self.create(
                kind=report.kind,
                name=payload["config"].get("name", ""),
                config=payload["config"],
                seed=payload["config"]["seed"],
                mode_count=payload["summary"].get("mode_count", 0),
                summary=payload["summary"],
                passed=report.passed,
            )
            ReportRow.objects.bulk_create([ReportRow(campaign=campaign, **row) for row in report.storable_rows()])
        return campaign


class Campaign(models.Model):
    kind = models.CharField("캠페인 종류", max_length=20, choices=CAMPAIGN_KINDS)
    name = models.CharField("이름", max_length=100, blank=True)
    config = models.JSONField("실행 설정")
    seed = models.BigIntegerField("시드")
    mode_count = models.PositiveSmallIntegerField("모드 수")
    created_at = models.DateTimeField("실행 일시", auto_now_add=True)
    summary = models.JSONField("요약", default=dict)
    passed = models.BooleanField("통과 여부", default=False)

    objects = CampaignManager()

    class Meta:
        verbose_name = "캠페인"
        verbose_name_plural = "캠페인 목록"
        db_table = "campaigns"
        ordering = ["-created_at"]

    def __str__(self):
        return f"{self.id} - {self.kind} J={self.mode_count}"


class ReportRow(models.Model):
    campaign = models.ForeignKey(Campaign, on_delete=models.CASCADE, related_name="rows")
    temperature = models.FloatField("온도 T")
    coupling = models.FloatField("결합 상수 λ")
    n_max = models.PositiveIntegerField("입자 수 상한", null=True)
    log_z_lambda = models.FloatField("log Z_λ", null=True)
    log_z_free = models.FloatField("log Z_0", null=True)
    ratio = models.FloatField("Z_λ/Z_0", null=True)
    z_r = models.FloatField("z_r", null=True)
    z_r_stderr = models.FloatField("z_r 표준오차", null=True)
    distance = models.FloatField("거리", null=True)
    distance_stderr = models.FloatField("거리 표준오차", null=True)
    tail_certificate = models.FloatField("꼬리 질량", null=True)
    checks = models.JSONField("부등식 검사", default=dict)
    passed = models.BooleanField("통과 여부", default=False)

    class Meta:
        verbose_name = "보고서 행"
        verbose_name_plural = "보고서 행 목록"
        db_table = "report_rows"
        ordering = ["campaign", "temperature"]
        constraints = [models.UniqueConstraint(fields=["campaign", "temperature"], name="unique_row_per_temperature")]

    def __str__(self):
        return f"{self.campaign_id} - T={self.temperature:g}"
