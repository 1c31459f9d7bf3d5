# Generated by Django 5.2.7 on 2025-11-03 10:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="Campaign",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                (
                    "kind",
                    models.CharField(
                        choices=[
                            ("partition", "Z_λ/Z_0 against z_r"),
                            ("dm", "k! T^{-k} Γ^(k) against γ^(k)"),
                            ("husimi", "anti-Wick expectations against ∫ b dμ"),
                            ("proofsteps", "a-priori bounds and proof-step inequalities"),
                        ],
                        max_length=20,
                        verbose_name="캠페인 종류",
                    ),
                ),
                ("name", models.CharField(blank=True, max_length=100, verbose_name="이름")),
                ("config", models.JSONField(verbose_name="실행 설정")),
                ("seed", models.BigIntegerField(verbose_name="시드")),
                ("mode_count", models.PositiveSmallIntegerField(verbose_name="모드 수")),
                ("created_at", models.DateTimeField(auto_now_add=True, verbose_name="실행 일시")),
                ("summary", models.JSONField(default=dict, verbose_name="요약")),
                ("passed", models.BooleanField(default=False, verbose_name="통과 여부")),
            ],
            options={
                "verbose_name": "캠페인",
                "verbose_name_plural": "캠페인 목록",
                "db_table": "campaigns",
                "ordering": ["-created_at"],
            },
        ),
        migrations.CreateModel(
            name="ReportRow",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("temperature", models.FloatField(verbose_name="온도 T")),
                ("coupling", models.FloatField(verbose_name="결합 상수 λ")),
                ("n_max", models.PositiveIntegerField(null=True, verbose_name="입자 수 상한")),
                ("log_z_lambda", models.FloatField(null=True, verbose_name="log Z_λ")),
                ("log_z_free", models.FloatField(null=True, verbose_name="log Z_0")),
                ("ratio", models.FloatField(null=True, verbose_name="Z_λ/Z_0")),
                ("z_r", models.FloatField(null=True, verbose_name="z_r")),
                ("z_r_stderr", models.FloatField(null=True, verbose_name="z_r 표준오차")),
                ("distance", models.FloatField(null=True, verbose_name="거리")),
                ("distance_stderr", models.FloatField(null=True, verbose_name="거리 표준오차")),
                ("tail_certificate", models.FloatField(null=True, verbose_name="꼬리 질량")),
                ("checks", models.JSONField(default=dict, verbose_name="부등식 검사")),
                ("passed", models.BooleanField(default=False, verbose_name="통과 여부")),
                (
                    "campaign",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE, related_name="rows", to="lab.campaign"
                    ),
                ),
            ],
            options={
                "verbose_name": "보고서 행",
                "verbose_name_plural": "보고서 행 목록",
                "db_table": "report_rows",
                "ordering": ["campaign", "temperature"],
                "constraints": [
                    models.UniqueConstraint(fields=("campaign", "temperature"), name="unique_row_per_temperature")
                ],
            },
        ),
    ]
