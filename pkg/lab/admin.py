from django.contrib import admin

from .models import Campaign, ReportRow


class ReportRowInline(admin.TabularInline):
    model = ReportRow
    extra = 0
    fields = ("temperature", "coupling", "n_max", "ratio", "z_r", "distance", "tail_certificate", "passed")
    readonly_fields = fields


@admin.register(Campaign)
class CampaignAdmin(admin.ModelAdmin):
    list_display = ("id", "kind", "name", "mode_count", "seed", "passed", "created_at")
    search_fields = ("name",)
    ordering = ("-created_at",)

    list_filter = ("kind", "passed")

    readonly_fields = ("config", "summary", "seed", "created_at")
    inlines = [ReportRowInline]


@admin.register(ReportRow)
class ReportRowAdmin(admin.ModelAdmin):
    list_display = ("campaign", "temperature", "coupling", "ratio", "z_r", "distance", "passed")
    list_filter = ("passed", "campaign__kind")
    ordering = ("campaign", "temperature")
