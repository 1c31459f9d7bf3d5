from django_filters import rest_framework as filters

from .constants import CAMPAIGN_KINDS
from .models import Campaign, ReportRow


class ReportRowFilter(filters.FilterSet):
    # 온도 범위: ?min_temperature=2&max_temperature=8
    min_temperature = filters.NumberFilter(field_name="temperature", lookup_expr="gte")
    max_temperature = filters.NumberFilter(field_name="temperature", lookup_expr="lte")

    # 캠페인 / 종류: ?campaign=3&kind=partition
    campaign = filters.NumberFilter(field_name="campaign_id", lookup_expr="exact")
    kind = filters.ChoiceFilter(field_name="campaign__kind", choices=CAMPAIGN_KINDS)

    passed = filters.BooleanFilter(field_name="passed")

    class Meta:
        model = ReportRow
        fields = ["min_temperature", "max_temperature", "campaign", "kind", "passed"]


class CampaignFilter(filters.FilterSet):
    kind = filters.ChoiceFilter(field_name="kind", choices=CAMPAIGN_KINDS)
    passed = filters.BooleanFilter(field_name="passed")
    mode_count = filters.NumberFilter(field_name="mode_count", lookup_expr="exact")

    # ?created_at_after=2025-01-01&created_at_before=2025-02-01
    created_at = filters.DateFromToRangeFilter(field_name="created_at")

    class Meta:
        model = Campaign
        fields = ["kind", "passed", "mode_count", "created_at"]
