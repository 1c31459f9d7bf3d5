from django_filters.rest_framework import DjangoFilterBackend
from rest_framework import filters as drf_filters
from rest_framework import viewsets
from rest_framework.permissions import AllowAny

from .filters import CampaignFilter, ReportRowFilter
from .models import Campaign, ReportRow
from .serializers import CampaignDetailSerializer, CampaignSerializer, ReportRowSerializer


# 저장된 캠페인 조회 (읽기 전용, 실행은 manage.py converge)
class CampaignViewSet(viewsets.ReadOnlyModelViewSet):
    queryset = Campaign.objects.all()
    permission_classes = [AllowAny]

    filter_backends = [DjangoFilterBackend, drf_filters.OrderingFilter, drf_filters.SearchFilter]
    filterset_class = CampaignFilter

    search_fields = ["name", "kind"]
    ordering_fields = ["created_at", "mode_count"]
    ordering = ["-created_at"]

    def get_serializer_class(self):
        # 상세 조회에서만 행 목록을 함께 보냄
        if self.action == "retrieve":
            return CampaignDetailSerializer
        return CampaignSerializer


class ReportRowViewSet(viewsets.ReadOnlyModelViewSet):
    serializer_class = ReportRowSerializer
    permission_classes = [AllowAny]

    filter_backends = [DjangoFilterBackend, drf_filters.OrderingFilter]
    filterset_class = ReportRowFilter

    ordering_fields = ["temperature", "distance", "ratio"]
    ordering = ["campaign", "temperature"]

    def get_queryset(self):
        return ReportRow.objects.select_related("campaign").order_by("campaign", "temperature")
