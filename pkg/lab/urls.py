from django.urls import include, path
from rest_framework.routers import DefaultRouter

from .views import CampaignViewSet, ReportRowViewSet

router = DefaultRouter()
router.register(r"campaigns", CampaignViewSet, basename="campaign")
router.register(r"rows", ReportRowViewSet, basename="row")

urlpatterns = [
    path("", include(router.urls)),
]
