from django.urls import include, path
from rest_framework import routers

from HOMOLAB import views

router = routers.DefaultRouter()

router.register(r'runs', views.ExperimentRunViewSet)
router.register(r'artifacts', views.ArtifactViewSet)

urlpatterns = [
    path('api/', include(router.urls)),
]
