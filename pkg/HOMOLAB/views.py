# Django REST Framework
from rest_framework import status, viewsets
from rest_framework.authentication import SessionAuthentication
from rest_framework.decorators import action
from rest_framework.permissions import IsAuthenticated
from rest_framework.response import Response

# APP
from .models import Artifact, ExperimentRun
from .serializer import ArtifactSerializer, ExperimentRunSerializer


class ExperimentRunViewSet(viewsets.ReadOnlyModelViewSet):
    """
    Ejecuciones de experimentos (solo lectura; se lanzan con `manage.py run`).
    Filtros: ?kind=<tipo> y ?passed=true|false.
    """
    queryset = ExperimentRun.objects.all().prefetch_related('artifacts')
    serializer_class = ExperimentRunSerializer
    authentication_classes = [SessionAuthentication]
    permission_classes = [IsAuthenticated]

    def get_queryset(self):
        queryset = super().get_queryset()
        kind = self.request.query_params.get('kind')
        if kind:
            queryset = queryset.filter(kind=kind)
        passed = self.request.query_params.get('passed')
        if passed in ('true', 'false'):
            queryset = queryset.filter(passed=(passed == 'true'))
        return queryset

    @action(detail=True, methods=['get'])
    def report(self, request, pk=None):
        """Reporte JSON completo de la ejecución."""
        run = self.get_object()
        if run.report is None:
            return Response(
                {'error': 'La ejecución no tiene reporte', 'status': run.status},
                status=status.HTTP_404_NOT_FOUND,
            )
        return Response(run.report)


class ArtifactViewSet(viewsets.ReadOnlyModelViewSet):
    queryset = Artifact.objects.all().select_related('run')
    serializer_class = ArtifactSerializer
    authentication_classes = [SessionAuthentication]
    permission_classes = [IsAuthenticated]

    def get_queryset(self):
        queryset = super().get_queryset()
        run = self.request.query_params.get('run')
        if run:
            queryset = queryset.filter(run_id=run)
        return queryset
