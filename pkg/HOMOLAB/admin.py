from django.contrib import admin

from .models import Artifact, ExperimentRun


class ArtifactInline(admin.TabularInline):
    model = Artifact
    extra = 0
    readonly_fields = ('kind', 'path', 'size', 'created_at')


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    """
    Ejecuciones de experimentos. Son de solo lectura: las registra
    `lab.run` al ejecutar `manage.py run` o cualquier otro comando del
    laboratorio (`verify_clt`, `homogenize`, ...). La API solo las consulta.
    """

    list_display = ('id', 'kind', 'seed', 'status', 'passed', 'created_at')
    list_filter = ('kind', 'status', 'passed')
    search_fields = ('config_hash',)
    ordering = ('-created_at',)
    readonly_fields = ('kind', 'seed', 'config', 'config_hash', 'report', 'error', 'output_dir', 'created_at', 'updated_at')
    inlines = [ArtifactInline]


admin.site.register(Artifact)
