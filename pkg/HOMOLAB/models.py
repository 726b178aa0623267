from django.db import models


EXPERIMENT_KINDS = (
    'clt',
    'covariance',
    'moment_fit',
    'hermite_regime',
    'homogenize_1d',
    'homogenize_nd',
    'decomp_residual',
    'mixing',
)

# --- Ejecuciones de experimentos ---

class ExperimentRun(models.Model):
    KIND_CHOICES = tuple((kind, kind.replace('_', ' ').capitalize()) for kind in EXPERIMENT_KINDS)

    ESTADO_CHOICES = (
        ('en_curso', 'En curso'),
        ('completado', 'Completado'),
        ('fallido', 'Fallido'),
    )

    kind = models.CharField(max_length=30, choices=KIND_CHOICES, verbose_name="Tipo de experimento")
    seed = models.BigIntegerField(verbose_name="Semilla")
    config = models.JSONField(verbose_name="Configuración")
    config_hash = models.CharField(max_length=64, db_index=True)
    status = models.CharField(
        max_length=20,
        choices=ESTADO_CHOICES,
        default='en_curso',
        verbose_name="Estado"
    )
    passed = models.BooleanField(null=True, blank=True, verbose_name="Veredictos aprobados")
    report = models.JSONField(null=True, blank=True)
    error = models.TextField(blank=True, default='')
    output_dir = models.CharField(max_length=500, blank=True, default='')
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        db_table = 'experiment_runs'
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.kind} (semilla {self.seed}) - {self.get_status_display()}"


class Artifact(models.Model):
    KIND_CHOICES = (
        ('report', 'Reporte JSON'),
        ('table', 'Tabla CSV'),
        ('plot_data', 'Datos para gráficos'),
        ('ensemble', 'Contenedor de ensamble'),
        ('lift', 'Contenedor de lift'),
        ('solution', 'Contenedor de solución'),
    )

    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='artifacts')
    kind = models.CharField(max_length=20, choices=KIND_CHOICES)
    # Ruta relativa al almacenamiento (local o S3 según USE_S3)
    path = models.CharField(max_length=500)
    size = models.PositiveBigIntegerField(default=0)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = 'artifacts'
        ordering = ['run', 'path']

    def __str__(self):
        return self.path
