from django.conf import settings
from rest_framework import serializers

from .models import EXPERIMENT_KINDS, Artifact, ExperimentRun
from .validators import (
    validar_campos, validar_epsilons, validar_generador, validar_hurst, validar_tolerancias,
)

NOISE_KINDS = ('fou', 'markov_chain')
FOU_METHODS = ('auto', 'exact_covariance', 'euler_burnin')


def _lab_setting(name, default):
    return getattr(settings, 'HOMOLAB', {}).get(name, default)


def _default_epsilons():
    text = str(_lab_setting('DEFAULT_EPSILONS', '0.1,0.01,0.001'))
    return [float(value) for value in text.split(',') if value.strip()]


def _default_paths():
    return int(_lab_setting('DEFAULT_PATHS', 10000))


# --- Configuración de experimentos (archivo YAML) ---

class NoiseSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=NOISE_KINDS, default='fou', label='Proceso rápido')
    h = serializers.FloatField(required=False, allow_null=True, label='Parámetro de Hurst')
    step = serializers.FloatField(default=0.25, min_value=1e-4, label='Paso de la grilla rápida')
    method = serializers.ChoiceField(choices=FOU_METHODS, default='auto')
    rate_matrix = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField()), required=False,
    )
    state_values = serializers.ListField(child=serializers.FloatField(), required=False)

    def validate(self, data):
        if data['kind'] == 'fou':
            es_valido, mensaje = validar_hurst(data.get('h'))
            if not es_valido:
                raise serializers.ValidationError({'h': mensaje})
        else:
            es_valido, mensaje = validar_generador(data.get('rate_matrix'), data.get('state_values'))
            if not es_valido:
                raise serializers.ValidationError({'rate_matrix': mensaje})
        return data


class ExperimentConfigSerializer(serializers.Serializer):
    # --- Obligatorios ---
    kind = serializers.ChoiceField(choices=EXPERIMENT_KINDS, label='Tipo de experimento')
    seed = serializers.IntegerField(min_value=0, label='Semilla')
    observables = serializers.ListField(child=serializers.JSONField(), min_length=1)
    noise = NoiseSerializer()

    # --- Opcionales ---
    epsilons = serializers.ListField(child=serializers.FloatField(), required=False)
    n_paths = serializers.IntegerField(min_value=2, required=False)
    t_max = serializers.FloatField(default=1.0, min_value=1e-6)
    vector_fields = serializers.ListField(child=serializers.JSONField(), required=False)
    x0 = serializers.ListField(child=serializers.FloatField(), required=False)
    p = serializers.FloatField(default=8.0, min_value=2.0)
    q = serializers.FloatField(required=False, allow_null=True)
    r = serializers.FloatField(default=4.0)
    n_split = serializers.IntegerField(required=False, allow_null=True, min_value=0)
    l_max = serializers.IntegerField(default=16, min_value=1, max_value=64)
    horizon = serializers.FloatField(default=32.0, min_value=0.0)
    window = serializers.FloatField(default=8.0, min_value=0.0)
    tolerances = serializers.DictField(child=serializers.FloatField(), required=False)
    output_dir = serializers.CharField(required=False, allow_blank=True)

    def validate_epsilons(self, value):
        es_valido, mensaje = validar_epsilons(value)
        if not es_valido:
            raise serializers.ValidationError(mensaje)
        return value

    def validate_tolerances(self, value):
        es_valido, mensaje = validar_tolerancias(value)
        if not es_valido:
            raise serializers.ValidationError(mensaje)
        return value

    def validate_r(self, value):
        if value <= 2:
            raise serializers.ValidationError("El exponente de mezcla r debe ser > 2")
        return value

    def validate(self, data):
        data.setdefault('epsilons', _default_epsilons())
        data.setdefault('n_paths', _default_paths())
        data.setdefault('tolerances', {})

        if data['kind'].startswith('homogenize'):
            campos = data.get('vector_fields')
            if not campos:
                raise serializers.ValidationError({'vector_fields': "Se requiere un campo vectorial por observable"})
            if len(campos) != len(data['observables']):
                raise serializers.ValidationError({'vector_fields': "Se requiere un campo vectorial por observable"})
            dimension = len(data.get('x0') or [1.0])
            es_valido, mensaje = validar_campos(campos, dimension)
            if not es_valido:
                raise serializers.ValidationError({'vector_fields': mensaje})

        if data['kind'] == 'mixing' and data['noise']['kind'] != 'markov_chain':
            raise serializers.ValidationError({'noise': "El experimento de mezcla requiere ruido markov_chain"})
        return data


# --- Modelos ---

class ArtifactSerializer(serializers.ModelSerializer):
    # --- Solo Lectura ---
    kind_display = serializers.CharField(source='get_kind_display', read_only=True)

    class Meta:
        model = Artifact
        fields = [
            'id',
            'run',
            'kind',
            'kind_display',
            'path',
            'size',
            'created_at',
        ]


class ExperimentRunSerializer(serializers.ModelSerializer):
    # --- Solo Lectura ---
    status_display = serializers.CharField(source='get_status_display', read_only=True)
    artifacts = ArtifactSerializer(many=True, read_only=True)

    class Meta:
        model = ExperimentRun
        fields = [
            'id',
            'kind',
            'seed',
            'config',
            'config_hash',
            'status',
            'status_display',
            'passed',
            'error',
            'output_dir',
            'artifacts',
            'created_at',
            'updated_at',
        ]
