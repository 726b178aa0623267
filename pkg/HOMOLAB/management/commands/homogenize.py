"""
Simula el sistema multiescala para cada epsilon y mide la distancia W1 a la
ley de la ecuación límite en t_max.

Uso:
    python manage.py homogenize [--config configs/homogenize_1d.yaml] [--seed N] [--paths N] [--eps ...] [--out DIR]
"""
from ._base import LabCommand


class Command(LabCommand):
    help = 'Homogeneización: W1 entre x^ε_T y la solución de la ecuación límite'
    default_config = 'homogenize_1d'

    def handle(self, *args, **options):
        config = self.load_config(options)
        if not config.kind.startswith('homogenize'):
            kind = 'homogenize_1d' if len(config.x0) == 1 else 'homogenize_nd'
            config = config.with_overrides(kind=kind)
        self.run_experiment(config)
