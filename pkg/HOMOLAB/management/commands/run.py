"""
Ejecuta el experimento descrito en un archivo YAML.

Uso:
    python manage.py run configs/clt.yaml [--seed N] [--paths N] [--eps ...] [--out DIR]

Sale con código 0 si todos los veredictos pasan y 1 en otro caso.
"""
from ._base import LabCommand


class Command(LabCommand):
    help = 'Ejecuta un experimento desde su archivo de configuración'

    def add_arguments(self, parser):
        parser.add_argument('config_file', help='Archivo YAML de configuración')
        super().add_arguments(parser)

    def handle(self, *args, **options):
        config = self.load_config(options, path=options['config_file'])
        self.run_experiment(config)
