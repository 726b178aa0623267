"""
Base común de los comandos del laboratorio.

Todos los comandos aceptan:
    --config  archivo YAML (por defecto configs/<experimento>.yaml del proyecto)
    --seed    semilla (sobrescribe la del archivo)
    --paths   número de trayectorias
    --eps     schedule de epsilon: repetible o lista separada por comas
    --out     directorio de salida
"""
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from HOMOLAB import lab
from HOMOLAB.exceptions import HomolabError


def parse_epsilons(values):
    """['0.1,0.01', '0.001'] -> [0.1, 0.01, 0.001]"""
    if not values:
        return None
    try:
        return [float(item) for value in values for item in value.split(',') if item.strip()]
    except ValueError:
        raise CommandError(f"--eps debe contener números: {values}")


class LabCommand(BaseCommand):
    # Nombre del archivo en configs/ usado cuando no se pasa --config
    default_config = None

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Archivo YAML de configuración del experimento')
        parser.add_argument('--seed', type=int, help='Semilla del experimento')
        parser.add_argument('--paths', type=int, help='Número de trayectorias')
        parser.add_argument('--eps', action='append', help='Valores de epsilon (repetible o separados por comas)')
        parser.add_argument('--out', help='Directorio de salida de artefactos')

    def load_config(self, options, path=None, **overrides):
        path = path or options.get('config') or Path(settings.BASE_DIR) / 'configs' / f'{self.default_config}.yaml'
        try:
            config = lab.ExperimentConfig.from_file(path)
            return config.with_overrides(
                seed=options.get('seed'),
                n_paths=options.get('paths'),
                epsilons=parse_epsilons(options.get('eps')),
                output_dir=options.get('out'),
                **overrides,
            )
        except FileNotFoundError:
            raise CommandError(f"No existe el archivo de configuración: {path}")
        except HomolabError as e:
            raise CommandError(f"Configuración inválida: {e}")

    def run_experiment(self, config):
        """Ejecuta, imprime el resumen de veredictos y devuelve el reporte. Sale con 1 si alguno falla."""
        self.stdout.write(f"Experimento: {config.kind} | semilla {config.seed} | {config.n_paths} trayectorias")
        self.stdout.write(f"Epsilon: {', '.join(f'{eps:g}' for eps in config.epsilons)}")
        self.stdout.write("-" * 50)
        try:
            report, code = lab.run(config, out=config.output_dir or None)
        except HomolabError as e:
            self.stdout.write(self.style.ERROR(f"✗ {e}"))
            raise CommandError(str(e))

        for verdict in report.verdicts:
            where = ', '.join(
                f"{key}={getattr(verdict, key)}" for key in ('channel', 'epsilon', 't', 's')
                if getattr(verdict, key) is not None
            )
            line = f"  {verdict.name}: {verdict.value:.6g} {verdict.comparison} {verdict.tolerance:.6g}"
            if verdict.target is not None:
                line += f" (objetivo {verdict.target:.6g})"
            if where:
                line += f" [{where}]"
            style = self.style.SUCCESS if verdict.passed else self.style.ERROR
            self.stdout.write(style(line))

        self.stdout.write(f"\nArtefactos en: {lab.run_prefix(config)}/")
        if code:
            failed = sum(not verdict.passed for verdict in report.verdicts)
            self.stdout.write(self.style.WARNING(f"{failed} veredicto(s) fallido(s)."))
            raise CommandError(f"El experimento {config.kind} no aprobó todos sus veredictos", returncode=1)
        self.stdout.write(self.style.SUCCESS(f"✓ Experimento {config.kind} aprobado."))
        return report


class ExperimentCommand(LabCommand):
    """Comando que ejecuta un único tipo de experimento."""
    kind = None

    def handle(self, *args, **options):
        config = self.load_config(options)
        if config.kind != self.kind:
            config = config.with_overrides(kind=self.kind)
        self.run_experiment(config)
