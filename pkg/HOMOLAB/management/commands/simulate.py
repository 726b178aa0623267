"""
Muestrea el proceso rápido de la configuración y guarda el ensamble.

Genera en el directorio de salida:
    simulate-<seed>-<hash>/ensemble.bin   contenedor binario HOMOLAB1
    simulate-<seed>-<hash>/ensemble.csv   t, path_0, ... (con --csv, primeras 64 trayectorias)

Uso:
    python manage.py simulate [--config configs/clt.yaml] [--seed N] [--paths N] [--span T] [--csv]
"""
import numpy as np
from django.core.management.base import CommandError

from HOMOLAB import lab, noise
from HOMOLAB.exceptions import HomolabError
from HOMOLAB.storages import ensemble_csv_rows, get_artifact_storage, save_csv, save_ensemble

from ._base import LabCommand


class Command(LabCommand):
    help = 'Simula un ensamble estacionario del proceso rápido (fOU o cadena de Markov)'
    default_config = 'clt'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--span', type=float, help='Horizonte en tiempo rápido (por defecto t_max/ε más chico)')
        parser.add_argument('--csv', action='store_true', help='Exportar también las trayectorias en CSV')

    def handle(self, *args, **options):
        config = self.load_config(options)
        span = options.get('span') or config.t_max / config.epsilons[-1]
        try:
            ensemble = lab.sample_fast_noise(config, span, ('simulate',))
        except HomolabError as e:
            raise CommandError(str(e))

        storage = get_artifact_storage(config.output_dir or None)
        prefix = f"simulate-{config.seed}-{config.config_hash[:8]}"
        name = save_ensemble(storage, f"{prefix}/ensemble.bin", ensemble)
        self.stdout.write(f"Ensamble {ensemble.kind}: {ensemble.n_paths} trayectorias x {ensemble.grid.count} puntos")
        self.stdout.write(f"  media {np.mean(ensemble.values):.4f} | varianza {np.var(ensemble.values):.4f}")
        if ensemble.kind == 'fou':
            lags, empirical, _ = noise.ensemble_autocorrelation(ensemble, min(4, ensemble.grid.count - 1))
            exact = noise.fou_autocorrelation_table(lags, ensemble.h)
            for lag, rho, rho_hat in zip(lags, exact, empirical):
                self.stdout.write(f"  ρ({lag:g}) = {rho:.4f} | estimado {rho_hat:.4f}")
        if options.get('csv'):
            columns, rows = ensemble_csv_rows(ensemble)
            save_csv(storage, f"{prefix}/ensemble.csv", columns, rows)
        self.stdout.write(self.style.SUCCESS(f"✓ Ensamble guardado en {name}"))
