"""
Construye el lift (X^ε, 𝕏^ε) de los funcionales escalados y lo guarda.

Genera en el directorio de salida:
    lift-<seed>-<hash>/lift_eps<ε>.bin   contenedor HOMOLAB1 con los bloques x y xx

Uso:
    python manage.py lift [--config configs/moment_fit.yaml] [--seed N] [--paths N] [--eps 0.01]
"""
from django.conf import settings
from django.core.management.base import CommandError

from HOMOLAB import lab, roughpath
from HOMOLAB.exceptions import HomolabError
from HOMOLAB.storages import get_artifact_storage, save_lift

from ._base import LabCommand


class Command(LabCommand):
    help = 'Construye y guarda el lift de los funcionales escalados X^ε'
    default_config = 'moment_fit'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--alpha', type=float, default=0.4, help='Exponente de la norma de Hölder reportada')

    def handle(self, *args, **options):
        config = self.load_config(options)
        storage = get_artifact_storage(config.output_dir or None)
        prefix = f"lift-{config.seed}-{config.config_hash[:8]}"
        budget = settings.HOMOLAB['PAIR_BUDGET']

        for epsilon in config.epsilons:
            try:
                ensemble = lab.sample_fast_noise(config, config.t_max / epsilon, ('lift', epsilon))
                lift = lab.scaled_lift(config, ensemble, epsilon)
                norms = roughpath.holder_norm(lift, options['alpha'], pair_budget=budget, seed=config.seed)
            except HomolabError as e:
                raise CommandError(str(e))
            chen = roughpath.chen_defect(lift, seed=config.seed)
            name = save_lift(storage, f"{prefix}/lift_eps{epsilon:g}.bin", lift, extra={'epsilon': epsilon})
            self.stdout.write(
                f"ε={epsilon:g}: {lift.count} puntos | ‖X‖_α={norms.first_order_norm:.4f} "
                f"‖𝕏‖_2α={norms.second_order_norm:.4f} | defecto de Chen {chen:.2e}"
            )
            self.stdout.write(self.style.SUCCESS(f"  ✓ {name}"))
