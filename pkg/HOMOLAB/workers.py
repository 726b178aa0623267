"""
Pool de trabajo por trayectoria y flujos aleatorios reproducibles.

Cada trayectoria usa su propio generador Philox (basado en contador) sembrado con
(seed, índice de trayectoria). El resultado no depende del número de hilos ni
del tamaño de los bloques.
"""
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from django.conf import settings

logger = logging.getLogger(__name__)

# Índice reservado para flujos de calibración (no depende de n_paths)
CALIBRATION_INDEX = 2**32 - 1


def path_generator(seed, index):
    """Generador independiente para la trayectoria `index` bajo la semilla `seed`."""
    if seed < 0 or index < 0:
        raise ValueError("seed e índice deben ser no negativos")
    sequence = np.random.SeedSequence([int(seed), int(index)])
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed, *tags):
    """Semilla hija estable para un sub-experimento (por ejemplo un epsilon del schedule)."""
    text = ":".join([str(int(seed))] + [str(t) for t in tags])
    digest = hashlib.sha256(text.encode('utf-8')).digest()
    return int.from_bytes(digest[:4], 'little')


def worker_count():
    if not settings.configured:
        return 1
    config = getattr(settings, 'HOMOLAB', {})
    return max(1, int(config.get('WORKERS', 1)))


def _run_chunks(chunk_fn, n_paths, chunk_size):
    starts = list(range(0, n_paths, chunk_size))
    n_workers = worker_count()
    if n_workers == 1 or len(starts) <= 1:
        return [chunk_fn(s) for s in starts]
    logger.debug(f"Distribuyendo {n_paths} trayectorias en {n_workers} hilos")
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(chunk_fn, starts))


def map_chunks(fn, n_paths, seed, chunk_size=256):
    """
    Ejecuta fn(rngs) por bloques de trayectorias: fn recibe la lista de generadores de un bloque de
    trayectorias y devuelve un arreglo (len(rngs), ...). Cada trayectoria debe
    consumir solo su propio generador.
    """
    if n_paths < 1:
        raise ValueError("n_paths debe ser >= 1")

    def _chunk(start):
        stop = min(start + chunk_size, n_paths)
        return fn([path_generator(seed, i) for i in range(start, stop)])

    return np.concatenate(_run_chunks(_chunk, n_paths, chunk_size), axis=0)
