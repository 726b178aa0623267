"""
Almacenamiento de artefactos del laboratorio.

Contenedor binario (ensambles, lifts, soluciones):
    b'HOMOLAB1\\n'
    largo de la cabecera (8 bytes, little-endian)
    cabecera JSON UTF-8 con la lista de bloques {name, shape}
    bloques float64 little-endian en orden row-major

Con USE_S3=True los artefactos van al bucket S3 (MediaStorage); en otro caso
al sistema de archivos local bajo el directorio de salida.
"""
import csv
import io
import json
import struct

import numpy as np
from django.conf import settings
from django.core.files.base import ContentFile
from django.core.files.storage import FileSystemStorage, default_storage
from storages.backends.s3boto3 import S3Boto3Storage

from .noise import HurstParameter, StationaryEnsemble, TimeGrid
from .roughpath import LiftedPath

MAGIC = b'HOMOLAB1\n'
_LENGTH = struct.Struct('<Q')


class MediaStorage(S3Boto3Storage):
    """
    Artefactos de experimentos en el bucket S3, carpeta 'resultados/'.
    Las re-ejecuciones con la misma semilla sobrescriben sus archivos.
    """
    # El bucket se toma de AWS_STORAGE_BUCKET_NAME en settings.py
    location = 'resultados'
    file_overwrite = True
    default_acl = 'private'

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        if not self.bucket_name:
            self.bucket_name = getattr(settings, 'AWS_STORAGE_BUCKET_NAME', 'homolab-resultados')

    def exists(self, name):
        """
        HeadObject responde 403 con credenciales de solo escritura;
        en ese caso se asume que el archivo no existe.
        """
        try:
            return super().exists(name)
        except Exception as e:
            if '403' in str(e) or 'Forbidden' in str(e):
                return False
            raise


def get_artifact_storage(out_dir=None):
    """Storage local en out_dir, o el storage por defecto (S3 si USE_S3)."""
    if getattr(settings, 'USE_S3', False):
        return default_storage
    return FileSystemStorage(location=str(out_dir or settings.HOMOLAB['OUTPUT_DIR']))


def _save(storage, name, content):
    if storage.exists(name):
        storage.delete(name)
    return storage.save(name, ContentFile(content))


# --- Contenedor binario ---

def encode_container(header, blocks):
    header = dict(header)
    header['blocks'] = [{'name': name, 'shape': list(np.shape(array))} for name, array in blocks.items()]
    raw = json.dumps(header, sort_keys=True).encode('utf-8')
    parts = [MAGIC, _LENGTH.pack(len(raw)), raw]
    parts += [np.ascontiguousarray(array, dtype='<f8').tobytes(order='C') for array in blocks.values()]
    return b''.join(parts)


def decode_container(data):
    if not data.startswith(MAGIC):
        raise ValueError("El archivo no es un contenedor HOMOLAB1")
    offset = len(MAGIC)
    (length,) = _LENGTH.unpack_from(data, offset)
    offset += _LENGTH.size
    header = json.loads(data[offset: offset + length].decode('utf-8'))
    offset += length
    blocks = {}
    for block in header['blocks']:
        size = int(np.prod(block['shape'])) if block['shape'] else 1
        array = np.frombuffer(data, dtype='<f8', count=size, offset=offset)
        blocks[block['name']] = array.reshape(block['shape']).astype(float)
        offset += 8 * size
    if offset != len(data):
        raise ValueError("El contenedor tiene bytes sobrantes")
    return header, blocks


def save_container(storage, name, header, blocks):
    return _save(storage, name, encode_container(header, blocks))


def load_container(storage, name):
    with storage.open(name, 'rb') as handle:
        return decode_container(handle.read())


def save_ensemble(storage, name, ensemble):
    return save_container(storage, name, ensemble.header(), {'values': ensemble.values})


def load_ensemble(storage, name):
    header, blocks = load_container(storage, name)
    grid = TimeGrid(**header['grid'])
    return StationaryEnsemble(
        grid=grid,
        values=blocks['values'],
        kind=header['kind'],
        h=None if header['h'] is None else HurstParameter(header['h']),
        normalized=header['normalized'],
        seed=header['seed'],
        meta=header.get('meta', {}),
    )


def save_lift(storage, name, lift, extra=None):
    header = {
        'grid': lift.grid.to_json(),
        'convention': lift.convention,
        'block_split': lift.block_split,
        'meta': lift.meta,
        **(extra or {}),
    }
    return save_container(storage, name, header, {'x': lift.x, 'xx': lift.xx})


def load_lift(storage, name):
    header, blocks = load_container(storage, name)
    return LiftedPath(
        grid=TimeGrid(**header['grid']),
        x=blocks['x'],
        xx=blocks['xx'],
        convention=header['convention'],
        block_split=header['block_split'],
        meta=header.get('meta', {}),
    )


def save_solution(storage, name, solution):
    header = {'grid': solution.grid.to_json(), 'scheme': solution.scheme, 'step_stats': solution.step_stats}
    return save_container(storage, name, header, {'states': solution.states})


# --- CSV ---

def csv_bytes(columns, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_value(value) for value in row])
    return buffer.getvalue().encode('utf-8')


def _csv_value(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple, dict)):
        return json.dumps(value, sort_keys=True)
    return value


def save_csv(storage, name, columns, rows):
    return _save(storage, name, csv_bytes(columns, rows))


def save_table(storage, name, records):
    """Lista de diccionarios con las mismas claves, una fila por registro."""
    records = list(records)
    columns = list(records[0]) if records else []
    return save_csv(storage, name, columns, ([record.get(c) for c in columns] for record in records))


def ensemble_csv_rows(ensemble, max_paths=64):
    """Filas t, path_0, ..., path_{n-1} (solo para ensambles pequeños)."""
    values = ensemble.values[:max_paths]
    columns = ['t'] + [f'path_{i}' for i in range(values.shape[0])]
    rows = [[float(t)] + values[:, i].tolist() for i, t in enumerate(ensemble.grid.times)]
    return columns, rows


def solution_csv_rows(solution):
    states = np.asarray(solution.states)
    if states.ndim == 3:
        states = states[0]
    columns = ['t'] + [f'x_{k + 1}' for k in range(states.shape[-1])]
    rows = [[float(t)] + states[i].tolist() for i, t in enumerate(solution.grid.times)]
    return columns, rows


def save_json(storage, name, data):
    raw = json.dumps(data, sort_keys=True, indent=2, allow_nan=True).encode('utf-8')
    return _save(storage, name, raw)
