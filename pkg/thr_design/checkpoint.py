"""Versioned model files.

A model file has two lines. The first is a JSON header with the format name,
the format version and the sha256 of the second line; the second is a JSON
payload with the architecture, the training configuration, the
normalization statistics, every parameter and the batchnorm running
statistics. Floats are written with their shortest round-trip repr, so a
save/load cycle is bit-exact.
"""
import hashlib
import json
import logging
import os

import numpy as np

from thr_design import __version__
from thr_design.data import NormalizationStats
from thr_design.errors import ChecksumMismatchError, ModelFormatError, VersionMismatchError
from thr_design.nn import MLPModel, TrainConfig

logger = logging.getLogger(__name__)

MODEL_FORMAT = 'thr-design-model'
MODEL_VERSION = 1


def _array_entry(values: np.ndarray) -> dict:
    return {'shape': list(values.shape), 'values': values.ravel().tolist()}


def _from_entry(entry: dict) -> np.ndarray:
    return np.asarray(entry['values'], dtype=float).reshape(entry['shape'])


def payload_checksum(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def save_model(model: MLPModel, path: str) -> None:
    payload = {
        'widths': model.widths,
        'config': model.config.to_dict(),
        'norm_stats': model.norm_stats.to_dict() if model.norm_stats is not None else None,
        'params': {k: _array_entry(v) for k, v in sorted(model.params.items())},
        'bn_state': [{k: _array_entry(v) for k, v in sorted(s.items())} for s in model.bn_state],
        'package_version': __version__,
    }
    body = json.dumps(payload, sort_keys=True, allow_nan=False).encode('utf-8')
    header = {'format': MODEL_FORMAT, 'version': MODEL_VERSION, 'sha256': payload_checksum(body)}
    dir_path = os.path.dirname(path)
    if dir_path:
        os.makedirs(dir_path, exist_ok=True)
    with open(path, 'wb') as file:
        file.write(json.dumps(header, sort_keys=True).encode('utf-8') + b'\n')
        file.write(body + b'\n')
    logger.info(f"saved model to {path} (sha256 {header['sha256'][:16]}...)")


def read_header(path: str) -> (dict, bytes):
    """Header dict and raw payload of a model file, version and checksum
    verified."""
    try:
        with open(path, 'rb') as file:
            content = file.read()
    except OSError as e:
        raise ModelFormatError(f"cannot read model file {path}: {e.strerror}")
    head, sep, body = content.partition(b'\n')
    if not sep:
        raise ChecksumMismatchError(expected=None, actual=payload_checksum(b''), path=path)
    try:
        header = json.loads(head)
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise ModelFormatError(f"{path} is not a model file (unreadable header)")
    if not isinstance(header, dict) or header.get('format') != MODEL_FORMAT:
        raise ModelFormatError(f"{path} is not a {MODEL_FORMAT} file")
    if header.get('version') != MODEL_VERSION:
        raise VersionMismatchError(header.get('version'), MODEL_VERSION, path)
    body = body[:-1] if body.endswith(b'\n') else body
    actual = payload_checksum(body)
    if actual != header.get('sha256'):
        raise ChecksumMismatchError(expected=header.get('sha256'), actual=actual, path=path)
    return header, body


def load_model(path: str) -> MLPModel:
    _, body = read_header(path)
    try:
        payload = json.loads(body)
        config = TrainConfig(**payload['config'])
        params = {k: _from_entry(v) for k, v in payload['params'].items()}
        bn_state = [{k: _from_entry(v) for k, v in s.items()} for s in payload['bn_state']]
        norm_stats = payload['norm_stats']
        norm_stats = NormalizationStats.from_dict(norm_stats) if norm_stats is not None else None
        widths = payload['widths']
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: malformed model payload ({e})")
    logger.info(f"loaded model {widths} from {path}")
    return MLPModel(widths, params, bn_state, norm_stats, config)
