# sbn/archive.py

"""
Versioned JSON model archive.

    {"format": "sbn-model", "version": 1, "crc32": <int>, "payload": {...}}

The payload holds the model configuration, normalizer, loss weights,
training configuration and every dense layer (weights as base64 of
little-endian float64, row-major (out, in)). Nets are stored in the order
instant.temp_reducer, instant.head, stage.<kind>... The CRC32 is taken over
the payload serialized with sorted keys and no whitespace.
"""

import base64
import binascii
import json
import logging
import os
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from .errors import ArchiveError, ChecksumError, ConfigurationError, DataError, SbnError
from .features import Normalizer
from .model import BoosterStage, InstantForecaster, ModelConfig, SbnModel
from .nn import DenseLayer, DenseNet

log = logging.getLogger(__name__)

ARCHIVE_FORMAT = "sbn-model"
ARCHIVE_VERSION = 1


@dataclass
class ModelArchive:
    model: SbnModel
    train_config: Optional[Dict[str, Any]] = None
    metadata: Dict[str, Any] = field(default_factory=dict)


def encode_array(values: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(values, dtype="<f8").tobytes()).decode("ascii")


def decode_array(text: str, shape, field_name: str) -> np.ndarray:
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except (binascii.Error, ValueError, AttributeError) as e:
        raise ArchiveError(f"invalid base64 data ({e})", field_name) from None
    expected = int(np.prod(shape)) * 8
    if len(raw) != expected:
        raise ArchiveError(f"{len(raw)} bytes, expected {expected} for shape {tuple(shape)}", field_name)
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


def _net_names(model: SbnModel) -> List[str]:
    return ["instant.temp_reducer", "instant.head"] + [f"stage.{s.kind.value}" for s in model.stages]


def _canonical(payload: Dict[str, Any]) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")


def archive_payload(model: SbnModel, train_config: Optional[Dict[str, Any]] = None,
                    metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    if model.normalizer is None:
        raise ConfigurationError("Cannot archive a model without a normalizer")
    nets = []
    for name, net in zip(_net_names(model), model.nets()):
        nets.append({"name": name, "layers": [
            {"in_dim": layer.in_dim, "out_dim": layer.out_dim, "activation": layer.activation,
             "dropout_rate": layer.dropout_rate,
             "weights": encode_array(layer.weights), "bias": encode_array(layer.bias)}
            for layer in net.layers]})
    return {"config": model.config.to_dict(),
            "normalizer": model.normalizer.to_dict(),
            "loss_weights": list(model.loss_weights) if model.loss_weights is not None else None,
            "train_config": train_config,
            "metadata": metadata or {},
            "parameter_count": model.parameter_count,
            "nets": nets}


def save_model(model: SbnModel, path: Union[str, Path], train_config: Optional[Dict[str, Any]] = None,
               metadata: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write a self-describing archive; identical models give identical files

    Args:
        model (SbnModel): trained model with a normalizer
        path (Union[str, Path]): destination
        train_config (Dict[str, Any], optional): TrainConfig.to_dict() of the run
        metadata (Dict[str, Any], optional): free-form run description (no timestamps)
    """
    payload = archive_payload(model, train_config, metadata)
    document = {"format": ARCHIVE_FORMAT, "version": ARCHIVE_VERSION,
                "crc32": zlib.crc32(_canonical(payload)), "payload": payload}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(document, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    log.info("Saved %s model (%d parameters) to %s", model.config.label, model.parameter_count, path)
    return path


def _build_net(record: Dict[str, Any], prefix: str) -> DenseNet:
    layers = []
    for i, layer in enumerate(record.get("layers", [])):
        name = f"{prefix}.layers[{i}]"
        try:
            shape = (int(layer["out_dim"]), int(layer["in_dim"]))
            weights = decode_array(layer["weights"], shape, f"{name}.weights")
            bias = decode_array(layer["bias"], (shape[0],), f"{name}.bias")
            layers.append(DenseLayer(shape[1], shape[0], layer["activation"], float(layer["dropout_rate"]),
                                     weights, bias))
        except KeyError as e:
            raise ArchiveError(f"missing entry {e}", name) from None
        except ConfigurationError as e:
            raise ArchiveError(str(e), name) from None
    try:
        return DenseNet(layers)
    except ConfigurationError as e:
        raise ArchiveError(str(e), prefix) from None


def _check_shapes(net: DenseNet, expected: DenseNet, name: str):
    if net.shapes() != expected.shapes():
        raise ArchiveError(f"layer shapes {net.shapes()} do not match the configuration {expected.shapes()}", name)


def load_archive(path: Union[str, Path]) -> ModelArchive:
    """
    Read and verify an archive

    Raises:
        DataError: file missing
        ChecksumError: truncated or corrupted document, or CRC mismatch
        ArchiveError: wrong format/version or inconsistent content, naming the field
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"Model archive not found: {path}") from None
    except UnicodeDecodeError:
        raise ChecksumError("archive is not valid UTF-8 text", "archive") from None
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ChecksumError(f"truncated or corrupt document ({e})", "archive") from None
    if not isinstance(document, dict):
        raise ArchiveError("top level is not an object", "archive")
    if document.get("format") != ARCHIVE_FORMAT:
        raise ArchiveError(f"expected '{ARCHIVE_FORMAT}', got {document.get('format')!r}", "format")
    if document.get("version") != ARCHIVE_VERSION:
        raise ArchiveError(f"unsupported version {document.get('version')!r}, expected {ARCHIVE_VERSION}", "version")
    payload = document.get("payload")
    if not isinstance(payload, dict):
        raise ArchiveError("missing payload", "payload")
    if zlib.crc32(_canonical(payload)) != document.get("crc32"):
        raise ChecksumError("payload does not match its checksum", "crc32")

    try:
        config = ModelConfig.from_dict(payload["config"])
    except (KeyError, TypeError, ValueError, SbnError) as e:
        raise ArchiveError(str(e), "config") from None
    try:
        normalizer = Normalizer.from_dict(payload["normalizer"])
    except (KeyError, TypeError, SbnError) as e:
        raise ArchiveError(str(e), "normalizer") from None

    records = payload.get("nets", [])
    expected_names = ["instant.temp_reducer", "instant.head"] + [f"stage.{k.value}" for k in config.boosters]
    names = [r.get("name") for r in records]
    if names != expected_names:
        raise ArchiveError(f"expected nets {expected_names}, got {names}", "nets")
    nets = [_build_net(record, f"nets.{record['name']}") for record in records]

    template = InstantForecaster.create(config.hidden_units, config.dropout_rate)
    _check_shapes(nets[0], template.temp_reducer, "nets.instant.temp_reducer")
    _check_shapes(nets[1], template.head, "nets.instant.head")
    stages = []
    for kind, n, net, name in zip(config.boosters, config.effective_inputs(), nets[2:], expected_names[2:]):
        try:
            stages.append(BoosterStage(kind, n, net))
        except ConfigurationError as e:
            raise ArchiveError(str(e), f"nets.{name}") from None

    weights = payload.get("loss_weights")
    model = SbnModel(config, InstantForecaster(nets[0], nets[1]), stages, normalizer,
                     tuple(weights) if weights is not None else None)
    if payload.get("parameter_count") != model.parameter_count:
        raise ArchiveError(f"recorded {payload.get('parameter_count')}, rebuilt {model.parameter_count}",
                           "parameter_count")
    return ModelArchive(model, payload.get("train_config"), payload.get("metadata") or {})


def load_model(path: Union[str, Path]) -> SbnModel:
    """Load the model of an archive (see load_archive)"""
    return load_archive(path).model
