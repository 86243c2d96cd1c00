"""
Checkpoint files: one JSON document with a format version, every named
parameter array with its shape, the Adam state and an identity stamp.
Floats are written with their shortest round-trip repr, so load is bit-exact.
"""
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from cannav.core.errors import ArtifactError, CheckpointError
from cannav.numeric.optim import AdamState
from cannav.numeric.tensor import get_default_dtype
from cannav.schemas.artifact_schemas import (
    ArrayPayload,
    ArtifactStamp,
    CheckpointDocument,
    OptimizerPayload,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def _pack(array: np.ndarray) -> ArrayPayload:
    return ArrayPayload(shape=list(array.shape), data=array.reshape(-1).tolist())


def _unpack(payload: ArrayPayload) -> np.ndarray:
    array = np.asarray(payload.data, dtype=get_default_dtype())
    if array.size != int(np.prod(payload.shape, dtype=np.int64)):
        raise CheckpointError(f"Array of {array.size} values does not fit shape {payload.shape}")
    return array.reshape(payload.shape)


def save_checkpoint(
    path: Union[str, Path],
    parameters: Mapping[str, np.ndarray],
    optimizer: Optional[AdamState] = None,
    stamp: Optional[ArtifactStamp] = None,
    step: int = 0,
    config: Optional[Dict[str, Any]] = None,
) -> Path:
    path = Path(path)
    document = CheckpointDocument(
        format_version=FORMAT_VERSION,
        parameters={name: _pack(np.asarray(a)) for name, a in sorted(parameters.items())},
        optimizer=None if optimizer is None else OptimizerPayload(
            step=optimizer.step,
            beta1=optimizer.beta1,
            beta2=optimizer.beta2,
            eps=optimizer.eps,
            m={name: _pack(a) for name, a in sorted(optimizer.m.items())},
            v={name: _pack(a) for name, a in sorted(optimizer.v.items())},
        ),
        stamp=stamp,
        step=step,
        config=config,
    )
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(document.model_dump(mode="json"), f, sort_keys=True, separators=(",", ":"))
        os.replace(tmp, path)
    except OSError as e:
        logger.error(f"Failed to write checkpoint {path}: {e}", exc_info=True)
        raise ArtifactError(f"Failed to write checkpoint {path}: {e}") from e
    logger.info(f"Checkpoint written: {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Optional[AdamState], CheckpointDocument]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = CheckpointDocument.model_validate(json.load(f))
    except (json.JSONDecodeError, ValidationError) as e:
        raise CheckpointError(f"Checkpoint {path} is malformed: {e}") from e
    if document.format_version != FORMAT_VERSION:
        raise CheckpointError(
            f"Checkpoint {path} has format_version {document.format_version}, expected {FORMAT_VERSION}"
        )

    parameters = {name: _unpack(payload) for name, payload in document.parameters.items()}
    optimizer = None
    if document.optimizer is not None:
        optimizer = AdamState(
            m={name: _unpack(p) for name, p in document.optimizer.m.items()},
            v={name: _unpack(p) for name, p in document.optimizer.v.items()},
            step=document.optimizer.step,
            beta1=document.optimizer.beta1,
            beta2=document.optimizer.beta2,
            eps=document.optimizer.eps,
        )
    return parameters, optimizer, document
