"""
Model Artifacts

A trained recognizer is stored as one JSON document, ``model_<family>.json``,
holding everything inference needs: class order, kernel parameters, the
categorical codebooks and scaler of the training-time transform, the
metatype of each class and one entry per class (binary SVM plus the
family's calibrators). The config fingerprint ties it to the run that
produced it.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import orjson

from ..core.errors import ArtifactError, OpenSetIdsError
from ..core.state import Family
from ..models.kernel import KernelParams
from ..models.recognizers import PlattModel, Recognizer, WsvmModel
from .kdd_utils import CategoricalCodebook, Codebooks
from .preprocess_utils import ScalingParams

logger = logging.getLogger(__name__)

FORMAT = "openset-ids-model"
VERSION = 1

_FAMILIES = {Family.PLATT: PlattModel, Family.WSVM: WsvmModel}


@dataclass
class ModelArtifact:
    model: Recognizer
    kernel: KernelParams
    codebooks: Codebooks
    scaler: ScalingParams
    taxonomy: Dict[str, str]
    config_fingerprint: str

    @property
    def family(self) -> Family:
        return self.model.family


def artifact_path(models_dir: Path, family: Family) -> Path:
    return Path(models_dir) / f"model_{Family(family).value}.json"


def save_model(path: Path, artifact: ModelArtifact) -> Path:
    document = {
        "format": FORMAT,
        "version": VERSION,
        "family": artifact.family.value,
        "config_fingerprint": artifact.config_fingerprint,
        "classes": list(artifact.model.classes),
        "kernel": artifact.kernel.to_dict(),
        "codebooks": {name: book.to_dict() for name, book in artifact.codebooks.items()},
        "scaler": artifact.scaler.to_dict(),
        "taxonomy": artifact.taxonomy,
        "per_class": artifact.model.to_dict(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(orjson.dumps(document, option=orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_SORT_KEYS))
    logger.info("saved %s model to %s", artifact.family.value, path)
    return path


def load_model(path: Path, family: Optional[Family] = None) -> ModelArtifact:
    """
    Load an artifact, checking its format, version and (optionally) family.
    """
    path = Path(path)
    try:
        with open(path, "rb") as f:
            document = orjson.loads(f.read())
    except FileNotFoundError as e:
        raise ArtifactError(f"model artifact not found: {path}") from e
    except orjson.JSONDecodeError as e:
        raise ArtifactError(f"{path}: not a JSON document") from e

    if document.get("format") != FORMAT:
        raise ArtifactError(f"{path}: unknown artifact format {document.get('format')!r}")
    if document.get("version") != VERSION:
        raise ArtifactError(f"{path}: unsupported artifact version {document.get('version')!r}")
    try:
        stored_family = Family(document["family"])
    except (KeyError, ValueError) as e:
        raise ArtifactError(f"{path}: unknown model family") from e
    if family is not None and stored_family is not Family(family):
        raise ArtifactError(f"{path}: holds a {stored_family.value} model, expected {Family(family).value}")

    try:
        classes = document["classes"]
        model = _FAMILIES[stored_family].from_dict(classes, document["per_class"])
        return ModelArtifact(
            model=model,
            kernel=KernelParams.from_dict(document["kernel"]),
            codebooks={
                name: CategoricalCodebook.from_dict(book) for name, book in document["codebooks"].items()
            },
            scaler=ScalingParams.from_dict(document["scaler"]),
            taxonomy=dict(document["taxonomy"]),
            config_fingerprint=str(document["config_fingerprint"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ArtifactError(f"{path}: malformed artifact ({e})") from e
    except OpenSetIdsError as e:
        raise ArtifactError(f"{path}: {e.message}") from e
