"""
Pipeline Workflow

The pipeline steps behind the CLI subcommands:

    prepare          dedup -> downsample -> drop rare -> encode -> scale
    train            (optional grid search) -> one-vs-rest SVMs -> calibration
    evaluate         probabilities -> sweep -> curve -> report files
    desk-experiment  capped subsample with withheld classes, both families

Each step reads what the previous one wrote under the output directory:

    <out>/prepared/{train.oids, test.oids, preprocessing.json, effective_config.yaml}
    <out>/models/{model_platt.json, model_wsvm.json, grid_search.csv}
    <out>/report/{closed.csv, sweep.csv, curve.csv, summary.txt, ...}
    <out>/desk/{...same report files...}
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import orjson

from ..models.kernel import KernelParams
from ..models.multiclass import SolverSettings, grid_search_cv, train_ovr
from ..models.recognizers import PredictionBatch, Recognizer, train_platt, train_wsvm
from ..taxonomy import load_taxonomy
from ..utils import artifact_io, dataset_io, report_io
from ..utils.kdd_utils import (
    LABEL_COLUMN,
    Codebooks,
    CategoricalCodebook,
    LabelSpace,
    build_codebooks,
    build_label_space,
    deduplicate_frame,
    encode_frame,
    read_kdd_file,
)
from ..utils.preprocess_utils import (
    ScalingParams,
    apply_scaler,
    cap_per_class,
    downsample_dominant,
    drop_rare_classes,
    fit_scaler,
)
from .config import RunConfig, write_effective_config
from .errors import ArtifactError, ConfigError, LabelSpaceError
from .evaluation import EvaluationReport, evaluate
from .state import Family, PrepareSummary

logger = logging.getLogger(__name__)

PREPARED_DIR = "prepared"
MODELS_DIR = "models"
REPORT_DIR = "report"
DESK_DIR = "desk"
PREPROCESSING_FILE = "preprocessing.json"


@dataclass
class PreparedDataset:
    X_train: np.ndarray
    y_train: np.ndarray  # label strings
    X_test: np.ndarray
    y_test: np.ndarray
    label_space: LabelSpace
    codebooks: Codebooks
    scaler: ScalingParams
    summary: Dict[str, object]

    def train_indices(self) -> np.ndarray:
        return self.label_space.index_of(self.y_train)

    def test_truth(self) -> np.ndarray:
        return self.label_space.index_of(self.y_test)


def _require_file(path: Path, what: str) -> Path:
    if not Path(path).is_file():
        raise ConfigError(f"{what} not found: {path}")
    return Path(path)


# ---------------------------------------------------------------------------
# prepare
# ---------------------------------------------------------------------------

def cmd_prepare(config: RunConfig) -> Path:
    """
    Run preprocessing and write the prepared directory.

    Args:
        config: Effective run configuration

    Returns:
        Path of the prepared directory
    """
    train_path = _require_file(config.resolved_train_path(), "training file")
    test_path = _require_file(config.resolved_test_path(), "test file")
    taxonomy = load_taxonomy(config.paths.taxonomy)
    pre = config.preprocess

    train_raw = read_kdd_file(train_path)
    test_raw = read_kdd_file(test_path)
    train = deduplicate_frame(train_raw)
    test = deduplicate_frame(test_raw)
    logger.info("dedup train: %d -> %d records", len(train_raw), len(train))
    logger.info("dedup test: %d -> %d records", len(test_raw), len(test))

    train_down, selection = downsample_dominant(train, pre.downsample_factor, pre.seed)
    train_kept, dropped = drop_rare_classes(train_down, pre.min_class_count)
    label_space = build_label_space(train_kept[LABEL_COLUMN], test[LABEL_COLUMN], taxonomy)

    codebooks = build_codebooks(train_kept)
    encoded_train = encode_frame(train_kept, codebooks)
    encoded_test = encode_frame(test, codebooks)
    if pre.joint_scaling:
        scaler = fit_scaler(np.vstack([encoded_train, encoded_test]))
    else:
        scaler = fit_scaler(encoded_train)
    X_train = apply_scaler(encoded_train, scaler)
    X_test = apply_scaler(encoded_test, scaler)

    summary = PrepareSummary(
        train_raw=len(train_raw),
        train_dedup=len(train),
        test_raw=len(test_raw),
        test_dedup=len(test),
        train_after_downsample=len(train_down),
        train_after_filter=len(train_kept),
        downsampled_classes=[name for name, _, _ in selection],
        dropped_classes=dropped,
        unknown_classes=list(label_space.unknown_classes),
    )
    out = Path(config.paths.output_dir) / PREPARED_DIR
    dataset_io.save_split(out / "train.oids", X_train, train_kept[LABEL_COLUMN].to_numpy())
    dataset_io.save_split(out / "test.oids", X_test, test[LABEL_COLUMN].to_numpy())
    _write_json(
        out / PREPROCESSING_FILE,
        {
            "codebooks": {name: book.to_dict() for name, book in codebooks.items()},
            "scaler": scaler.to_dict(),
            "label_space": label_space.to_dict(),
            "summary": dict(summary),
            "config_fingerprint": config.fingerprint(),
        },
    )
    write_effective_config(config, out)
    logger.info(
        "prepared %d training and %d test vectors (%d known, %d unknown classes) in %s",
        len(X_train), len(X_test), label_space.n_known, len(label_space.unknown_classes), out,
    )
    return out


def _write_json(path: Path, payload: Dict[str, object]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS))


def load_prepared(config: RunConfig) -> PreparedDataset:
    directory = Path(config.paths.output_dir) / PREPARED_DIR
    meta_path = directory / PREPROCESSING_FILE
    if not meta_path.is_file():
        raise ArtifactError(f"no prepared dataset in {directory}; run 'prepare' first")
    with open(meta_path, "rb") as f:
        meta = orjson.loads(f.read())
    X_train, y_train = dataset_io.load_split(directory / "train.oids")
    X_test, y_test = dataset_io.load_split(directory / "test.oids")
    return PreparedDataset(
        X_train=X_train,
        y_train=y_train,
        X_test=X_test,
        y_test=y_test,
        label_space=LabelSpace.from_dict(meta["label_space"]),
        codebooks={name: CategoricalCodebook.from_dict(b) for name, b in meta["codebooks"].items()},
        scaler=ScalingParams.from_dict(meta["scaler"]),
        summary=meta["summary"],
    )


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _families(family: str) -> List[Family]:
    return [Family.PLATT, Family.WSVM] if family == "both" else [Family(family)]


def train_families(
    X: np.ndarray,
    labels: np.ndarray,
    classes: Sequence[str],
    params: KernelParams,
    config: RunConfig,
    families: Sequence[Family],
) -> Dict[Family, Recognizer]:
    """Train the requested families on one shared set of one-vs-rest SVMs."""
    settings = SolverSettings.from_config(config.kernel)
    binaries = train_ovr(X, labels, params, settings, len(classes), config.workers, classes)
    models: Dict[Family, Recognizer] = {}
    for family in families:
        if family is Family.PLATT:
            models[family] = train_platt(
                X, labels, classes, params, config.calibration, settings,
                seed=config.preprocess.seed, workers=config.workers, binaries=binaries,
            )
        else:
            models[family] = train_wsvm(
                X, labels, classes, params, config.calibration, settings,
                workers=config.workers, binaries=binaries,
            )
    return models


def select_kernel(config: RunConfig, X: np.ndarray, labels: np.ndarray, classes: Sequence[str], models_dir: Path) -> KernelParams:
    kernel = config.kernel
    if not kernel.grid_search:
        return KernelParams(kernel.c, kernel.gamma)
    result = grid_search_cv(
        X, labels, kernel.grid_c, kernel.grid_gamma,
        folds=kernel.folds,
        seed=config.preprocess.seed,
        settings=SolverSettings.from_config(kernel),
        workers=config.workers,
        class_names=classes,
    )
    models_dir.mkdir(parents=True, exist_ok=True)
    report_io.write_grid_search(models_dir / report_io.GRID_FILE, result.to_frame())
    return result.best


def cmd_train(config: RunConfig, family: str = "both") -> Dict[Family, Path]:
    """
    Train one or both recognizer families from the prepared dataset.

    Returns:
        Artifact path per trained family
    """
    data = load_prepared(config)
    classes = data.label_space.known_classes
    labels = data.train_indices()
    models_dir = Path(config.paths.output_dir) / MODELS_DIR
    params = select_kernel(config, data.X_train, labels, classes, models_dir)
    logger.info("training with C=%g gamma=%g on %d vectors, %d classes", params.c, params.gamma, len(labels), len(classes))

    models = train_families(data.X_train, labels, classes, params, config, _families(family))
    taxonomy = {name: data.label_space.metatype(name).value for name in classes}
    written = {}
    for fam, model in models.items():
        artifact = artifact_io.ModelArtifact(
            model=model,
            kernel=params,
            codebooks=data.codebooks,
            scaler=data.scaler,
            taxonomy=taxonomy,
            config_fingerprint=config.fingerprint(),
        )
        written[fam] = artifact_io.save_model(artifact_io.artifact_path(models_dir, fam), artifact)
    write_effective_config(config, models_dir)
    return written


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _unknown_metatypes(label_space: LabelSpace, labels: np.ndarray, truth: np.ndarray) -> List[str]:
    return [label_space.metatype(label).value for label in labels[truth < 0]]


def emit_family_outputs(
    config: RunConfig,
    destination: Path,
    batches: Dict[Family, PredictionBatch],
    truth_labels: np.ndarray,
) -> None:
    thresholds = config.evaluation.thresholds
    threshold = thresholds[0] if thresholds else 0.0
    for family, batch in batches.items():
        if config.evaluation.write_predictions:
            report_io.write_predictions(
                destination / f"predictions_{family.value}.jsonl",
                batch,
                truth_labels,
                threshold,
                per_class=config.evaluation.per_class_probabilities,
            )
        report_io.write_confusion(destination / f"confusion_{family.value}.csv", batch, truth_labels, threshold)


def cmd_evaluate(config: RunConfig, family: str = "both") -> EvaluationReport:
    """
    Evaluate trained artifacts on the prepared test split and write the report.
    """
    data = load_prepared(config)
    models_dir = Path(config.paths.output_dir) / MODELS_DIR
    artifacts = {fam: artifact_io.load_model(artifact_io.artifact_path(models_dir, fam), fam) for fam in _families(family)}

    classes = None
    for fam, artifact in artifacts.items():
        if classes is not None and artifact.model.classes != classes:
            raise ArtifactError("model artifacts disagree on the class list")
        classes = artifact.model.classes
        if artifact.config_fingerprint != config.fingerprint():
            logger.warning("%s artifact was trained under a different configuration", fam.value)
    if classes != data.label_space.known_classes:
        raise ArtifactError("model classes do not match the prepared label space")

    truth = data.test_truth()
    batches = {fam: a.model.predict_batch(data.X_test) for fam, a in artifacts.items()}
    report = evaluate(
        batches,
        truth,
        config.evaluation.thresholds,
        config.evaluation.weight_step,
        _unknown_metatypes(data.label_space, data.y_test, truth),
    )
    destination = Path(config.paths.output_dir) / REPORT_DIR
    report_io.emit_report(report, destination)
    emit_family_outputs(config, destination, batches, data.y_test)
    write_effective_config(config, destination)
    return report


# ---------------------------------------------------------------------------
# desk experiment
# ---------------------------------------------------------------------------

def cmd_desk_experiment(config: RunConfig) -> EvaluationReport:
    """
    Scaled-down comparison of both families with forced unknowns.

    Training records are capped per class and the withheld classes are
    removed from training, so they count as unknown at test time. Test
    records are capped per class the same way.
    """
    data = load_prepared(config)
    desk = config.desk
    seed = config.preprocess.seed

    present = set(data.y_train.tolist())
    missing = [name for name in desk.withheld if name not in present]
    if missing:
        raise LabelSpaceError(f"withheld classes absent from training data: {', '.join(missing)}")

    keep_train = ~np.isin(data.y_train, desk.withheld)
    train_pos = np.flatnonzero(keep_train)[cap_per_class(data.y_train[keep_train], desk.per_class_cap, seed)]
    test_pos = cap_per_class(data.y_test, desk.per_class_cap, seed)
    X_train, y_train = data.X_train[train_pos], data.y_train[train_pos]
    X_test, y_test = data.X_test[test_pos], data.y_test[test_pos]

    label_space = build_label_space(y_train, y_test, data.label_space.metatype_map)
    classes = label_space.known_classes
    labels = label_space.index_of(y_train)
    params = KernelParams(config.kernel.c, config.kernel.gamma)
    logger.info(
        "desk experiment: %d training vectors over %d classes, %d test vectors, withheld %s",
        len(y_train), len(classes), len(y_test), ", ".join(desk.withheld) or "none",
    )

    models = train_families(X_train, labels, classes, params, config, [Family.PLATT, Family.WSVM])
    truth = label_space.index_of(y_test)
    batches = {fam: model.predict_batch(X_test) for fam, model in models.items()}
    report = evaluate(
        batches,
        truth,
        desk.thresholds,
        config.evaluation.weight_step,
        _unknown_metatypes(label_space, y_test, truth),
    )
    destination = Path(config.paths.output_dir) / DESK_DIR
    report_io.emit_report(report, destination)
    emit_family_outputs(config, destination, batches, y_test)
    write_effective_config(config, destination)
    return report
