"""
KDD Record Utilities

This module parses KDD'99 connection records, removes exact duplicates,
encodes the categorical attributes through lexicographic codebooks and
builds the label space with its known/unknown split.

Two entry points exist for every step: a record API over ConnectionRecord
values (small inputs, tests, round-trips) and a pandas frame API used by
the pipeline for the multi-million-row files.
"""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..core.errors import KddParseError, LabelSpaceError
from ..core.state import FeatureKind, Metatype
from ..taxonomy import load_taxonomy, metatype_of

logger = logging.getLogger(__name__)

FEATURE_NAMES: Tuple[str, ...] = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in",
    "num_compromised", "root_shell", "su_attempted", "num_root", "num_file_creations",
    "num_shells", "num_access_files", "num_outbound_cmds", "is_host_login",
    "is_guest_login", "count", "srv_count", "serror_rate", "srv_serror_rate",
    "rerror_rate", "srv_rerror_rate", "same_srv_rate", "diff_srv_rate",
    "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count",
    "dst_host_same_srv_rate", "dst_host_diff_srv_rate", "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate", "dst_host_serror_rate", "dst_host_srv_serror_rate",
    "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
)
N_FEATURES = len(FEATURE_NAMES)
N_FIELDS = N_FEATURES + 1
LABEL_COLUMN = "label"

CATEGORICAL_POSITIONS: Tuple[int, ...] = (1, 2, 3)
BINARY_POSITIONS: Tuple[int, ...] = (6, 11, 20, 21)

FEATURE_KINDS: Tuple[FeatureKind, ...] = tuple(
    FeatureKind.CATEGORICAL if i in CATEGORICAL_POSITIONS
    else FeatureKind.BINARY if i in BINARY_POSITIONS
    else FeatureKind.NUMERIC
    for i in range(N_FEATURES)
)
CATEGORICAL_NAMES: Tuple[str, ...] = tuple(FEATURE_NAMES[i] for i in CATEGORICAL_POSITIONS)

FeatureValue = Union[float, int, str]

_FIELD_COUNT_MESSAGE = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


@dataclass(frozen=True)
class ConnectionRecord:
    """One labeled 41-attribute connection vector."""

    features: Tuple[FeatureValue, ...]
    label: str

    def __post_init__(self):
        if len(self.features) != N_FEATURES:
            raise KddParseError(f"expected {N_FEATURES} feature values, got {len(self.features)}")
        if not self.label:
            raise KddParseError("label token is empty")

    def __getitem__(self, name: str) -> FeatureValue:
        return self.features[FEATURE_NAMES.index(name)]


def _strip_label(token: str) -> str:
    token = token.strip()
    return token[:-1] if token.endswith(".") else token


def parse_kdd_line(line: str, line_number: Optional[int] = None) -> ConnectionRecord:
    """
    Parse one comma-separated KDD row.

    Args:
        line: Raw text row, optionally newline-terminated
        line_number: 1-based position in its file, used in error messages

    Returns:
        ConnectionRecord with typed values and the label's trailing period stripped
    """
    fields = line.rstrip("\r\n").split(",")
    if len(fields) != N_FIELDS:
        raise KddParseError(f"expected {N_FIELDS} fields, saw {len(fields)}", line_number=line_number)

    values: List[FeatureValue] = []
    for position, (token, kind) in enumerate(zip(fields, FEATURE_KINDS)):
        token = token.strip()
        if kind is FeatureKind.CATEGORICAL:
            values.append(token)
            continue
        try:
            number = float(token)
        except ValueError:
            raise KddParseError(
                f"non-numeric value {token!r} for {FEATURE_NAMES[position]}", line_number=line_number
            ) from None
        if kind is FeatureKind.BINARY:
            if number not in (0.0, 1.0):
                raise KddParseError(
                    f"binary attribute {FEATURE_NAMES[position]} holds {token!r}", line_number=line_number
                )
            values.append(int(number))
        else:
            values.append(number)

    label = _strip_label(fields[-1])
    if not label:
        raise KddParseError("label token is empty", line_number=line_number)
    return ConnectionRecord(features=tuple(values), label=label)


def _format_value(value: FeatureValue) -> str:
    if isinstance(value, float):
        return repr(int(value)) if value.is_integer() else repr(value)
    return str(value)


def format_kdd_record(record: ConnectionRecord, trailing_period: bool = True) -> str:
    """Serialize a record back to a KDD row (no newline)."""
    label = record.label + ("." if trailing_period else "")
    return ",".join([_format_value(v) for v in record.features] + [label])


def read_kdd_records(path: Path) -> List[ConnectionRecord]:
    with open(path, "r", encoding="utf-8") as f:
        return [parse_kdd_line(line, number) for number, line in enumerate(f, start=1) if line.strip()]


def deduplicate(records: Iterable[ConnectionRecord], key_on_label: bool = True) -> List[ConnectionRecord]:
    """
    Keep the first occurrence of each exact duplicate, in original order.

    With ``key_on_label=False`` two records that differ only in label count
    as duplicates; the first one wins.
    """
    if key_on_label:
        return list(dict.fromkeys(records))
    first: Dict[Tuple[FeatureValue, ...], ConnectionRecord] = {}
    for record in records:
        first.setdefault(record.features, record)
    return list(first.values())


# ---------------------------------------------------------------------------
# Frame API
# ---------------------------------------------------------------------------

def _typed_chunk(chunk: pd.DataFrame, source: str) -> pd.DataFrame:
    # blank lines arrive as all-missing rows so the index keeps physical line positions
    blank = chunk.iloc[:, 1:].isna().all(axis=1) & chunk.iloc[:, 0].fillna("").str.strip().eq("")
    chunk = chunk[~blank]
    line_numbers = chunk.index + 1
    missing = chunk[LABEL_COLUMN].isna()
    if missing.any():
        where = int(line_numbers[np.argmax(missing.to_numpy())])
        raise KddParseError(f"{source}: expected {N_FIELDS} fields, saw fewer", line_number=where)

    typed = {}
    for position, name in enumerate(FEATURE_NAMES):
        column = chunk[name]
        if FEATURE_KINDS[position] is FeatureKind.CATEGORICAL:
            typed[name] = column.str.strip()
            continue
        numbers = pd.to_numeric(column.str.strip(), errors="coerce")
        bad = numbers.isna()
        if FEATURE_KINDS[position] is FeatureKind.BINARY:
            bad |= ~numbers.isin([0.0, 1.0])
        if bad.any():
            index = int(np.argmax(bad.to_numpy()))
            raise KddParseError(
                f"{source}: invalid value {column.iloc[index]!r} for {name}",
                line_number=int(line_numbers[index]),
            )
        typed[name] = numbers.astype(np.int8) if FEATURE_KINDS[position] is FeatureKind.BINARY else numbers.astype(np.float64)
    labels = chunk[LABEL_COLUMN].str.strip().str.replace(r"\.$", "", regex=True)
    empty = labels.eq("")
    if empty.any():
        raise KddParseError(f"{source}: label token is empty", line_number=int(line_numbers[np.argmax(empty.to_numpy())]))
    typed[LABEL_COLUMN] = labels
    return pd.DataFrame(typed, index=chunk.index)


def _undecodable_line(path: Path) -> Optional[int]:
    with open(path, "rb") as handle:
        for number, raw in enumerate(handle, start=1):
            try:
                raw.decode("utf-8")
            except UnicodeDecodeError:
                return number
    return None


def read_kdd_file(path: Path, chunksize: int = 500_000) -> pd.DataFrame:
    """
    Read a KDD'99 file into a typed frame.

    Args:
        path: Text file, one record per line
        chunksize: Rows parsed per pandas chunk

    Returns:
        Frame with one column per attribute plus ``label``; the index is the
        0-based line position
    """
    source = str(path)
    logger.info("reading %s", source)
    try:
        reader = pd.read_csv(
            path,
            header=None,
            names=list(FEATURE_NAMES) + [LABEL_COLUMN],
            dtype=str,
            keep_default_na=False,
            na_values=[],
            chunksize=chunksize,
            skip_blank_lines=False,
            engine="c",
        )
        chunks = [_typed_chunk(chunk, source) for chunk in reader]
    except UnicodeDecodeError as e:
        raise KddParseError(f"{source}: not valid UTF-8 ({e.reason})", line_number=_undecodable_line(path)) from e
    except pd.errors.ParserError as e:
        match = _FIELD_COUNT_MESSAGE.search(str(e))
        if match:
            raise KddParseError(
                f"{source}: expected {N_FIELDS} fields, saw {match.group(3)}", line_number=int(match.group(2))
            ) from e
        raise KddParseError(f"{source}: {e}") from e
    except pd.errors.EmptyDataError:
        chunks = []
    if not chunks:
        return pd.DataFrame(columns=list(FEATURE_NAMES) + [LABEL_COLUMN])
    frame = pd.concat(chunks)
    logger.info("parsed %d records from %s", len(frame), source)
    return frame


def deduplicate_frame(frame: pd.DataFrame, key_on_label: bool = True) -> pd.DataFrame:
    subset = None if key_on_label else list(FEATURE_NAMES)
    return frame.drop_duplicates(subset=subset, keep="first")


def records_to_frame(records: Sequence[ConnectionRecord]) -> pd.DataFrame:
    rows = [list(r.features) + [r.label] for r in records]
    frame = pd.DataFrame(rows, columns=list(FEATURE_NAMES) + [LABEL_COLUMN])
    for position, name in enumerate(FEATURE_NAMES):
        if FEATURE_KINDS[position] is FeatureKind.NUMERIC:
            frame[name] = frame[name].astype(np.float64)
        elif FEATURE_KINDS[position] is FeatureKind.BINARY:
            frame[name] = frame[name].astype(np.int8)
    return frame


# ---------------------------------------------------------------------------
# Categorical codebooks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CategoricalCodebook:
    """Sorted training tokens of one categorical attribute."""

    attribute: str
    tokens: Tuple[str, ...]

    @property
    def overflow_index(self) -> int:
        return len(self.tokens)

    def index(self, token: str) -> int:
        try:
            return self.tokens.index(token)
        except ValueError:
            return self.overflow_index

    def codes(self, tokens: pd.Series) -> np.ndarray:
        codes = pd.Categorical(tokens, categories=list(self.tokens)).codes.astype(np.int64)
        codes[codes < 0] = self.overflow_index
        return codes

    def to_dict(self) -> Dict[str, object]:
        return {"attribute": self.attribute, "tokens": list(self.tokens)}

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "CategoricalCodebook":
        return cls(attribute=str(data["attribute"]), tokens=tuple(data["tokens"]))


Codebooks = Dict[str, CategoricalCodebook]


def build_codebooks(train: Union[Sequence[ConnectionRecord], pd.DataFrame]) -> Codebooks:
    """One lexicographic codebook per categorical attribute, from training data only."""
    if isinstance(train, pd.DataFrame):
        observed = {name: set(train[name].unique()) for name in CATEGORICAL_NAMES}
    else:
        observed = {name: {r.features[p] for r in train} for p, name in zip(CATEGORICAL_POSITIONS, CATEGORICAL_NAMES)}
    return {name: CategoricalCodebook(name, tuple(sorted(observed[name]))) for name in CATEGORICAL_NAMES}


def encode(record: ConnectionRecord, codebooks: Codebooks) -> np.ndarray:
    vector = np.empty(N_FEATURES, dtype=np.float64)
    for position, value in enumerate(record.features):
        if FEATURE_KINDS[position] is FeatureKind.CATEGORICAL:
            vector[position] = codebooks[FEATURE_NAMES[position]].index(value)
        else:
            vector[position] = value
    return vector


def encode_frame(frame: pd.DataFrame, codebooks: Codebooks) -> np.ndarray:
    """Vectorized ``encode`` over a typed frame; returns an (n, 41) float64 array."""
    matrix = np.empty((len(frame), N_FEATURES), dtype=np.float64)
    for position, name in enumerate(FEATURE_NAMES):
        if FEATURE_KINDS[position] is FeatureKind.CATEGORICAL:
            matrix[:, position] = codebooks[name].codes(frame[name])
        else:
            matrix[:, position] = frame[name].to_numpy(dtype=np.float64)
    return matrix


# ---------------------------------------------------------------------------
# Label space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelSpace:
    """Known/unknown split of exploit labels with their metatypes."""

    known_classes: Tuple[str, ...]
    unknown_classes: Tuple[str, ...]
    metatype_map: Dict[str, Metatype] = field(default_factory=dict)

    @property
    def n_known(self) -> int:
        return len(self.known_classes)

    def is_known(self, label: str) -> bool:
        return label in self._index

    @property
    def _index(self) -> Dict[str, int]:
        return {name: i for i, name in enumerate(self.known_classes)}

    def index_of(self, labels: Iterable[str]) -> np.ndarray:
        """Class index per label, ``-1`` for labels outside the known classes."""
        lookup = self._index
        return np.array([lookup.get(label, -1) for label in labels], dtype=np.int64)

    def metatype(self, label: str) -> Metatype:
        return self.metatype_map.get(label, Metatype.UNLISTED)

    def to_dict(self) -> Dict[str, object]:
        return {
            "known_classes": list(self.known_classes),
            "unknown_classes": list(self.unknown_classes),
            "metatype_map": {k: v.value for k, v in sorted(self.metatype_map.items())},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "LabelSpace":
        return cls(
            known_classes=tuple(data["known_classes"]),
            unknown_classes=tuple(data["unknown_classes"]),
            metatype_map={k: Metatype(v) for k, v in dict(data["metatype_map"]).items()},
        )


def build_label_space(
    train_labels: Iterable[str],
    test_labels: Iterable[str],
    taxonomy: Optional[Mapping[str, Metatype]] = None,
) -> LabelSpace:
    """
    Split labels into known (post-filter training) and unknown (test only).

    Args:
        train_labels: Training labels after rare-class removal
        test_labels: Test labels
        taxonomy: Exploit -> metatype table; the shipped table when None

    Returns:
        LabelSpace with lexicographically ordered known classes
    """
    known = sorted(set(train_labels))
    if not known:
        raise LabelSpaceError("training label set is empty")
    unknown = sorted(set(test_labels) - set(known))
    taxonomy = load_taxonomy() if taxonomy is None else taxonomy
    metatypes = {label: metatype_of(label, taxonomy) for label in known + unknown}
    unlisted = [label for label, m in metatypes.items() if m is Metatype.UNLISTED]
    if unlisted:
        logger.warning("labels missing from taxonomy: %s", ", ".join(unlisted))
    if unknown:
        logger.info("unknown classes (%d): %s", len(unknown), ", ".join(unknown))
    return LabelSpace(tuple(known), tuple(unknown), metatypes)
