"""
Shared fixtures: KDD row builders, a tiny synthetic KDD corpus and the
three-blob geometry used by the solver and open-set tests.
"""

import os
from pathlib import Path
from typing import List

import pytest

from openset_ids.core.config import DATA_DIR_ENV, RunConfig
from openset_ids.core.selfcheck import BLOB_CLASSES, BLOB_KERNEL, three_blobs
from openset_ids.models.multiclass import SolverSettings, train_ovr
from openset_ids.models.recognizers import train_platt, train_wsvm

# First record of the public kddcup.data file
SAMPLE_LINE = (
    "0,tcp,http,SF,181,5450,0,0,0,0,0,1,0,0,0,0,0,0,0,0,0,0,8,8,0.00,0.00,0.00,0.00,"
    "1.00,0.00,0.00,9,9,1.00,0.00,0.11,0.00,0.00,0.00,0.00,0.00,normal."
)


def kdd_row(
    label: str,
    src_bytes: float = 0,
    count: float = 1,
    protocol: str = "tcp",
    service: str = "http",
    flag: str = "SF",
    period: bool = True,
) -> str:
    """A syntactically valid KDD row; everything except the named fields is 0."""
    fields: List[str] = ["0"] * 41
    fields[1], fields[2], fields[3] = protocol, service, flag
    fields[4] = f"{src_bytes:g}"
    fields[22] = f"{count:g}"
    return ",".join(fields + [label + ("." if period else "")])


def synthetic_corpus(per_class: int = 12, with_unknown: bool = True):
    """
    Train/test rows for three separable classes; the test side adds a
    class never seen in training and the train side repeats some rows.
    """
    layout = {
        "neptune": dict(base=0, count_base=300, protocol="tcp", service="private", flag="S0"),
        "normal": dict(base=200, count_base=1, protocol="tcp", service="http", flag="SF"),
        "smurf": dict(base=1000, count_base=500, protocol="icmp", service="ecr_i", flag="SF"),
    }
    train, test = [], []
    for label, spec in layout.items():
        for i in range(per_class):
            row = kdd_row(
                label,
                src_bytes=spec["base"] + 10 * i,
                count=spec["count_base"] + i,
                protocol=spec["protocol"],
                service=spec["service"],
                flag=spec["flag"],
            )
            train.append(row)
            if i % 2 == 0:
                test.append(kdd_row(
                    label,
                    src_bytes=spec["base"] + 10 * i + 5,
                    count=spec["count_base"] + i,
                    protocol=spec["protocol"],
                    service=spec["service"],
                    flag=spec["flag"],
                ))
    train += train[:4]
    if with_unknown:
        test += [kdd_row("snmpgetattack", src_bytes=5000 + i, count=50, protocol="udp", service="snmp") for i in range(5)]
    return train, test


def write_lines(path: Path, lines: List[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def kdd_files(tmp_path):
    """(train_path, test_path) of the synthetic corpus."""
    train, test = synthetic_corpus()
    return write_lines(tmp_path / "train.txt", train), write_lines(tmp_path / "test.txt", test)


@pytest.fixture
def run_config(tmp_path, kdd_files):
    """A RunConfig over the synthetic corpus sized for seconds-long runs."""
    train_path, test_path = kdd_files
    return RunConfig.model_validate(
        {
            "paths": {"train": str(train_path), "test": str(test_path), "output_dir": str(tmp_path / "out")},
            "preprocess": {"downsample_factor": 1, "min_class_count": 3},
            "kernel": {"c": 10.0, "gamma": 1.0},
            "evaluation": {"thresholds": [0.0, 0.1, 0.3]},
            "desk": {"per_class_cap": 8, "withheld": ["smurf"], "thresholds": [0.1, 0.3]},
        }
    )


@pytest.fixture(scope="session")
def blobs():
    return three_blobs()


@pytest.fixture(scope="session")
def blob_models(blobs):
    """(X, labels, wsvm, platt) trained once on the three-blob fixture."""
    X, labels = blobs
    binaries = train_ovr(X, labels, BLOB_KERNEL, SolverSettings(), len(BLOB_CLASSES), class_names=BLOB_CLASSES)
    wsvm = train_wsvm(X, labels, BLOB_CLASSES, BLOB_KERNEL, binaries=binaries)
    platt = train_platt(X, labels, BLOB_CLASSES, BLOB_KERNEL, binaries=binaries)
    return X, labels, wsvm, platt


@pytest.fixture
def kdd_data_dir():
    """Directory holding the real kddcup.data and corrected files, or skip."""
    directory = os.getenv(DATA_DIR_ENV)
    if not directory or not (Path(directory) / "kddcup.data").is_file():
        pytest.skip(f"{DATA_DIR_ENV} does not point at the KDD'99 files")
    return Path(directory)
