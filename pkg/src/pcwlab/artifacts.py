"""Artifact I/O: staged atomic writes, manifests, and versioned loaders."""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from . import __version__
from .approx import PolicyParameters
from .conversion import FittedConversionModel
from .datagen import TrainingPool
from .domain import Dataset


class ArtifactError(RuntimeError):
    """An upstream artifact is missing, corrupt, or of the wrong version."""


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class StagedOutputs:
    """Collect outputs in temp files next to their targets; rename all on commit.

    Used as a context manager: an exception discards every staged file, so a
    failed command leaves no partial outputs behind.
    """

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self._staged: list[tuple[str, Path]] = []

    def __enter__(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self

    def open(self, name: str, mode: str = "w"):
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=self.out_dir)
        self._staged.append((name, Path(tmp)))
        return os.fdopen(fd, mode, newline="" if "b" not in mode else None)

    def write_text(self, name: str, text: str) -> None:
        with self.open(name) as fh:
            fh.write(text)

    def commit(self) -> dict[str, str]:
        digests = {}
        for name, tmp in self._staged:
            digests[name] = sha256_file(tmp)
            os.chmod(tmp, 0o644)
            os.replace(tmp, self.out_dir / name)
        self._staged.clear()
        return digests

    def discard(self) -> None:
        for _, tmp in self._staged:
            tmp.unlink(missing_ok=True)
        self._staged.clear()

    def __exit__(self, exc_type, exc, tb):
        self.discard()
        return False


def manifest(command: str, seed: int, config_hash: str, inputs: dict, outputs: dict) -> dict:
    return {
        "command": command,
        "package_version": __version__,
        "seed": seed,
        "config_hash": config_hash,
        "inputs": dict(sorted(inputs.items())),
        "outputs": dict(sorted(outputs.items())),
    }


def finish(staged: StagedOutputs, command: str, seed: int, config_hash: str,
           inputs: dict) -> dict:
    """Commit staged files and write the command's manifest beside them."""
    outputs = staged.commit()
    m = manifest(command, seed, config_hash, inputs, outputs)
    staged.write_text(f"{command}.manifest.json", json.dumps(m, indent=2) + "\n")
    staged.commit()
    return m


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise ArtifactError(f"missing artifact {path}") from None


def load_dataset(path, split_tag: str) -> Dataset:
    try:
        return Dataset.from_csv(_read(path), split_tag)
    except (ValueError, IndexError) as e:
        raise ArtifactError(f"corrupt dataset {path}: {e}") from None


def load_pool(path, train: Dataset) -> TrainingPool:
    try:
        with open(path) as fh:
            return TrainingPool.from_jsonl(fh, train)
    except FileNotFoundError:
        raise ArtifactError(f"missing artifact {path}") from None
    except (ValueError, KeyError, TypeError) as e:
        raise ArtifactError(f"corrupt pool {path}: {e}") from None


def load_conversion(path) -> FittedConversionModel:
    try:
        return FittedConversionModel.from_json(_read(path))
    except (ValueError, KeyError, TypeError) as e:
        raise ArtifactError(f"bad conversion model {path}: {e}") from None


def load_policy(path) -> PolicyParameters:
    try:
        return PolicyParameters.from_json(_read(path))
    except (ValueError, KeyError, TypeError) as e:
        raise ArtifactError(f"bad policy {path}: {e}") from None
