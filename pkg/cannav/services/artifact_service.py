"""
Artifact writing for a run directory.

Every CSV starts with one `# config_hash=...,seed=...,code_version=...` line and
every JSON document embeds the same stamp, so two artifacts with equal stamps
are byte-identical. The directory is guarded by a `.lock` file while a
command writes into it.
"""
import csv
import io
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel

from cannav.core.config import settings
from cannav.core.errors import ArtifactError, OutputLockedError
from cannav.schemas.artifact_schemas import ArtifactStamp
from cannav.schemas.config_schemas import RunConfig

logger = logging.getLogger(__name__)

LOCK_NAME = ".lock"


def stamp_for(config: RunConfig) -> ArtifactStamp:
    return ArtifactStamp(config_hash=config.config_hash(), seed=config.seed, code_version=settings.code_version)


def stamp_line(stamp: ArtifactStamp, **extra: Any) -> str:
    fields = [f"config_hash={stamp.config_hash}", f"seed={stamp.seed}", f"code_version={stamp.code_version}"]
    fields.extend(f"{k}={v}" for k, v in extra.items())
    return "# " + ",".join(fields)


def format_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ArtifactService:
    """Writes stamped CSV/JSON artifacts under one output directory."""

    def __init__(self, output_dir: Union[str, Path], stamp: ArtifactStamp):
        self.output_dir = Path(output_dir)
        self.stamp = stamp
        self._lock_path = self.output_dir / LOCK_NAME
        self._locked = False

    # ---- locking -------------------------------------------------------

    def acquire(self) -> "ArtifactService":
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError as e:
            raise OutputLockedError(f"Output directory {self.output_dir} is locked by another command") from e
        except OSError as e:
            raise ArtifactError(f"Cannot prepare output directory {self.output_dir}: {e}") from e
        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))
        self._locked = True
        return self

    def release(self) -> None:
        if self._locked:
            try:
                self._lock_path.unlink()
            except FileNotFoundError:
                logger.warning(f"Lock file {self._lock_path} vanished before release")
            self._locked = False

    def __enter__(self) -> "ArtifactService":
        return self.acquire()

    def __exit__(self, exc_type, exc, tb) -> None:
        self.release()

    # ---- writers -------------------------------------------------------

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def _write_text(self, path: Path, text: str) -> Path:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(text)
        except OSError as e:
            logger.error(f"Failed to write {path}: {e}", exc_info=True)
            raise ArtifactError(f"Failed to write {path}: {e}") from e
        return path

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        document = {**payload, "stamp": self.stamp.model_dump()}
        return self._write_text(self.path(name), json.dumps(document, sort_keys=True, indent=2) + "\n")

    def write_model(self, name: str, model: BaseModel) -> Path:
        """A pydantic document that already carries its own stamp fields."""
        return self._write_text(self.path(name), json.dumps(model.model_dump(mode="json"), sort_keys=True, indent=2) + "\n")

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]], **extra: Any) -> Path:
        buffer = io.StringIO()
        buffer.write(stamp_line(self.stamp, **extra) + "\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
        return self._write_text(self.path(name), buffer.getvalue())

    def append_csv(self, name: str, header: Sequence[str], row: Sequence[Any]) -> Path:
        """Append one row, creating the stamped file with its header on first use."""
        path = self.path(name)
        if not path.exists():
            return self.write_csv(name, header, [row])
        try:
            with open(path, "a", encoding="utf-8", newline="") as f:
                csv.writer(f, lineterminator="\n").writerow([format_value(v) for v in row])
        except OSError as e:
            raise ArtifactError(f"Failed to append to {path}: {e}") from e
        return path

    def open_csv_log(self, name: str, header: Sequence[str], **extra: Any) -> "CsvLog":
        return CsvLog(self.path(name), header, stamp_line(self.stamp, **extra))


class CsvLog:
    """Append-only CSV flushed after every row, so a failed run leaves a readable prefix."""

    def __init__(self, path: Path, header: Sequence[str], first_line: str):
        self.path = path
        self.header = list(header)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            self._file = open(path, "w", encoding="utf-8", newline="")
        except OSError as e:
            raise ArtifactError(f"Failed to open log {path}: {e}") from e
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._file.write(first_line + "\n")
        self._writer.writerow(self.header)
        self._file.flush()

    def append(self, row: Dict[str, Any]) -> None:
        try:
            self._writer.writerow([format_value(row[k]) for k in self.header])
            self._file.flush()
        except OSError as e:
            raise ArtifactError(f"Failed to append to {self.path}: {e}") from e

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()

    def __enter__(self) -> "CsvLog":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


def read_csv(path: Union[str, Path]) -> Tuple[List[str], List[Dict[str, str]]]:
    """Header and rows of a stamped CSV; `#` lines are skipped."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            lines = [line for line in f if not line.startswith("#")]
    except OSError as e:
        raise ArtifactError(f"Cannot read {path}: {e}") from e
    reader = csv.reader(lines)
    header = next(reader, [])
    return header, [dict(zip(header, row)) for row in reader if row]


def read_stamp(path: Union[str, Path]) -> Optional[Dict[str, str]]:
    """Key/value pairs of the leading `#` line, or None when the file has none."""
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline().strip()
    if not first.startswith("#"):
        return None
    return dict(part.partition("=")[::2] for part in first[1:].strip().split(","))
