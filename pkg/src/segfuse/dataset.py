# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Label remapping across taxonomies and coverage-based filtering.

Remap CSV:
    # comment
    source_id,target_id
    0,5
    1,255

Manifest (UTF-8, tab separated, paths relative to the manifest's directory):
    # segfuse-manifest v1
    images/a.png<TAB>labels/a.png<TAB>coco
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from .errors import DuplicateSource, IdOutOfRange, IoFailure, ParseError, UnreadableLabel, ValidationError
from .metrics import coverage
from .tensor_io import atomic_write_bytes, load_label_map
from .tensors import IGNORE_LABEL, LabelMap
from .worker_pool import WorkerPool

PathLike = Union[str, Path]

MANIFEST_HEADER = "# segfuse-manifest v1"
DATASET_TAGS = frozenset({"vspw", "coco", "ade20k", "cityscapes"})
DEFAULT_COVERAGE_THRESHOLD = 0.8
_REMAP_HEADER = ("source_id", "target_id")


# -----------------------------------------------------------------------------
# Label remapping
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelRemap:
    """Source id -> target id; every unmapped source goes to 255."""

    mapping: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean: Dict[int, int] = {}
        for source, target in self.mapping.items():
            if not (0 <= source <= 255 and 0 <= target <= 255):
                raise ValidationError(f"remap entry {source}->{target} is outside 0..255")
            if source == IGNORE_LABEL and target != IGNORE_LABEL:
                raise ValidationError("the ignore label 255 must map to 255")
            clean[int(source)] = int(target)
        clean[IGNORE_LABEL] = IGNORE_LABEL
        table = np.full(256, IGNORE_LABEL, dtype=np.uint8)
        for source, target in clean.items():
            table[source] = target
        table.setflags(write=False)
        object.__setattr__(self, "mapping", clean)
        object.__setattr__(self, "_table", table)

    @property
    def table(self) -> np.ndarray:
        """256-entry uint8 lookup table."""
        return self._table  # type: ignore[attr-defined]

    @property
    def targets(self) -> frozenset[int]:
        return frozenset(self.mapping.values())

    def __len__(self) -> int:
        return sum(1 for s in self.mapping if s != IGNORE_LABEL)

    @classmethod
    def identity(cls, ids: range | List[int]) -> "LabelRemap":
        return cls({i: i for i in ids})


def _parse_id(text: str, what: str, line: int) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        raise ParseError(f"{what} {text.strip()!r} is not an integer", line) from None
    if not 0 <= value <= 255:
        raise IdOutOfRange(f"{what} {value} is outside 0..255", line)
    return value


def parse_remap(text: str) -> LabelRemap:
    mapping: Dict[int, int] = {}
    seen_data = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 2:
            raise ParseError(f"expected 'source_id,target_id', got {line!r}", line_no)
        if not seen_data and tuple(fields) == _REMAP_HEADER:
            seen_data = True
            continue
        seen_data = True
        source = _parse_id(fields[0], "source id", line_no)
        target = _parse_id(fields[1], "target id", line_no)
        if source in mapping:
            raise DuplicateSource(source, line_no)
        if source == IGNORE_LABEL and target != IGNORE_LABEL:
            raise IdOutOfRange("the ignore label 255 must map to 255", line_no)
        mapping[source] = target
    return LabelRemap(mapping)


def load_remap(path: PathLike) -> LabelRemap:
    """Read a ``source_id,target_id`` CSV; '#' starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise IoFailure(f"cannot read remap file ({e})", str(path)) from e
    return parse_remap(text)


def remap_labels(lbl: LabelMap, m: LabelRemap) -> LabelMap:
    return LabelMap(m.table[lbl.data])


# -----------------------------------------------------------------------------
# Manifests
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestRecord:
    image_path: str
    label_path: str
    tag: str

    def __post_init__(self) -> None:
        if not self.image_path or not self.label_path:
            raise ValidationError("manifest paths must be non-empty")
        if self.tag not in DATASET_TAGS:
            raise ValidationError(f"unknown dataset tag {self.tag!r}; expected one of {sorted(DATASET_TAGS)}")


@dataclass(frozen=True)
class DatasetManifest:
    """Records plus the directory their relative paths are anchored to."""

    records: Tuple[ManifestRecord, ...] = ()
    base_dir: Path = Path(".")

    def __len__(self) -> int:
        return len(self.records)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def with_records(self, records: List[ManifestRecord]) -> "DatasetManifest":
        return DatasetManifest(tuple(records), self.base_dir)


def parse_manifest(text: str, base_dir: PathLike = ".") -> DatasetManifest:
    lines = text.splitlines()
    header_at = next((i for i, l in enumerate(lines) if l.strip()), None)
    if header_at is None or lines[header_at].strip() != MANIFEST_HEADER:
        raise ParseError(f"manifest must start with {MANIFEST_HEADER!r}", (header_at or 0) + 1)
    records = []
    for line_no, raw in enumerate(lines[header_at + 1:], start=header_at + 2):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        fields = raw.rstrip("\r\n").split("\t")
        if len(fields) != 3:
            raise ParseError(f"expected 3 tab-separated fields, got {len(fields)}", line_no)
        try:
            records.append(ManifestRecord(*fields))
        except ValidationError as e:
            raise ParseError(str(e), line_no) from e
    return DatasetManifest(tuple(records), Path(base_dir))


def read_manifest(path: PathLike) -> DatasetManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise IoFailure(f"cannot read manifest ({e})", str(path)) from e
    return parse_manifest(text, path.parent)


def format_manifest(manifest: DatasetManifest, target_dir: PathLike) -> str:
    """Render records with paths re-anchored to ``target_dir``."""
    target_dir = Path(target_dir)

    def _rel(p: str) -> str:
        resolved = manifest.resolve(p)
        if Path(p).is_absolute():
            return p
        return Path(os.path.relpath(resolved, target_dir)).as_posix()

    out = [MANIFEST_HEADER]
    for r in manifest.records:
        out.append("\t".join((_rel(r.image_path), _rel(r.label_path), r.tag)))
    return "\n".join(out) + "\n"


def write_manifest(manifest: DatasetManifest, path: PathLike) -> None:
    path = Path(path)
    atomic_write_bytes(path, format_manifest(manifest, path.parent).encode("utf-8"))


# -----------------------------------------------------------------------------
# Coverage filter
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class FilterResult:
    kept: DatasetManifest
    dropped: DatasetManifest
    errors: Tuple[Tuple[ManifestRecord, str], ...]
    # input order; coverage is None for records in ``errors``
    coverage: Tuple[Tuple[ManifestRecord, Optional[float]], ...]


def record_coverage(manifest: DatasetManifest, record: ManifestRecord, m: LabelRemap) -> float:
    lbl = load_label_map(manifest.resolve(record.label_path))
    return coverage(remap_labels(lbl, m))


def filter_by_coverage(manifest: DatasetManifest, m: LabelRemap,
                       threshold: float = DEFAULT_COVERAGE_THRESHOLD, threads: Optional[int] = None,
                       on_done: Optional[Callable[[int, int], None]] = None) -> FilterResult:
    """Partition records by coverage of the remapped label; keep iff coverage >= threshold.

    Unreadable labels go to ``errors``. Input order is preserved within every
    partition.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"coverage threshold must lie in [0, 1], got {threshold}")

    def _measure(record: ManifestRecord) -> Tuple[Optional[float], Optional[str]]:
        try:
            return record_coverage(manifest, record, m), None
        except UnreadableLabel as e:
            return None, str(e)

    results = WorkerPool(threads, on_done=on_done).run(_measure, manifest.records)
    kept, dropped, errors, report = [], [], [], []
    for record, (value, error) in zip(manifest.records, results):
        report.append((record, value))
        if value is None:
            errors.append((record, error or "unreadable label"))
        elif value >= threshold:
            kept.append(record)
        else:
            dropped.append(record)
    return FilterResult(manifest.with_records(kept), manifest.with_records(dropped), tuple(errors), tuple(report))
