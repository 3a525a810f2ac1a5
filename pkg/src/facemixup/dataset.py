"""Manifest and metadata JSONL helpers.

Manifest lines look like ``{"path": "...", "label": 0, "landmarks": "..."}``.
Relative paths resolve against the manifest's own directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from facemixup.errors import FaceMixupError, MalformedJson
from facemixup.landmarks import FaceImage, LandmarkSet, load_image, load_landmarks


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int
    landmarks: str | None = None

    def to_dict(self) -> dict:
        d = {"path": self.path, "label": self.label}
        if self.landmarks is not None:
            d["landmarks"] = self.landmarks
        return d


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]
    root: Path

    def __len__(self):
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def __getitem__(self, i) -> ManifestEntry:
        return self.entries[i]

    @property
    def labels(self) -> list[int]:
        return [e.label for e in self.entries]

    @property
    def num_classes(self) -> int:
        return max(self.labels) + 1 if self.entries else 0

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.root / p

    def load_image(self, i: int) -> FaceImage:
        e = self.entries[i]
        return load_image(self.resolve(e.path), id=e.path)

    def load_landmarks(self, i: int, landmarks_dir: Path | None = None) -> LandmarkSet:
        e = self.entries[i]
        if e.landmarks is None:
            raise FaceMixupError(f"manifest entry {e.path} has no landmarks sidecar")
        if landmarks_dir is not None and not Path(e.landmarks).is_absolute():
            return load_landmarks(Path(landmarks_dir) / Path(e.landmarks).name)
        return load_landmarks(self.resolve(e.landmarks))


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise MalformedJson(f"{path}:{n}: {e}") from None
    return rows


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in rows:
            fh.write(json.dumps(r, sort_keys=False) + "\n")


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    entries = []
    for n, row in enumerate(read_jsonl(path), 1):
        try:
            label = row["label"]
            if isinstance(label, bool) or not isinstance(label, int) or label < 0:
                raise MalformedJson(f"{path}:{n}: label must be a non-negative int")
            entries.append(ManifestEntry(str(row["path"]), label, row.get("landmarks")))
        except KeyError as e:
            raise MalformedJson(f"{path}:{n}: missing key {e}") from None
    return Manifest(tuple(entries), path.parent)


def write_manifest(path: str | Path, entries: Iterable[ManifestEntry]) -> None:
    write_jsonl(path, (e.to_dict() for e in entries))
