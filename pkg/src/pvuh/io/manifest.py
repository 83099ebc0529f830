"""Dataset manifest: one line-oriented index per generated dataset.

Carries the per-sequence container file, action class, generation index
(enough to re-derive the actor mesh deterministically), and content
digest; the dataset digest hashes the sorted entry digests.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

from ..errors import DataError

MANIFEST_NAME = "manifest.txt"


@dataclass(frozen=True)
class ManifestEntry:
    file: str
    motion_class: str
    gen_index: int
    digest: str  # sha256 of the container bytes


@dataclass
class Manifest:
    master_seed: int
    classes: tuple[str, ...]
    entries: list[ManifestEntry]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.master_seed}:{','.join(self.classes)}\n".encode())
        for e in self.entries:
            h.update(f"{e.file}:{e.motion_class}:{e.gen_index}:{e.digest}\n".encode())
        return h.hexdigest()

    def class_counts(self) -> dict[str, int]:
        counts = {c: 0 for c in self.classes}
        for e in self.entries:
            counts[e.motion_class] = counts.get(e.motion_class, 0) + 1
        return counts

    def to_text(self) -> str:
        lines = [
            "manifest.version = 1",
            f"manifest.master_seed = {self.master_seed}",
            f"manifest.classes = {','.join(self.classes)}",
            f"manifest.n_sequences = {len(self.entries)}",
            f"manifest.digest = {self.digest()}",
        ]
        for c, n in self.class_counts().items():
            lines.append(f"manifest.count.{c} = {n}")
        for i, e in enumerate(self.entries):
            lines.append(f"seq.{i:05d}.file = {e.file}")
            lines.append(f"seq.{i:05d}.class = {e.motion_class}")
            lines.append(f"seq.{i:05d}.index = {e.gen_index}")
            lines.append(f"seq.{i:05d}.digest = {e.digest}")
        return "\n".join(lines) + "\n"

    def save(self, directory: str | Path) -> Path:
        path = Path(directory) / MANIFEST_NAME
        path.write_text(self.to_text())
        return path

    @classmethod
    def load(cls, directory: str | Path) -> "Manifest":
        path = Path(directory) / MANIFEST_NAME
        if not path.exists():
            raise DataError(f"no {MANIFEST_NAME} in {directory}")
        kv: dict[str, str] = {}
        for line in path.read_text().splitlines():
            line = line.strip()
            if not line or "=" not in line:
                continue
            k, v = (p.strip() for p in line.split("=", 1))
            kv[k] = v
        try:
            n = int(kv["manifest.n_sequences"])
            entries = [ManifestEntry(
                file=kv[f"seq.{i:05d}.file"],
                motion_class=kv[f"seq.{i:05d}.class"],
                gen_index=int(kv[f"seq.{i:05d}.index"]),
                digest=kv[f"seq.{i:05d}.digest"],
            ) for i in range(n)]
            manifest = cls(master_seed=int(kv["manifest.master_seed"]),
                           classes=tuple(kv["manifest.classes"].split(",")),
                           entries=entries)
        except KeyError as e:
            raise DataError(f"manifest missing key {e}")
        if kv.get("manifest.digest") != manifest.digest():
            raise DataError("manifest digest mismatch; dataset was modified")
        return manifest


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
