"""Paired real/fake dataset layout.

A dataset root holds ``real/``, ``fake/`` and ``manifest.csv``; every
manifest row names one PNG that exists under both subdirectories with
identical dimensions.  The manifest also records the generation parameters
per pair, which keeps runs auditable without re-deriving anything.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from ..errors import DataError
from .png import load_image
from .reports import read_report

MANIFEST_NAME = "manifest.csv"


@dataclass(frozen=True)
class PairEntry:
    filename: str
    kind: str
    stride: int
    kernel_size: int
    gain: float
    seed: int


@dataclass
class PairedDataset:
    root: Path
    entries: list[PairEntry]

    @classmethod
    def open(cls, root: str | Path) -> "PairedDataset":
        root = Path(root)
        manifest = root / MANIFEST_NAME
        if not manifest.is_file():
            raise DataError(f"no {MANIFEST_NAME} under {root}")
        entries: list[PairEntry] = []
        for i, row in enumerate(read_report(manifest)):
            try:
                entries.append(PairEntry(
                    filename=row["filename"], kind=row["kind"],
                    stride=int(row["stride"]), kernel_size=int(row["kernel"]),
                    gain=float(row["gain"]), seed=int(row["seed"])))
            except (KeyError, ValueError) as e:
                raise DataError(f"{manifest}: bad row {i}: {e}") from e
        if not entries:
            raise DataError(f"{manifest}: empty dataset")
        ds = cls(root=root, entries=entries)
        ds._validate_files()
        return ds

    def _validate_files(self) -> None:
        for e in self.entries:
            rp, fp = self.real_path(e.filename), self.fake_path(e.filename)
            for p in (rp, fp):
                if not p.is_file():
                    raise DataError(f"dataset file missing: {p}")
            with PILImage.open(rp) as a, PILImage.open(fp) as b:
                if a.size != b.size:
                    raise DataError(
                        f"pair {e.filename}: real is {a.size}, fake is {b.size}")

    def real_path(self, filename: str) -> Path:
        return self.root / "real" / filename

    def fake_path(self, filename: str) -> Path:
        return self.root / "fake" / filename

    def __len__(self) -> int:
        return len(self.entries)

    def load_pair(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        e = self.entries[index]
        return load_image(self.real_path(e.filename)), load_image(self.fake_path(e.filename))

    def load_real(self, index: int) -> np.ndarray:
        return load_image(self.real_path(self.entries[index].filename))

    def load_fake(self, index: int) -> np.ndarray:
        return load_image(self.fake_path(self.entries[index].filename))

    def load_all(self, limit: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Stack (reals, fakes) as (N, H, W, C) float32 arrays."""
        n = len(self.entries) if limit is None else min(limit, len(self.entries))
        reals, fakes = [], []
        for i in range(n):
            r, f = self.load_pair(i)
            reals.append(r)
            fakes.append(f)
        return np.stack(reals), np.stack(fakes)
