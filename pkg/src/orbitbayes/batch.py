"""Seeded sample batches and their CSV / JSONL serialisation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

SeedLike = Union[int, np.random.Generator, None]


def make_rng(seed: SeedLike) -> tuple[np.random.Generator, Optional[int]]:
    """Return (generator, recorded seed).  A Generator passed in is used as is."""
    if isinstance(seed, np.random.Generator):
        return seed, None
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.default_rng(int(seed)), int(seed)


def fmt(x: float) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(x))


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass
class SampleBatch:
    """Draws from a sampling model plus the provenance needed to regenerate them.

    ``draws`` has shape (count, n) for vector models and (count, n, k) for
    matrix models.
    """

    draws: np.ndarray
    seed: Optional[int]
    meta: dict = field(default_factory=dict)
    acceptance: dict = field(default_factory=dict)
    resampled: int = 0

    def __len__(self):
        return len(self.draws)

    @property
    def point_shape(self) -> tuple:
        return tuple(self.draws.shape[1:])

    def header(self) -> dict:
        head = {"seed": self.seed, **self.meta, "count": len(self),
                "shape": list(self.point_shape),
                "acceptance": self.acceptance, "resampled": self.resampled}
        return to_jsonable(head)

    def flat(self) -> np.ndarray:
        return self.draws.reshape(len(self.draws), int(np.prod(self.point_shape)))

    def to_csv(self, path, extra_header: Optional[dict] = None) -> Path:
        """One row per draw, columns x_1..x_d (matrix draws flattened row-major).

        The first line is a ``#``-prefixed JSON header with the provenance.
        """
        path = Path(path)
        flat = self.flat()
        head = self.header()
        if extra_header:
            head.update(to_jsonable(extra_header))
        lines = ["# " + json.dumps(head, sort_keys=True),
                 ",".join(f"x_{j + 1}" for j in range(flat.shape[1]))]
        lines.extend(",".join(fmt(v) for v in row) for row in flat)
        path.write_text("\n".join(lines) + "\n")
        return path

    def to_jsonl(self, path, extra_header: Optional[dict] = None) -> Path:
        path = Path(path)
        head = self.header()
        if extra_header:
            head.update(to_jsonable(extra_header))
        out = [json.dumps({"header": head}, sort_keys=True)]
        for row in self.draws:
            out.append(json.dumps({"x": row.tolist()}))
        path.write_text("\n".join(out) + "\n")
        return path


def read_csv(path) -> tuple[dict, np.ndarray]:
    """Inverse of :meth:`SampleBatch.to_csv`: returns (header, draws).

    Draws are reshaped to the point shape recorded in the header.
    """
    lines = Path(path).read_text().splitlines()
    header = {}
    if lines and lines[0].startswith("#"):
        header = json.loads(lines[0][1:].strip())
        lines = lines[1:]
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:] if ln.strip()]
    ncol = len(lines[0].split(",")) if lines else 0
    shape = header.get("shape") or [ncol]
    return header, np.array(rows, dtype=float).reshape(-1, *shape)


def read_jsonl(path) -> tuple[dict, np.ndarray]:
    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0])["header"]
    draws = np.array([json.loads(ln)["x"] for ln in lines[1:] if ln.strip()], dtype=float)
    if len(draws) == 0:
        draws = draws.reshape((0, *header.get("shape", [])))
    return header, draws
