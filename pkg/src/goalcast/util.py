"""Small shared helpers: seeded RNG streams and deterministic CSV io."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, stream key); stable across runs."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def fmt(value) -> str:
    """Shortest round-trip text for floats; plain str for everything else."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], seed=None) -> None:
    """CSV with a header row and an optional leading `# seed=<n>` comment."""
    lines = []
    if seed is not None:
        lines.append(f"# seed={seed}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and string rows, skipping `#` comment lines."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]
