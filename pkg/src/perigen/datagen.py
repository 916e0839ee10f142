"""Synthetic periodic-graph datasets: construction, labeling, file I/O.

Records are written as JSON lines with fields
``{unit_kind, seed, n, m, A_l, A_g, A_n, A}`` where the matrices are
dense row-major 0/1 integer arrays: ``A_l`` the basic unit, ``A_g`` the
unit layout, ``A_n`` the cross-unit bonds, and ``A`` the assembled
adjacency padded to ``n_max * m_max``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .pgraph import Decomposition, PeriodicGraph, assemble, pad_adjacency

UNIT_KINDS = ("triangle", "grid", "hexagon")
UNIT_SIZES = {"triangle": 3, "grid": 4, "hexagon": 6}
GLOBAL_PATTERNS = ("chain", "cycle")

DEFAULT_N_MAX = 6
DEFAULT_M_MAX = 8


class DatasetFormatError(ValueError):
    """A dataset file line failed to parse or validate."""


def make_unit(kind: str) -> np.ndarray:
    """Basic-unit adjacency: triangle -> K3, grid -> 4-cycle, hexagon -> 6-cycle."""
    if kind not in UNIT_KINDS:
        raise ValueError(f"unknown unit kind {kind!r}, expected one of {UNIT_KINDS}")
    n = UNIT_SIZES[kind]
    if kind == "triangle":
        return np.ones((3, 3), dtype=np.int64) - np.eye(3, dtype=np.int64)
    return _cycle_adjacency(n)


def _cycle_adjacency(size: int) -> np.ndarray:
    a = np.zeros((size, size), dtype=np.int64)
    idx = np.arange(size)
    a[idx, (idx + 1) % size] = 1
    a[(idx + 1) % size, idx] = 1
    return a


def make_global(pattern: str, m: int) -> np.ndarray:
    """Unit-layout adjacency: path graph for 'chain', cycle graph for 'cycle'."""
    if pattern not in GLOBAL_PATTERNS:
        raise ValueError(f"unknown global pattern {pattern!r}, expected one of {GLOBAL_PATTERNS}")
    if m < 1:
        raise ValueError(f"unit count must be >= 1, got {m}")
    if pattern == "cycle":
        if m < 3:
            raise ValueError(f"cycle layout needs at least 3 units, got {m}")
        return _cycle_adjacency(m)
    a = np.zeros((m, m), dtype=np.int64)
    idx = np.arange(m - 1)
    a[idx, idx + 1] = 1
    a[idx + 1, idx] = 1
    return a


def make_neighborhood(kind: str) -> np.ndarray:
    """Cross-unit bond pattern: one bond, last node of the lower unit to
    the first node of the higher unit."""
    n = UNIT_SIZES.get(kind)
    if n is None:
        raise ValueError(f"unknown unit kind {kind!r}, expected one of {UNIT_KINDS}")
    bonds = np.zeros((n, n), dtype=np.int64)
    bonds[n - 1, 0] = 1
    return bonds


@dataclass(frozen=True, eq=False)
class DatasetRecord:
    """One labeled graph: a decomposition, its padded adjacency, and the seed."""

    unit_kind: str | None
    decomposition: Decomposition | None
    adjacency: np.ndarray | None
    seed: int | None = None

    @property
    def n(self) -> int | None:
        return self.decomposition.n if self.decomposition is not None else None

    @property
    def m(self) -> int | None:
        return self.decomposition.m if self.decomposition is not None else None

    def graph(self) -> PeriodicGraph:
        """View the record as a PeriodicGraph (padding-aware)."""
        if self.adjacency is None:
            raise ValueError("record carries no assembled adjacency")
        if self.decomposition is not None:
            num = self.decomposition.n * self.decomposition.m
        else:
            num = _strip_size(self.adjacency)
        return PeriodicGraph(
            adjacency=self.adjacency,
            num_nodes=num,
            unit_label=self.unit_kind,
            n=self.n,
            m=self.m,
            decomposition=self.decomposition,
        )


def _strip_size(adjacency: np.ndarray) -> int:
    """True size of a padded matrix: last row/column touching any entry."""
    nz = np.flatnonzero(adjacency.any(axis=0) | adjacency.any(axis=1))
    return int(nz[-1]) + 1 if nz.size else adjacency.shape[0]


@dataclass(frozen=True)
class DatasetManifest:
    """Generation plan: which units, how many graphs each, and the bounds."""

    counts: dict[str, int]
    m_max: int = DEFAULT_M_MAX
    n_max: int = DEFAULT_N_MAX
    global_pattern: str = "chain"
    seed: int = 0
    m_min: int | None = None  # default 2 for chain, 3 for cycle

    def __post_init__(self):
        if not self.counts:
            raise ValueError("manifest must request at least one unit kind")
        for kind, count in self.counts.items():
            if kind not in UNIT_KINDS:
                raise ValueError(f"unknown unit kind {kind!r}")
            if count < 1:
                raise ValueError(f"count for {kind!r} must be >= 1, got {count}")
            if UNIT_SIZES[kind] > self.n_max:
                raise ValueError(
                    f"unit {kind!r} has size {UNIT_SIZES[kind]} > n_max {self.n_max}"
                )
        if self.global_pattern not in GLOBAL_PATTERNS:
            raise ValueError(f"unknown global pattern {self.global_pattern!r}")
        lo = self.effective_m_min
        if lo > self.m_max:
            raise ValueError(f"m_max {self.m_max} below minimum unit count {lo}")

    @property
    def effective_m_min(self) -> int:
        if self.m_min is not None:
            return self.m_min
        return 3 if self.global_pattern == "cycle" else 2


def generate_dataset(manifest: DatasetManifest) -> list[DatasetRecord]:
    """Generate labeled records, reproducibly from the manifest seed.

    The unit count m is drawn uniformly in [m_min, m_max] per record
    with a per-record generator, so records are independent of each
    other given their seeds.
    """
    master = np.random.default_rng(manifest.seed)
    total = sum(manifest.counts[k] for k in UNIT_KINDS if k in manifest.counts)
    record_seeds = master.integers(0, 2**62, size=total)
    records = []
    pad_size = manifest.n_max * manifest.m_max
    i = 0
    for kind in UNIT_KINDS:
        if kind not in manifest.counts:
            continue
        for _ in range(manifest.counts[kind]):
            seed = int(record_seeds[i])
            i += 1
            rng = np.random.default_rng(seed)
            m = int(rng.integers(manifest.effective_m_min, manifest.m_max + 1))
            d = Decomposition(
                unit=make_unit(kind),
                layout=make_global(manifest.global_pattern, m),
                bonds=make_neighborhood(kind),
            )
            adjacency = pad_adjacency(assemble(d).stripped, pad_size)
            records.append(
                DatasetRecord(
                    unit_kind=kind, decomposition=d, adjacency=adjacency, seed=seed
                )
            )
    return records


def _matrix_to_lists(a: np.ndarray | None):
    return None if a is None else a.tolist()


def _matrix_from_lists(data, name: str, lineno: int) -> np.ndarray | None:
    if data is None:
        return None
    try:
        a = np.array(data, dtype=np.int64)
    except ValueError as exc:
        raise DatasetFormatError(f"line {lineno}: field {name} is not a rectangular matrix ({exc})")
    if a.ndim != 2:
        raise DatasetFormatError(f"line {lineno}: field {name} is not a 2-D matrix")
    return a


def save_dataset(records: Iterable[DatasetRecord], path: str | Path) -> None:
    """Write records as JSON lines (UTF-8)."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            d = rec.decomposition
            obj = {
                "unit_kind": rec.unit_kind,
                "seed": rec.seed,
                "n": rec.n,
                "m": rec.m,
                "A_l": _matrix_to_lists(d.unit if d else None),
                "A_g": _matrix_to_lists(d.layout if d else None),
                "A_n": _matrix_to_lists(d.bonds if d else None),
                "A": _matrix_to_lists(rec.adjacency),
            }
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def load_dataset(path: str | Path) -> list[DatasetRecord]:
    """Read records back; raises DatasetFormatError naming the bad line."""
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {lineno}: invalid JSON ({exc.msg})")
            records.append(_record_from_obj(obj, lineno))
    return records


def _record_from_obj(obj: dict, lineno: int) -> DatasetRecord:
    unit_kind = obj.get("unit_kind")
    if unit_kind is not None and unit_kind not in UNIT_KINDS:
        raise DatasetFormatError(f"line {lineno}: unknown unit_kind {unit_kind!r}")
    n, m = obj.get("n"), obj.get("m")
    unit = _matrix_from_lists(obj.get("A_l"), "A_l", lineno)
    layout = _matrix_from_lists(obj.get("A_g"), "A_g", lineno)
    bonds = _matrix_from_lists(obj.get("A_n"), "A_n", lineno)
    adjacency = _matrix_from_lists(obj.get("A"), "A", lineno)

    decomposition = None
    if unit is not None or layout is not None or bonds is not None:
        if unit is None or layout is None or bonds is None:
            raise DatasetFormatError(
                f"line {lineno}: A_l, A_g, A_n must be present together"
            )
        if n is not None and unit.shape[0] != n:
            raise DatasetFormatError(
                f"line {lineno}: A_l size {unit.shape[0]} does not match declared n={n}"
            )
        if m is not None and layout.shape[0] != m:
            raise DatasetFormatError(
                f"line {lineno}: A_g size {layout.shape[0]} does not match declared m={m}"
            )
        try:
            decomposition = Decomposition(unit=unit, layout=layout, bonds=bonds)
        except ValueError as exc:
            raise DatasetFormatError(f"line {lineno}: {exc}")

    if adjacency is None and decomposition is None:
        raise DatasetFormatError(f"line {lineno}: record has neither A nor a decomposition")
    if adjacency is not None:
        if adjacency.shape[0] != adjacency.shape[1]:
            raise DatasetFormatError(f"line {lineno}: A must be square")
        if decomposition is not None:
            num = decomposition.n * decomposition.m
            if adjacency.shape[0] < num:
                raise DatasetFormatError(
                    f"line {lineno}: A size {adjacency.shape[0]} below n*m = {num}"
                )

    seed = obj.get("seed")
    return DatasetRecord(
        unit_kind=unit_kind,
        decomposition=decomposition,
        adjacency=adjacency,
        seed=seed,
    )


def records_equal(a: DatasetRecord, b: DatasetRecord) -> bool:
    """Field-wise equality used by roundtrip checks."""
    if (a.unit_kind, a.seed) != (b.unit_kind, b.seed):
        return False
    if (a.decomposition is None) != (b.decomposition is None):
        return False
    if a.decomposition is not None and a.decomposition != b.decomposition:
        return False
    if (a.adjacency is None) != (b.adjacency is None):
        return False
    if a.adjacency is not None and not np.array_equal(a.adjacency, b.adjacency):
        return False
    return True
