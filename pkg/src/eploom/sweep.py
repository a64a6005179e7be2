"""Parameter-plane maps of transfer fidelity and winding number.

Every cell instantiates the template loop with two amplitudes replaced by grid
values and is computed independently. Rows (fixed x) are split into contiguous
blocks, one per worker thread, and each worker writes only its own rows, so the
result does not depend on the number of workers or on scheduling.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import io
import json
import math
import os
import threading
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import topo
from .errors import Cancelled, CoalescentEigensystem, EploomError, GridMismatch, LoopThroughEP, NoComparableCells
from .evolve import IntegratorOpts, fmt, transfer_fidelity
from .loops import AMPLITUDES, Direction, LoopSpec

OK = "ok"
GRAZING = "ep-grazing"
FAILED = "failed"

#: Map axes used for each preset.
DEFAULT_AXES = {1: ("G0", "Gamma0"), 2: ("Delta0", "Gamma0"), 3: ("Delta0", "G0")}


@dataclasses.dataclass(frozen=True)
class GridSpec:
    x_param: str
    y_param: str
    x_range: tuple[float, float] = (-0.4, 0.4)
    y_range: tuple[float, float] = (-0.4, 0.4)
    nx: int = 101
    ny: int = 101

    def __post_init__(self):
        for name in (self.x_param, self.y_param):
            if name not in AMPLITUDES:
                raise ValueError(f"grid axis must be one of {AMPLITUDES}, got {name!r}")
        if self.x_param == self.y_param:
            raise ValueError("grid axes must differ")
        object.__setattr__(self, "x_range", tuple(float(v) for v in self.x_range))
        object.__setattr__(self, "y_range", tuple(float(v) for v in self.y_range))
        if len(self.x_range) != 2 or len(self.y_range) != 2:
            raise ValueError("ranges are (low, high) pairs")
        if not all(math.isfinite(v) for v in self.x_range + self.y_range):
            raise ValueError("grid ranges must be finite")
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 2 or self.ny < 2:
            raise ValueError("nx and ny must be integers >= 2")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(*self.x_range, int(self.nx))

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(*self.y_range, int(self.ny))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["x_range"], d["y_range"] = list(self.x_range), list(self.y_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> GridSpec:
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown grid keys: {sorted(unknown)}")
        return cls(**d)


def default_grid(preset_id: int, n: int = 101) -> GridSpec:
    if preset_id not in DEFAULT_AXES:
        raise ValueError(f"preset id must be 1, 2 or 3, got {preset_id!r}")
    x, y = DEFAULT_AXES[preset_id]
    return GridSpec(x, y, nx=n, ny=n)


@dataclasses.dataclass
class MapResult:
    """Cell values indexed ``[ix, iy]`` with a status flag per cell."""

    grid: GridSpec
    kind: str
    values: np.ndarray
    flags: np.ndarray
    marker: tuple[float, float]
    direction: Direction
    template: LoopSpec

    @property
    def omega(self) -> float:
        return self.template.omega

    @property
    def ok(self) -> np.ndarray:
        return self.flags == OK

    def cell_loop(self, ix: int, iy: int) -> LoopSpec:
        return _cell_loop(self.template, self.grid, self.direction, self.grid.xs[ix], self.grid.ys[iy])

    def sidecar(self) -> dict:
        return {
            "kind": self.kind,
            "grid": self.grid.to_dict(),
            "direction": self.direction.value,
            "omega": self.omega,
            "marker": list(self.marker),
            "template": self.template.to_dict(),
        }

    def to_csv(self, fh=None, header_lines: Sequence[str] = ()) -> str:
        buf = io.StringIO() if fh is None else fh
        for line in header_lines:
            buf.write(f"# {line}\n")
        g = self.grid
        buf.write(f"# kind: {self.kind}\n")
        buf.write(f"# grid: {json.dumps(g.to_dict(), sort_keys=True)}\n")
        buf.write(f"# direction: {self.direction.value}\n")
        buf.write(f"# omega: {fmt(self.omega)}\n")
        buf.write(f"# marker: {fmt(self.marker[0])},{fmt(self.marker[1])}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([g.x_param, g.y_param, "value", "flag"])
        xs, ys = g.xs, g.ys
        for i in range(g.nx):
            for j in range(g.ny):
                w.writerow([fmt(xs[i]), fmt(ys[j]), fmt(self.values[i, j]), self.flags[i, j]])
        return buf.getvalue() if fh is None else ""

    def write(self, stem: str | Path, header_lines: Sequence[str] = ()) -> tuple[Path, Path]:
        """Write ``stem.csv`` and the ``stem.json`` sidecar."""
        stem = Path(stem)
        csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
        with open(csv_path, "w", newline="") as fh:
            self.to_csv(fh, header_lines)
        with open(json_path, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return csv_path, json_path


def read_map(stem: str | Path) -> MapResult:
    """Load a map written by :meth:`MapResult.write`."""
    stem = Path(stem)
    with open(stem.with_suffix(".json")) as fh:
        meta = json.load(fh)
    grid = GridSpec.from_dict(meta["grid"])
    with open(stem.with_suffix(".csv"), newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))][1:]
    if len(rows) != grid.nx * grid.ny:
        raise ValueError(f"{stem}: expected {grid.nx * grid.ny} cells, found {len(rows)}")
    values = np.array([float(r[2]) if r[2] else math.nan for r in rows]).reshape(grid.nx, grid.ny)
    flags = np.array([r[3] for r in rows], dtype=object).reshape(grid.nx, grid.ny)
    return MapResult(
        grid=grid,
        kind=meta["kind"],
        values=values,
        flags=flags,
        marker=tuple(meta["marker"]),
        direction=Direction(meta["direction"]),
        template=LoopSpec.from_dict(meta["template"]),
    )


def _cell_loop(template: LoopSpec, grid: GridSpec, direction: Direction, x: float, y: float) -> LoopSpec:
    return template.with_(**{grid.x_param: float(x), grid.y_param: float(y)}, direction=direction, cycles=1)


def _run(template, grid, direction, kind, cell_fn, jobs, cancel) -> MapResult:
    for name in (grid.x_param, grid.y_param):
        if not template.amplitude_enters(name):
            raise ValueError(f"{name} does not enter this loop template")
    direction = template.direction if direction is None else Direction(direction)
    values = np.full((grid.nx, grid.ny), math.nan)
    flags = np.full((grid.nx, grid.ny), FAILED, dtype=object)
    xs, ys = grid.xs, grid.ys
    cancel = cancel or threading.Event()

    def work(rows):
        for i in rows:
            for j in range(grid.ny):
                if cancel.is_set():
                    return
                values[i, j], flags[i, j] = cell_fn(_cell_loop(template, grid, direction, xs[i], ys[j]))

    workers = max(1, min(jobs or os.cpu_count() or 1, grid.nx))
    blocks = np.array_split(np.arange(grid.nx), workers)
    if workers == 1:
        work(blocks[0])
    else:
        with concurrent.futures.ThreadPoolExecutor(workers) as pool:
            for fut in [pool.submit(work, b) for b in blocks]:
                fut.result()
    if cancel.is_set():
        raise Cancelled("map computation cancelled")
    marker = (float(getattr(template, grid.x_param)), float(getattr(template, grid.y_param)))
    return MapResult(grid, kind, values, flags, marker, direction, template)


def fidelity_cell(loop: LoopSpec, opts: IntegratorOpts | None = None) -> tuple[float, str]:
    """``(F_+(T), flag)`` for one loop started in phi_+."""
    try:
        value = transfer_fidelity(loop, "+", opts)[0]
    except CoalescentEigensystem:
        return math.nan, GRAZING
    except EploomError:
        return math.nan, FAILED
    return (value, OK) if math.isfinite(value) else (math.nan, FAILED)


def winding_cell(loop: LoopSpec) -> tuple[float, str]:
    """``(nu, flag)`` for one loop.

    A loop through an EP is flagged as grazing; its value is the winding implied
    by the radicand image when that is unambiguous (0 for a real radicand), else NaN.
    """
    try:
        return topo.winding_number(loop).nu_quantized, OK
    except LoopThroughEP:
        w = topo.grazing_winding(loop)
        return (math.nan if w is None else -0.5 * w + 0.0), GRAZING
    except EploomError:
        return math.nan, FAILED


def fidelity_map(template: LoopSpec, grid: GridSpec, direction=None, opts: IntegratorOpts | None = None,
                 jobs: int | None = None, cancel: threading.Event | None = None) -> MapResult:
    """F_+(T) after one period from phi_+(0), per cell."""
    return _run(template, grid, direction, "fidelity", lambda lp: fidelity_cell(lp, opts), jobs, cancel)


def winding_map(template: LoopSpec, grid: GridSpec, direction=None, jobs: int | None = None,
                cancel: threading.Event | None = None) -> MapResult:
    """Winding number per cell; loops through an EP are flagged ``ep-grazing``."""
    return _run(template, grid, direction, "winding", winding_cell, jobs, cancel)


@dataclasses.dataclass(frozen=True)
class Correlation:
    """Agreement of ``F_+ < threshold`` with ``|nu| == 1/2`` over cells ok in both maps."""

    compared: int
    agree: int
    both: int
    low_fidelity_only: int
    winding_only: int

    @property
    def agreement(self) -> float:
        return self.agree / self.compared

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["agreement"] = self.agreement
        return d


def correlate(f_map: MapResult, nu_map: MapResult, threshold: float = 0.5,
              low: Callable[[np.ndarray], np.ndarray] | None = None) -> Correlation:
    if f_map.grid != nu_map.grid:
        raise GridMismatch(f"maps are on different grids: {f_map.grid} vs {nu_map.grid}")
    mask = f_map.ok & nu_map.ok
    n = int(np.count_nonzero(mask))
    if n == 0:
        raise NoComparableCells("no cell is flagged ok in both maps")
    a = (f_map.values < threshold) if low is None else low(f_map.values)
    b = np.abs(np.abs(nu_map.values) - 0.5) < 1e-9
    a, b = a[mask], b[mask]
    return Correlation(
        compared=n,
        agree=int(np.count_nonzero(a == b)),
        both=int(np.count_nonzero(a & b)),
        low_fidelity_only=int(np.count_nonzero(a & ~b)),
        winding_only=int(np.count_nonzero(~a & b)),
    )
