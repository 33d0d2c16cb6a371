"""Comparison of solver output with the published reference tables.

The tables ship as ``data/reference_tables.json``. Every cell names one
configuration (boundary code, ``b/h``, skew angle, gradient index, mesh) and
one quantity: ``omega`` (mode ``k`` frequency parameter), ``lambda_u`` or
``lambda_b`` (critical buckling parameter under uniaxial or biaxial load).
Cells sharing a configuration share one :class:`~sbfem_plate.solver.PlateModel`.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .material import MaterialPair
from .mesh import BoundarySpec, PlateGeometry, build_mesh
from .solver import PlateModel

logger = logging.getLogger(__name__)

TABLE_IDS = ("T1", "T2", "T3", "T4", "T5")
QUANTITIES = ("omega", "lambda_u", "lambda_b")
DEFAULT_MESH = (8, 8)
DEFAULT_ORDER = 3


@dataclass(frozen=True)
class ReferenceCell:
    bc: str
    b_over_h: float
    psi_deg: float
    n: float
    quantity: str
    mode: int
    value: float
    mesh: tuple = DEFAULT_MESH

    @property
    def config_key(self) -> tuple:
        return (self.bc, self.b_over_h, self.psi_deg, self.n, self.mesh)


@dataclass(frozen=True)
class ReferenceTable:
    id: str
    title: str
    cells: tuple
    tolerance: float
    tolerance_n0: float | None = None
    excluded: tuple = ()

    def tolerance_for(self, cell: ReferenceCell) -> float:
        if cell.n == 0 and self.tolerance_n0 is not None:
            return self.tolerance_n0
        return self.tolerance

    def is_excluded(self, cell: ReferenceCell) -> bool:
        return any(
            cell.psi_deg == ex["psi_deg"] and cell.n == ex["n"] and cell.mode in ex["modes"]
            for ex in self.excluded
        )


def _parse_table(tid: str, raw: dict) -> ReferenceTable:
    try:
        rules = raw["rules"]
        cells = []
        for c in raw["cells"]:
            if c["quantity"] not in QUANTITIES:
                raise ConfigurationError(f"unknown quantity {c['quantity']!r}", path=f"{tid}.cells")
            cells.append(ReferenceCell(
                bc=BoundarySpec(c["bc"]).code, b_over_h=float(c["b_over_h"]),
                psi_deg=float(c["psi_deg"]), n=float(c["n"]), quantity=c["quantity"],
                mode=int(c["mode"]), value=float(c["value"]),
                mesh=tuple(c.get("mesh", DEFAULT_MESH)),
            ))
        return ReferenceTable(
            id=tid, title=raw.get("title", tid), cells=tuple(cells),
            tolerance=float(rules["tolerance"]),
            tolerance_n0=float(rules["tolerance_n0"]) if "tolerance_n0" in rules else None,
            excluded=tuple(raw.get("excluded", ())),
        )
    except KeyError as exc:
        raise ConfigurationError(f"missing key {exc}", path=tid) from None


def load_reference_tables(path: str | Path | None = None) -> dict[str, ReferenceTable]:
    """Read the reference tables (packaged copy unless ``path`` is given)."""
    if path is None:
        text = resources.files("sbfem_plate").joinpath("data/reference_tables.json").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read reference file: {exc}", path="reference") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc}", path="reference") from None
    return {tid: _parse_table(tid, body) for tid, body in raw.items()}


@dataclass
class CellResult:
    table: str
    cell: ReferenceCell
    computed: float
    tolerance: float
    excluded: bool = False
    assignment: str = ""
    counted: bool = True  # False for the alternative SCSC assignment

    @property
    def rel_error(self) -> float:
        return (self.computed - self.cell.value) / abs(self.cell.value)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.computed)) and abs(self.rel_error) <= self.tolerance

    @property
    def status(self) -> str:
        if self.excluded:
            return "excluded"
        if not self.counted:
            return "alternative"
        return "pass" if self.passed else "fail"


@dataclass
class ValidationReport:
    results: list = field(default_factory=list)
    assignments: dict = field(default_factory=dict)  # table -> {code: rms error, "chosen": code}

    def counted(self, table: str | None = None):
        return [r for r in self.results if r.counted and not r.excluded
                and (table is None or r.table == table)]

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.counted())

    def summary(self) -> dict:
        out = {}
        for tid in dict.fromkeys(r.table for r in self.results):
            rows = self.counted(tid)
            n_pass = sum(r.passed for r in rows)
            worst = max(rows, key=lambda r: abs(r.rel_error) / r.tolerance, default=None)
            out[tid] = {
                "passed": n_pass, "checked": len(rows),
                "excluded": sum(r.excluded for r in self.results if r.table == tid and r.counted),
                "worst_rel_error": None if worst is None else worst.rel_error,
            }
            if tid in self.assignments:
                out[tid]["assignments"] = self.assignments[tid]
        return out


class _ConfigRunner:
    """Computes (and caches) every quantity of one configuration."""

    def __init__(self, key, order, options):
        bc, bh, psi, n, mesh = key
        geom = PlateGeometry(1.0, 1.0, 1.0 / bh, math.radians(psi))
        self.model = PlateModel(
            build_mesh(geom, mesh[0], mesh[1], order),
            MaterialPair(gradient_index=n), bc,
            stiffness_form=options.get("stiffness_form", "consistent"),
            gradation=options.get("gradation", "global"),
        )
        self.kg_mode = options.get("kg_mode", "deflection-only")

    def compute(self, quantities: set, n_modes: int) -> dict:
        out = {}
        if "omega" in quantities:
            res = self.model.vibration(n_modes)
            for k, v in enumerate(res.values, start=1):
                out[("omega", k)] = float(v)
        for q, load in (("lambda_u", "uniaxial"), ("lambda_b", "biaxial")):
            if q in quantities:
                out[(q, 1)] = float(self.model.buckling(load, kg_mode=self.kg_mode).values[0])
        return out


def _evaluate(jobs: dict, order: int, options: dict, workers: int) -> dict:
    """``jobs`` maps config key -> (quantities, n_modes); returns key -> values."""

    def run(item):
        key, (quantities, n_modes) = item
        try:
            return key, _ConfigRunner(key, order, options).compute(quantities, n_modes)
        except Exception as exc:  # recorded as NaN, reported as failing cells
            logger.warning("configuration %s failed: %s", key, exc)
            return key, {}

    items = list(jobs.items())
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return dict(pool.map(run, items))
    return dict(map(run, items))


def validate(tables: dict[str, ReferenceTable], order: int = DEFAULT_ORDER,
             options: dict | None = None, workers: int = 1) -> ValidationReport:
    """Run every referenced configuration and compare within table tolerances.

    For ``SCSC`` cells the rotated assignment (``CSCS``) is computed too;
    the one with the smaller RMS relative error over the checked cells is
    counted and both are reported. Assignments are compared per table.
    """
    options = options or {}
    jobs: dict = {}

    def add(key, cell):
        q, m = jobs.setdefault(key, (set(), 1))
        q.add(cell.quantity)
        jobs[key] = (q, max(m, cell.mode))

    for table in tables.values():
        for cell in table.cells:
            add(cell.config_key, cell)
            if cell.bc == "SCSC":
                add((BoundarySpec(cell.bc).swapped().code,) + cell.config_key[1:], cell)

    values = _evaluate(jobs, order, options, workers)
    report = ValidationReport()
    for tid, table in tables.items():
        variants: dict[str, list[CellResult]] = {"given": [], "rotated": []}
        for cell in table.cells:
            codes = [("given", cell.bc)]
            if cell.bc == "SCSC":
                codes.append(("rotated", BoundarySpec(cell.bc).swapped().code))
            for variant, code in codes:
                key = (code,) + cell.config_key[1:]
                v = values.get(key, {}).get((cell.quantity, cell.mode), float("nan"))
                variants[variant].append(CellResult(
                    table=tid, cell=cell, computed=v, tolerance=table.tolerance_for(cell),
                    excluded=table.is_excluded(cell), assignment=code,
                ))
        if variants["rotated"]:
            rms = {}
            for variant, rows in variants.items():
                errs = [r.rel_error for r in rows if not r.excluded]
                rms[variant] = float(np.sqrt(np.mean(np.square(errs)))) if errs else float("nan")
            chosen = min(rms, key=lambda c: (not np.isfinite(rms[c]), rms[c]))
            for variant, rows in variants.items():
                for r in rows:
                    r.counted = variant == chosen
            report.assignments[tid] = {
                "rms_rel_error": {variants[v][0].assignment: e for v, e in rms.items()},
                "chosen": variants[chosen][0].assignment,
            }
        for rows in variants.values():
            report.results.extend(rows)
    return report
