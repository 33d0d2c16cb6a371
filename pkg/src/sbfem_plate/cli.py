"""Command line front end: ``run``, ``sweep``, ``converge`` and ``validate``.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 numerical failure.

Configuration files are YAML (JSON is accepted as well)::

    geometry: {a: 1.0, b: 1.0, h: 0.01, psi_deg: 0}
    material:                      # optional, defaults to Si3N4 / SUS304
      ceramic: {E_GPa: 348.43, nu: 0.24, rho: 2370}
      metal: {E_GPa: 201.04, nu: 0.3262, rho: 8166}
      gradient_index: 1
      gradation: global            # or parent
    mesh: {nex: 8, nez: 8, order: 3}
    bc: SSSS                       # edges t=0, s=a, t=b, s=0
    analysis:
      kind: vibration              # or buckling
      modes: 4
      load: uniaxial               # buckling only; or biaxial
      kg_mode: deflection-only     # or all-dof
      stiffness_form: consistent   # or printed
      length_scale: a              # side used in the frequency parameter
    output: {format: csv, path: result.csv}
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import ConfigurationError, NumericalError, PlateError
from .kernel import KG_MODES
from .material import SI3N4, SUS304, MaterialPair, PhaseProperties
from .mesh import BoundarySpec, PlateGeometry, build_mesh
from .solver import GRADATIONS, STIFFNESS_FORMS, AnalysisResult, PlateModel
from .validation import TABLE_IDS, load_reference_tables, validate

logger = logging.getLogger("sbfem_plate")

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
WORKERS_ENV = "SBFEM_PLATE_WORKERS"
SWEEP_PARAMETERS = ("a_over_b", "n", "psi")

OMEGA_DEFINITION = "omega * (L/pi)^2 * sqrt(rho_c * h / D_c), D_c = E_c h^3 / (12 (1 - nu_c^2))"
LAMBDA_DEFINITION = "N_cr * b^2 / (pi^2 * D_c)"
ELASTICITY = "isotropic 3D Hooke matrix (6x6), no plane-stress reduction"
EDGE_NAMES = ("t=0", "s=a", "t=b", "s=0")


def fmt(value: float) -> str:
    """Fixed 6-significant-digit text used in every output file."""
    return f"{value:.6g}"


def _round6(value):
    if isinstance(value, float):
        return float(fmt(value)) if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _round6(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round6(v) for v in value]
    return value


# --------------------------------------------------------------------------- config


@dataclass(frozen=True)
class AnalysisOptions:
    kind: str = "vibration"
    modes: int = 4
    load: str = "uniaxial"
    kg_mode: str = "deflection-only"
    stiffness_form: str = "consistent"
    length_scale: str = "a"


@dataclass(frozen=True)
class RunConfig:
    geometry: PlateGeometry
    material: MaterialPair
    bc: BoundarySpec
    nex: int = 8
    nez: int = 8
    order: int = 3
    gradation: str = "global"
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)
    output_format: str = "csv"
    output_path: str | None = None

    def model(self) -> PlateModel:
        mesh = build_mesh(self.geometry, self.nex, self.nez, self.order)
        return PlateModel(mesh, self.material, self.bc,
                          stiffness_form=self.analysis.stiffness_form, gradation=self.gradation)

    def as_dict(self) -> dict:
        g = self.geometry
        phase = lambda p: {"E_GPa": p.E / 1e9, "nu": p.nu, "rho": p.rho}  # noqa: E731
        return {
            "geometry": {"a": g.a, "b": g.b, "h": g.h, "psi_deg": math.degrees(g.psi)},
            "material": {"ceramic": phase(self.material.ceramic), "metal": phase(self.material.metal),
                         "gradient_index": self.material.gradient_index, "gradation": self.gradation},
            "mesh": {"nex": self.nex, "nez": self.nez, "order": self.order},
            "bc": self.bc.code,
            "analysis": asdict(self.analysis),
        }


def _section(tree: dict, name: str, allowed: set, required: bool = False) -> dict:
    sub = tree.get(name)
    if sub is None:
        if required:
            raise ConfigurationError("missing section", path=name)
        return {}
    if not isinstance(sub, dict):
        raise ConfigurationError("expected a mapping", path=name)
    unknown = set(sub) - allowed
    if unknown:
        raise ConfigurationError(f"unknown key(s) {sorted(unknown)}", path=name)
    return sub


def _number(d: dict, key: str, path: str, default=None, integer: bool = False):
    if key not in d:
        if default is None:
            raise ConfigurationError("missing key", path=f"{path}.{key}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigurationError(f"expected a number, got {v!r}", path=f"{path}.{key}")
    if integer:
        if int(v) != v:
            raise ConfigurationError(f"expected an integer, got {v!r}", path=f"{path}.{key}")
        return int(v)
    if not math.isfinite(v):
        raise ConfigurationError(f"expected a finite number, got {v!r}", path=f"{path}.{key}")
    return float(v)


def _choice(d: dict, key: str, path: str, choices, default: str) -> str:
    v = d.get(key, default)
    if v not in choices:
        raise ConfigurationError(f"expected one of {list(choices)}, got {v!r}", path=f"{path}.{key}")
    return v


def _phase(d, path: str, default: PhaseProperties) -> PhaseProperties:
    if d is None:
        return default
    if not isinstance(d, dict) or set(d) - {"E_GPa", "nu", "rho"}:
        raise ConfigurationError("expected a mapping with E_GPa, nu, rho", path=path)
    try:
        return PhaseProperties(
            E=_number(d, "E_GPa", path, default.E / 1e9) * 1e9,
            nu=_number(d, "nu", path, default.nu),
            rho=_number(d, "rho", path, default.rho),
        )
    except PlateError as exc:
        raise ConfigurationError(str(exc), path=path) from None


def config_from_mapping(tree) -> RunConfig:
    """Validate a parsed config tree and apply defaults."""
    if not isinstance(tree, dict):
        raise ConfigurationError("top level must be a mapping", path="<root>")
    unknown = set(tree) - {"geometry", "material", "mesh", "bc", "analysis", "output"}
    if unknown:
        raise ConfigurationError(f"unknown key(s) {sorted(unknown)}", path="<root>")

    g = _section(tree, "geometry", {"a", "b", "h", "psi_deg"}, required=True)
    geometry = PlateGeometry(
        a=_number(g, "a", "geometry"), b=_number(g, "b", "geometry"), h=_number(g, "h", "geometry"),
        psi=math.radians(_number(g, "psi_deg", "geometry", 0.0)),
    )

    m = _section(tree, "material", {"ceramic", "metal", "gradient_index", "gradation"})
    n = _number(m, "gradient_index", "material", 0.0)
    if n < 0:
        raise ConfigurationError(f"must be >= 0, got {n}", path="material.gradient_index")
    material = MaterialPair(_phase(m.get("ceramic"), "material.ceramic", SI3N4),
                            _phase(m.get("metal"), "material.metal", SUS304), n)
    gradation = _choice(m, "gradation", "material", GRADATIONS, "global")

    me = _section(tree, "mesh", {"nex", "nez", "order"})
    nex = _number(me, "nex", "mesh", 8, integer=True)
    nez = _number(me, "nez", "mesh", nex, integer=True)
    order = _number(me, "order", "mesh", 3, integer=True)
    if nex < 1 or nez < 1:
        raise ConfigurationError("element counts must be >= 1", path="mesh")
    if order < 2:
        raise ConfigurationError(f"must be >= 2, got {order}", path="mesh.order")

    if "bc" not in tree:
        raise ConfigurationError("missing key", path="bc")
    bc = BoundarySpec(str(tree["bc"]))

    an = _section(tree, "analysis", {"kind", "modes", "load", "kg_mode", "stiffness_form",
                                     "length_scale"}, required=True)
    kind = _choice(an, "kind", "analysis", ("vibration", "buckling"), "vibration")
    modes = _number(an, "modes", "analysis", 4 if kind == "vibration" else 1, integer=True)
    if modes < 1:
        raise ConfigurationError(f"must be >= 1, got {modes}", path="analysis.modes")
    analysis = AnalysisOptions(
        kind=kind, modes=modes,
        load=_choice(an, "load", "analysis", ("uniaxial", "biaxial"), "uniaxial"),
        kg_mode=_choice(an, "kg_mode", "analysis", KG_MODES, "deflection-only"),
        stiffness_form=_choice(an, "stiffness_form", "analysis", STIFFNESS_FORMS, "consistent"),
        length_scale=_choice(an, "length_scale", "analysis", ("a", "b"), "a"),
    )
    if kind == "buckling" and bc.code == "FFFF":
        raise ConfigurationError("buckling needs at least one supported edge", path="bc")

    out = _section(tree, "output", {"format", "path"})
    path = out.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigurationError("expected a string", path="output.path")
    return RunConfig(geometry, material, bc, nex, nez, order, gradation, analysis,
                     _choice(out, "format", "output", ("csv", "json"), "csv"), path)


def parse_config(path: str | Path) -> RunConfig:
    """Read and validate a YAML/JSON config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc.strerror}", path=str(path)) from None
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"not valid YAML/JSON: {exc}", path=str(path)) from None
    return config_from_mapping(tree)


# --------------------------------------------------------------------------- analyses


def analyse(config: RunConfig, model: PlateModel | None = None) -> AnalysisResult:
    model = model or config.model()
    an = config.analysis
    if an.kind == "vibration":
        return model.vibration(an.modes, length_scale=an.length_scale)
    return model.buckling(an.load, kg_mode=an.kg_mode, modes=an.modes)


def result_metadata(config: RunConfig, result: AnalysisResult) -> dict:
    meta = dict(result.metadata)
    meta.update({
        "version": __version__,
        "kg_mode": config.analysis.kg_mode if result.kind == "buckling" else None,
        "elasticity_matrix": ELASTICITY,
        "omega_definition": OMEGA_DEFINITION.replace("L", config.analysis.length_scale),
        "lambda_definition": LAMBDA_DEFINITION,
        "edge_conditions": dict(zip(EDGE_NAMES, config.bc.code)),
        "pre_buckling_state": "uniform unit resultants, compression positive",
    })
    if config.bc.code in ("SCSC", "CSCS"):
        simple = [e for e, c in zip(EDGE_NAMES, config.bc.code) if c == "S"]
        meta["scsc_assignment"] = f"{config.bc.code}: simply supported on {' and '.join(simple)}"
    return meta


def result_csv(result: AnalysisResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mode_index", "raw_eigenvalue", "nondimensional_value"])
    for i, (raw, val) in enumerate(zip(result.raw, result.values), start=1):
        w.writerow([i, fmt(raw), fmt(val)])
    return buf.getvalue()


def result_json(config: RunConfig, result: AnalysisResult) -> str:
    doc = {
        "config": _round6(config.as_dict()),
        "result": {
            "kind": result.kind,
            "raw_eigenvalue": _round6([float(v) for v in result.raw]),
            "nondimensional_value": _round6([float(v) for v in result.values]),
        },
        "metadata": _round6(result_metadata(config, result)),
    }
    return json.dumps(doc, indent=2) + "\n"


def _with_parameter(config: RunConfig, parameter: str, value: float) -> RunConfig:
    g = config.geometry
    if parameter == "a_over_b":
        return replace(config, geometry=replace(g, a=value * g.b))
    if parameter == "psi":
        return replace(config, geometry=replace(g, psi=math.radians(value)))
    if parameter == "n":
        return replace(config, material=replace(config.material, gradient_index=value))
    raise ConfigurationError(f"expected one of {list(SWEEP_PARAMETERS)}", path="sweep.parameter")


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"expected a positive integer, got {raw!r}", path=WORKERS_ENV) from None
    if n < 1:
        raise ConfigurationError(f"expected a positive integer, got {raw!r}", path=WORKERS_ENV)
    return n


def sweep(config: RunConfig, parameter: str, values) -> tuple[list[str], list[list[float]]]:
    """One row per parameter value.

    Vibration rows hold the first ``modes`` frequency parameters; buckling
    rows hold the uniaxial and biaxial critical parameters. A point that
    fails is kept as a row of NaN and a warning is issued.
    """
    values = [float(v) for v in values]
    if not values:
        raise ConfigurationError("parameter list is empty", path="sweep.values")
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigurationError(f"expected one of {list(SWEEP_PARAMETERS)}, got {parameter!r}",
                                 path="sweep.parameter")
    an = config.analysis
    if an.kind == "vibration":
        header = [parameter] + [f"omega_{k}" for k in range(1, an.modes + 1)]
    else:
        header = [parameter, "lambda_cru", "lambda_crb"]

    def point(v):
        try:
            cfg = _with_parameter(config, parameter, v)
            model = cfg.model()
            if an.kind == "vibration":
                return [v] + list(model.vibration(an.modes, length_scale=an.length_scale).values)
            return [v] + [model.buckling(load, kg_mode=an.kg_mode).values[0]
                          for load in ("uniaxial", "biaxial")]
        except PlateError as exc:
            warnings.warn(f"sweep point {parameter}={v} failed: {exc}", RuntimeWarning, stacklevel=2)
            return [v] + [float("nan")] * (len(header) - 1)

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(point, values))
    else:
        rows = [point(v) for v in values]
    return header, [[float(x) for x in r] for r in rows]


def convergence_study(config: RunConfig, meshes=(2, 4, 8)):
    """Fundamental frequency and uniaxial buckling parameter per ``m x m`` mesh."""
    header = ["mesh", "omega_1", "lambda_cru", "delta_omega", "delta_lambda"]
    rows = []
    prev = None
    for m in meshes:
        model = replace(config, nex=int(m), nez=int(m)).model()
        om = float(model.vibration(1, length_scale=config.analysis.length_scale).values[0])
        lam = float(model.buckling("uniaxial", kg_mode=config.analysis.kg_mode).values[0])
        d = (float("nan"), float("nan")) if prev is None else (om - prev[0], lam - prev[1])
        rows.append([f"{m}x{m}", om, lam, *d])
        prev = (om, lam)
    return header, rows


# --------------------------------------------------------------------------- output


def table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def table_json(header, rows, extra=None) -> str:
    doc = {"columns": header, "rows": [_round6(list(r)) for r in rows]}
    if extra:
        doc.update(_round6(extra))
    return json.dumps(doc, indent=2) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise ConfigurationError(f"cannot write output: {exc.strerror}", path=str(path)) from None


def _float_list(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"expected comma-separated numbers, got {text!r}", path="--values") from None


def validation_rows(report):
    header = ["table", "bc", "b_over_h", "psi_deg", "n", "quantity", "mode", "reference",
              "computed", "rel_error", "tolerance", "status"]
    rows = []
    for r in report.results:
        c = r.cell
        rows.append([r.table, r.assignment, float(c.b_over_h), float(c.psi_deg), float(c.n),
                     c.quantity, c.mode, float(c.value), float(r.computed), float(r.rel_error),
                     float(r.tolerance), r.status])
    return header, rows


# --------------------------------------------------------------------------- commands


def _cmd_run(args) -> int:
    config = parse_config(args.config)
    fmt_ = args.format or config.output_format
    out = args.out or config.output_path
    model = config.model()
    if args.mesh_csv:
        _emit(model.mesh.to_csv(), args.mesh_csv)
    result = analyse(config, model)
    _emit(result_csv(result) if fmt_ == "csv" else result_json(config, result), out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = parse_config(args.config)
    if args.length_scale:
        config = replace(config, analysis=replace(config.analysis, length_scale=args.length_scale))
    header, rows = sweep(config, args.parameter, _float_list(args.values))
    fmt_ = args.format or config.output_format
    extra = {"config": config.as_dict(), "parameter": args.parameter}
    _emit(table_csv(header, rows) if fmt_ == "csv" else table_json(header, rows, extra), args.out)
    return EXIT_OK


def _cmd_converge(args) -> int:
    config = parse_config(args.config)
    meshes = [int(m) for m in _float_list(args.meshes)]
    header, rows = convergence_study(config, meshes)
    fmt_ = args.format or config.output_format
    _emit(table_csv(header, rows) if fmt_ == "csv" else table_json(header, rows), args.out)
    return EXIT_OK


def _cmd_validate(args) -> int:
    tables = load_reference_tables(args.reference)
    wanted = [t.strip().upper() for t in args.tables.split(",")] if args.tables else list(tables)
    missing = [t for t in wanted if t not in tables]
    if missing:
        raise ConfigurationError(f"unknown table(s) {missing}", path="--tables")
    options = {"stiffness_form": args.stiffness_form, "kg_mode": args.kg_mode,
               "gradation": args.gradation}
    report = validate({t: tables[t] for t in wanted}, options=options, workers=worker_count())
    header, rows = validation_rows(report)
    if args.format == "json":
        text = table_json(header, rows, {"summary": report.summary(), "options": options})
    else:
        text = table_csv(header, rows)
    _emit(text, args.out)
    for tid, s in report.summary().items():
        line = f"{tid}: {s['passed']}/{s['checked']} within tolerance"
        if s["excluded"]:
            line += f", {s['excluded']} excluded"
        if s["worst_rel_error"] is not None:
            line += f", worst {100 * s['worst_rel_error']:+.2f}%"
        if "assignments" in s:
            a = s["assignments"]
            parts = ", ".join(f"{k} rms {100 * v:.2f}%" for k, v in a["rms_rel_error"].items())
            line += f" [{parts}; using {a['chosen']}]"
        print(line, file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sbfem-plate",
        description="Free vibration and buckling of in-plane graded plates with spectral elements.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="YAML or JSON config file")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"), help="output format")

    r = sub.add_parser("run", help="single analysis")
    common(r)
    r.add_argument("--mesh-csv", help="also write node coordinates (id, x, y) to this file")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sweep", help="parameter sweep")
    common(s)
    s.add_argument("--parameter", required=True, choices=SWEEP_PARAMETERS)
    s.add_argument("--values", required=True, help="comma separated, e.g. 0.5,1,1.5,2")
    s.add_argument("--length-scale", choices=("a", "b"),
                   help="side used in the frequency parameter (overrides the config)")
    s.set_defaults(func=_cmd_sweep)

    c = sub.add_parser("converge", help="mesh convergence study")
    common(c)
    c.add_argument("--meshes", default="2,4,8", help="elements per side, comma separated")
    c.set_defaults(func=_cmd_converge)

    v = sub.add_parser("validate", help="compare against the reference tables")
    v.add_argument("--out", help="report file (default: stdout)")
    v.add_argument("--format", choices=("csv", "json"), default="csv")
    v.add_argument("--tables", help=f"subset of {','.join(TABLE_IDS)}")
    v.add_argument("--reference", help="alternative reference JSON file")
    v.add_argument("--stiffness-form", choices=STIFFNESS_FORMS, default="consistent")
    v.add_argument("--kg-mode", choices=KG_MODES, default="deflection-only")
    v.add_argument("--gradation", choices=GRADATIONS, default="global")
    v.set_defaults(func=_cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PlateError as exc:
        # material, geometry and domain errors all stem from the input
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
