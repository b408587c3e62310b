"""Line-oriented model files: ``[section]`` headers and ``key = value`` entries.

Keys of the form ``v[1..3]`` expand to ``v[1]``, ``v[2]``, ``v[3]``; in the
``[momenta]`` section the value is expanded with the same indices.  Lines
starting with ``#`` are comments; indented lines continue the previous value.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .mechmodel import LocalTransformation, ModelError, ModelSpec
from .symkernel import (
    AssumptionSet,
    Atom,
    AtomKind,
    AtomTable,
    AtomTableError,
    Expr,
    ParseError,
    Relation,
    parse_expression,
)

_RANGE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\[(\d+)\.\.(\d+)\]$")
_SECTION = re.compile(r"^\[\s*([A-Za-z_]+)(?:\s+([A-Za-z0-9_\-]+))?\s*\]$")


class ModelFileError(ValueError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        loc = ""
        if path:
            loc = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(loc + message)


@dataclass
class ActionSpec:
    name: str
    generators: list[list[list[Fraction]]]
    target: list[str] = field(default_factory=list)
    coupling: str = "g"
    parameters: str = "xi"
    unitary: bool = False
    external_field: str | None = None
    field_coefficient: str | None = None


@dataclass
class SimulationSpec:
    name: str
    init: dict[str, str]
    grid: tuple[Fraction, Fraction, Fraction]
    multipliers: dict[str, str] = field(default_factory=dict)
    observables: dict[str, str] = field(default_factory=dict)
    projection: bool = False
    strict: bool = True
    drift_threshold: float = 1e-6
    tolerance: float = 1e-10


@dataclass
class ModelFile:
    path: str
    model: ModelSpec
    actions: dict[str, ActionSpec] = field(default_factory=dict)
    transformations: dict[str, LocalTransformation] = field(default_factory=dict)
    gauges: dict[str, Expr] = field(default_factory=dict)
    simulations: dict[str, SimulationSpec] = field(default_factory=dict)
    functions: list[str] = field(default_factory=list)
    sections: list[tuple[str, str | None, list[tuple[str, str]]]] = field(default_factory=list)


def expand_key(key: str) -> list[tuple[str, int | None]]:
    m = _RANGE.match(key)
    if not m:
        return [(key, None)]
    base, lo, hi = m.group(1), int(m.group(2)), int(m.group(3))
    if hi < lo:
        raise ValueError(f"empty index range in {key!r}")
    return [(f"{base}[{i}]", i) for i in range(lo, hi + 1)]


def _tokenize_sections(text: str, path: str):
    sections = []
    cur = None
    last_entry = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if raw[:1] in (" ", "\t") and last_entry is not None:
            entries = cur[2]
            k, v, ln = entries[-1]
            entries[-1] = (k, (v + " " + line.strip()).strip(), ln)
            continue
        line = line.strip()
        m = _SECTION.match(line)
        if m:
            cur = (m.group(1).lower(), m.group(2), [], n)
            sections.append(cur)
            last_entry = None
            continue
        if cur is None:
            raise ModelFileError("entry outside of any section", path, n)
        if "=" in line:
            k, v = line.split("=", 1)
            cur[2].append((k.strip(), v.strip(), n))
        else:
            cur[2].append((line, "", n))
        last_entry = cur[2][-1]
    return sections


def parse_number(text: str) -> Fraction:
    text = text.strip()
    try:
        if "/" in text:
            a, b = text.split("/", 1)
            return Fraction(Fraction(a.strip()), Fraction(b.strip()))
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def _parse_matrix(text: str) -> list[list[Fraction]]:
    rows = [r.strip() for r in text.split(";") if r.strip()]
    mat = [[parse_number(x) for x in r.split(",")] for r in rows]
    if any(len(r) != len(mat) for r in mat):
        raise ValueError("generator matrices must be square")
    return mat


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def loads(text: str, path: str = "<string>") -> ModelFile:
    secs = _tokenize_sections(text, path)
    by_kind: dict[str, list] = {}
    for kind, name, entries, line in secs:
        by_kind.setdefault(kind, []).append((name, entries, line))
    known = {"model", "coordinates", "momenta", "multipliers", "parameters", "values", "relations",
             "metric", "functions", "lagrangian", "action", "transformation", "gauges", "simulation"}
    for kind, _, _, line in secs:
        if kind not in known:
            raise ModelFileError(f"unknown section [{kind}]", path, line)

    def single(kind):
        lst = by_kind.get(kind, [])
        if len(lst) > 1:
            raise ModelFileError(f"section [{kind}] appears twice", path, lst[1][2])
        return lst[0][1] if lst else []

    def fail(msg, ln):
        raise ModelFileError(msg, path, ln)

    name = Path(path).stem
    time_name = "tau"
    for k, v, ln in single("model"):
        if k == "name":
            name = v
        elif k == "time":
            time_name = v
        else:
            fail(f"unknown key {k!r} in [model]", ln)

    coords: list[Atom] = []
    for k, v, ln in single("coordinates"):
        sector = v or "dynamical"
        if sector not in ("dynamical", "gauge", "auxiliary"):
            fail(f"unknown sector {sector!r}", ln)
        try:
            for cname, _ in expand_key(k):
                coords.append(Atom.coordinate(cname, sector))
        except ValueError as exc:
            fail(str(exc), ln)
    if not coords:
        raise ModelFileError("no coordinates declared", path)
    sector_of = {q.name: q.sector for q in coords}

    momentum_names = {}
    for k, v, ln in single("momenta"):
        for cname, idx in expand_key(k):
            if cname not in sector_of:
                fail(f"momentum for undeclared coordinate {cname!r}", ln)
            momentum_names[cname] = v if idx is None else f"{v}[{idx}]"
    multiplier_names = {}
    for k, v, ln in single("multipliers"):
        for cname, idx in expand_key(k):
            multiplier_names[cname] = v if idx is None else f"{v}[{idx}]"

    params: list[Atom] = []
    asm = AssumptionSet()
    for k, v, ln in single("parameters"):
        flags = {f.strip().lower() for f in v.replace(",", " ").split() if f.strip()}
        bad = flags - {"positive", "nonzero", "none"}
        if bad:
            fail(f"unknown assumption flags {sorted(bad)}", ln)
        for pname, _ in expand_key(k):
            if pname in sector_of:
                # flags on coordinates (e.g. g nonzero) are assumptions, not parameters
                q = next(q for q in coords if q.name == pname)
                asm = asm.with_flags(q, nonzero="nonzero" in flags, positive="positive" in flags)
                continue
            a = Atom.parameter(pname)
            params.append(a)
            asm = asm.with_flags(a, nonzero="nonzero" in flags, positive="positive" in flags) if flags - {"none"} else asm

    functions = []
    for k, v, ln in single("functions"):
        for fname, _ in expand_key(k):
            functions.append(fname)

    table = AtomTable((), time_name)
    try:
        for q in coords:
            table.declare(q)
        for p in params:
            table.declare(p)
        for f in functions:
            table.declare(Atom.gauge_function(f))
        for cname, pname in momentum_names.items():
            table.declare(Atom.momentum(pname, sector_of[cname]))
        for cname in sector_of:
            if cname not in momentum_names:
                pn = f"p_{cname}"
                if table.get(pn) is None:
                    table.declare(Atom.momentum(pn, sector_of[cname]))
        for cname, lname in multiplier_names.items():
            table.declare(Atom.multiplier(lname))
    except AtomTableError as exc:
        raise ModelFileError(str(exc), path) from None

    def expr(text, ln, tbl=table):
        try:
            return parse_expression(text, tbl)
        except ParseError as exc:
            fail(f"{exc} in {text!r}", ln)

    values = {}
    for k, v, ln in single("values"):
        if table.get(k) is None or table.get(k).kind is not AtomKind.PARAMETER:
            fail(f"value for undeclared parameter {k!r}", ln)
        try:
            values[k] = parse_number(v)
        except ValueError as exc:
            fail(str(exc), ln)

    relations = []
    for k, v, ln in single("relations"):
        m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s*(?:\^\s*(\d+))?$", k)
        if not m or table.get(m.group(1)) is None or table.get(m.group(1)).kind is not AtomKind.PARAMETER:
            fail(f"relation left side must be a parameter power, got {k!r}", ln)
        relations.append(Relation(table.get(m.group(1)), int(m.group(2) or 1), expr(v, ln)))

    metric = None
    for k, v, ln in single("metric"):
        if k != "signature":
            fail(f"unknown key {k!r} in [metric]", ln)
        try:
            metric = [int(s.strip() + "1") for s in v.split(",")]
        except ValueError:
            fail(f"bad signature {v!r}", ln)

    lag = single("lagrangian")
    if len(lag) != 1 or lag[0][0] != "L":
        raise ModelFileError("[lagrangian] must contain exactly one entry 'L = ...'", path)
    L = expr(lag[0][1], lag[0][2])
    try:
        model = ModelSpec(name, table, coords, L, asm, metric, momentum_names, multiplier_names, relations, values)
    except ModelError as exc:
        raise ModelFileError(str(exc), path) from None

    mf = ModelFile(path, model, functions=functions,
                   sections=[(k, n, [(a, b) for a, b, _ in e]) for k, n, e, _ in secs])

    for aname, entries, line in by_kind.get("action", []):
        if not aname:
            fail("[action] needs a name", line)
        gens, opts = [], {}
        for k, v, ln in entries:
            if k.startswith("generator"):
                try:
                    gens.append(_parse_matrix(v))
                except ValueError as exc:
                    fail(str(exc), ln)
            else:
                opts[k] = (v, ln)
        spec = ActionSpec(aname, gens)
        for k, (v, ln) in opts.items():
            if k == "target":
                spec.target = [n for part in v.split(",") for n, _ in expand_key(part.strip())]
            elif k == "coupling":
                spec.coupling = v
            elif k == "parameters":
                spec.parameters = v
            elif k == "unitary":
                spec.unitary = _bool(v)
            elif k == "external_field":
                spec.external_field = v
            elif k == "field_coefficient":
                spec.field_coefficient = v
            else:
                fail(f"unknown action option {k!r}", ln)
        if spec.unitary and not gens:
            spec.generators = []
        elif not gens:
            fail(f"action {aname!r} declares no generators", line)
        mf.actions[aname] = spec

    for tname, entries, line in by_kind.get("transformation", []):
        if not tname:
            fail("[transformation] needs a name", line)
        var = {}
        for k, v, ln in entries:
            for cname, _ in expand_key(k):
                q = table.get(cname)
                if q is None or q.kind not in (AtomKind.COORDINATE, AtomKind.MOMENTUM):
                    fail(f"variation of undeclared coordinate {cname!r}", ln)
                var[q] = expr(v, ln)
        fnames = sorted({a.name for e in var.values() for a in e.atoms() if a.kind is AtomKind.GAUGE_FUNCTION})
        try:
            mf.transformations[tname] = LocalTransformation(
                var, tuple(Atom.gauge_function(f) for f in fnames), tname
            )
        except ModelError as exc:
            fail(str(exc), line)

    for k, v, ln in single("gauges"):
        mf.gauges[k] = expr(v, ln)

    for sname, entries, line in by_kind.get("simulation", []):
        if not sname:
            fail("[simulation] needs a name", line)
        init, mults, obs = {}, {}, {}
        grid = None
        sim = SimulationSpec(sname, init, (Fraction(0), Fraction(1), Fraction(1, 1000)), mults, obs)
        for k, v, ln in entries:
            try:
                if k.startswith("init."):
                    for cname, _ in expand_key(k[5:]):
                        init[cname] = v
                elif k.startswith("multiplier."):
                    mults[k[11:]] = v
                elif k.startswith("observable."):
                    obs[k[11:]] = v
                elif k == "grid":
                    parts = [parse_number(x) for x in v.split(",")]
                    if len(parts) != 3 or parts[2] <= 0 or parts[1] <= parts[0]:
                        raise ValueError("grid must be 'start, end, step' with end > start and step > 0")
                    grid = tuple(parts)
                elif k == "projection":
                    sim.projection = _bool(v)
                elif k == "strict":
                    sim.strict = _bool(v)
                elif k == "drift":
                    sim.drift_threshold = float(v)
                elif k == "tolerance":
                    sim.tolerance = float(v)
                else:
                    raise ValueError(f"unknown simulation key {k!r}")
            except ValueError as exc:
                fail(str(exc), ln)
        if grid is not None:
            sim.grid = grid
        mf.simulations[sname] = sim
    return mf


def load(path: str | Path) -> ModelFile:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFileError(f"cannot read model file: {exc.strerror}", str(p)) from None
    return loads(text, str(p))


# writing ------------------------------------------------------------------------------

def _fmt_num(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def dumps(model: ModelSpec, functions: list[str] | None = None, extra_sections: str = "") -> str:
    """Serialize a model back to the file format (coordinates listed one per line)."""
    out = ["[model]", f"name = {model.name}"]
    if model.table.time.name != "tau":
        out.append(f"time = {model.table.time.name}")
    out += ["", "[coordinates]"]
    out += [f"{q.name} = {q.sector}" for q in model.coordinates]
    moms = [(q.name, model.momentum(q).name) for q in model.coordinates]
    out += ["", "[momenta]"] + [f"{c} = {p}" for c, p in moms]
    if model.multiplier_names:
        out += ["", "[multipliers]"] + [f"{c} = {m}" for c, m in model.multiplier_names.items()]
    params = model.parameters()
    flagged = [q for q in model.coordinates if q in model.assumptions]
    if params or flagged:
        out += ["", "[parameters]"]
        for a in params + flagged:
            f = model.assumptions.get(a)
            flags = "positive" if f and f.positive else "nonzero" if f and f.nonzero else "none"
            out.append(f"{a.name} = {flags}")
    if model.values:
        out += ["", "[values]"] + [f"{k} = {_fmt_num(v)}" for k, v in model.values.items()]
    if model.relations:
        out += ["", "[relations]"] + [str(r) for r in model.relations]
    if model.metric:
        out += ["", "[metric]", "signature = " + ",".join("+" if s > 0 else "-" for s in model.metric)]
    fns = functions if functions is not None else [a.name for a in model.gauge_functions()]
    if fns:
        out += ["", "[functions]"] + list(fns)
    out += ["", "[lagrangian]", f"L = {model.lagrangian}"]
    text = "\n".join(out) + "\n"
    if extra_sections:
        text += "\n" + extra_sections.strip() + "\n"
    return text


def bundled(name: str) -> Path:
    """Path of a bundled fixture (``toy``, ``spin``, ...)."""
    here = Path(__file__).parent / "models"
    p = here / (name if name.endswith(".model") else f"{name}.model")
    if not p.exists():
        raise FileNotFoundError(p)
    return p


__all__ = [
    "ActionSpec",
    "ModelFile",
    "ModelFileError",
    "SimulationSpec",
    "bundled",
    "dumps",
    "load",
    "loads",
    "parse_number",
]
