"""Command-line driver: analyze, gauge, equiv, fixgauge, simulate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dirac_chain import ChainError, GaugeFixError, classify, fix_gauge, stabilize
from .gaugeprin import GaugeError, LieGroupAction, equivalence_test, gauge_lagrangian
from .hamiltonian import HamiltonianSystem, total_hamiltonian
from .mechmodel import LegendreError, ModelError, legendre
from .modelfile import ModelFile, ModelFileError, bundled, dumps, load
from .numlab import NumericsError, compare_orbits, compile_system, drift, integrate
from .symkernel import (
    AssumptionError,
    AtomTableError,
    OutsideFragmentError,
    ParseError,
    PhaseSpaceError,
    ReductionError,
)

SCHEMA = "1"
EXIT_OK, EXIT_MODEL, EXIT_ANALYSIS, EXIT_NUMERIC = 0, 1, 2, 3

MODEL_ERRORS = (ModelFileError, ModelError, ParseError, AtomTableError, FileNotFoundError)
ANALYSIS_ERRORS = (
    AssumptionError, LegendreError, ChainError, GaugeFixError, GaugeError,
    OutsideFragmentError, PhaseSpaceError, ReductionError, ArithmeticError,
)


class CommandError(Exception):
    def __init__(self, code: int, message: str, kind: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


def resolve_model(arg: str) -> ModelFile:
    p = Path(arg)
    if not p.exists():
        try:
            p = bundled(arg)
        except FileNotFoundError:
            raise ModelFileError(f"no such model file or bundled model: {arg}", arg) from None
    return load(p)


def empty_report(command: str) -> dict:
    return {
        "schema": SCHEMA,
        "command": command,
        "model": None,
        "momenta": [],
        "h0": None,
        "h_total": None,
        "constraints": [],
        "multipliers": [],
        "chain": [],
        "gauge_results": [],
        "witnesses": [],
        "simulations": [],
        "caveats": [],
        "termination": None,
        "comparisons": [],
    }


def _s(e) -> str | None:
    return None if e is None else str(e)


def _analyze(mf: ModelFile) -> tuple[HamiltonianSystem, object]:
    hs = legendre(mf.model)
    rep = stabilize(hs)
    return classify(rep.system), rep


def _fill_system(report: dict, hs: HamiltonianSystem) -> None:
    model = hs.model
    report["momenta"] = [
        {"coordinate": q.name, "momentum": p.name, "definition": _s(hs.momenta.get(p))}
        for q, p in hs.pairs
    ]
    report["h0"] = str(hs.h0)
    report["h_total"] = str(total_hamiltonian(hs))
    report["constraints"] = [
        {
            "expr": str(c.expr),
            "stage": c.stage,
            "class": c.klass,
            "origin": c.origin,
            "first_class_form": _s(c.first_class_form),
        }
        for c in hs.constraints
    ]
    report["multipliers"] = [
        {"name": m.name.name, "constraint": str(m.constraint), "status": m.status, "value": _s(m.value)}
        for m in hs.multipliers
    ]
    report["caveats"] = list(dict.fromkeys(report["caveats"] + list(hs.notes)))
    if model is not None and report["model"] is None:
        report["model"] = model.name


def _fill_chain(report: dict, chain) -> None:
    report["chain"] = [
        {
            "stage": r.stage,
            "source": str(r.source),
            "condition": str(r.condition),
            "reduced": str(r.reduced),
            "outcome": r.outcome,
            "result": _s(r.result),
            "multiplier": r.multiplier.name if r.multiplier is not None else None,
            "certificate": r.certificate,
        }
        for r in chain.records
    ]
    report["termination"] = chain.termination


def cmd_analyze(args, report: dict) -> int:
    mf = resolve_model(args.models[0])
    report["model"] = mf.model.name
    hs, chain = _analyze(mf)
    _fill_system(report, hs)
    _fill_chain(report, chain)
    return EXIT_OK


def cmd_fixgauge(args, report: dict) -> int:
    mf = resolve_model(args.models[0])
    report["model"] = mf.model.name
    hs, chain = _analyze(mf)
    _fill_system(report, hs)
    _fill_chain(report, chain)
    names = args.gauge or sorted(mf.gauges)
    if not names:
        raise CommandError(EXIT_MODEL, "model declares no gauges", "ModelFileError")
    missing = [n for n in names if n not in mf.gauges]
    if missing:
        raise CommandError(EXIT_MODEL, f"unknown gauges {missing}; declared: {sorted(mf.gauges)}", "ModelFileError")
    res = fix_gauge(hs, [mf.gauges[n] for n in names])
    sys_ = res.system
    report["gauge_results"].append({
        "gauges": names,
        "gauge_exprs": [str(mf.gauges[n]) for n in names],
        "relations": [str(r) for r in res.relations],
        "eliminated": [{"atom": a.name, "value": str(v)} for a, v in res.eliminated],
        "pairings": [{"gauge": str(g), "partner": str(p)} for g, p in res.pairings],
        "notes": list(res.notes),
        "h0": str(sys_.h0),
        "constraints": [{"expr": str(c.expr), "stage": c.stage, "class": c.klass, "origin": c.origin}
                        for c in sys_.constraints],
    })
    return EXIT_OK


def _pick_transform(mf: ModelFile, name: str | None):
    if name:
        if name not in mf.transformations:
            raise CommandError(EXIT_MODEL, f"model {mf.model.name} has no transformation {name!r}", "ModelFileError")
        return name, mf.transformations[name]
    if len(mf.transformations) != 1:
        raise CommandError(
            EXIT_MODEL,
            f"choose a transformation of {mf.model.name} with --transform (declared: {sorted(mf.transformations)})",
            "ModelFileError",
        )
    (n, t), = mf.transformations.items()
    return n, t


def cmd_equiv(args, report: dict) -> int:
    if len(args.models) != 2:
        raise CommandError(EXIT_MODEL, "equiv needs exactly two model files", "UsageError")
    m1, m2 = resolve_model(args.models[0]), resolve_model(args.models[1])
    report["model"] = [m1.model.name, m2.model.name]
    names = (args.transform or "").split(",") if args.transform else [None, None]
    if len(names) == 1:
        names = names * 2
    n1, t1 = _pick_transform(m1, names[0])
    n2, t2 = _pick_transform(m2, names[1])
    w = equivalence_test(m1.model, t1, m2.model, t2)
    report["witnesses"].append({
        "models": [m1.model.name, m2.model.name],
        "transformations": [n1, n2],
        "difference": str(w.difference),
        "found": w.ok,
        "F": _s(w.F),
        "certified": w.certify(),
        "residuals": {k: str(v) for k, v in sorted(w.residuals.items())},
    })
    return EXIT_OK if w.ok else EXIT_ANALYSIS


def cmd_gauge(args, report: dict) -> int:
    mf = resolve_model(args.models[0])
    report["model"] = mf.model.name
    if not mf.actions:
        raise CommandError(EXIT_MODEL, "model declares no [action] blocks", "ModelFileError")
    name = args.action or (next(iter(mf.actions)) if len(mf.actions) == 1 else None)
    if name is None or name not in mf.actions:
        raise CommandError(EXIT_MODEL, f"choose an action with --action (declared: {sorted(mf.actions)})", "ModelFileError")
    spec = mf.actions[name]
    dim = len(spec.target) if spec.target else len(mf.model.sector("dynamical"))
    action = LieGroupAction.from_spec(spec, dim)
    res = gauge_lagrangian(mf.model, action, spec.target or None, spec.coupling,
                           spec.external_field, spec.field_coefficient)
    extra = ""
    t = res.transformation
    if t is not None and t.variations:
        lines = [f"[transformation {t.name}]"]
        lines += [f"{q.name} = {e}" for q, e in t.variations.items()]
        extra = "\n".join(lines)
    fns = sorted({a.name for a in res.model.gauge_functions()})
    text = dumps(res.model, fns, extra)
    if args.model_out:
        Path(args.model_out).write_text(text, encoding="utf-8")
    report["gauge_results"].append({
        "action": name,
        "structure_constants": [[[str(x) for x in row] for row in plane] for plane in (action.structure_constants or [])],
        "lagrangian": str(res.model.lagrangian),
        "gauge_coordinates": [a.name for a in res.gauge_coordinates],
        "covariant": {q.name: str(d) for q, d in res.covariant.items()},
        "covariance_residuals": {q.name: str(r) for q, r in res.covariance_residuals.items()},
        "covariant_ok": res.covariant_ok,
        "transformation": {q.name: str(e) for q, e in t.variations.items()} if t is not None else None,
        "notes": list(res.notes),
        "model_file": text,
    })
    return EXIT_OK if res.covariant_ok else EXIT_ANALYSIS


def cmd_simulate(args, report: dict) -> int:
    mf = resolve_model(args.models[0])
    report["model"] = mf.model.name
    if not mf.simulations:
        raise CommandError(EXIT_MODEL, "model declares no [simulation] blocks", "ModelFileError")
    hs, chain = _analyze(mf)
    _fill_system(report, hs)
    nm = compile_system(hs)
    runs, flagged = [], False
    for name, sim in mf.simulations.items():
        grid = sim.grid if args.step is None else (sim.grid[0], sim.grid[1], args.step)
        tol = sim.tolerance if args.tol is None else args.tol
        tr = integrate(nm, sim.multipliers, sim.init, grid, projection=sim.projection, strict=sim.strict,
                       tolerance=tol, drift_threshold=sim.drift_threshold, name=name)
        runs.append((sim, tr))
        flagged = flagged or tr.flagged
        obs = {k: mf.model.parse(v) for k, v in sim.observables.items()}
        values = {k: tr.evaluate(e, k) for k, e in obs.items()}
        dr = drift(tr)
        report["simulations"].append({
            "name": name,
            "grid": [float(grid[0]), float(grid[1]), float(grid[2])],
            "samples": int(len(tr.grid)),
            "multipliers": dict(sim.multipliers),
            "flags": list(tr.flags),
            "drift": {k: v for k, v in dr.max_abs.items()},
            "final_state": {n: float(x) for n, x in zip(tr.state_names, tr.states[-1])},
            "observables": {k: {"initial": float(v[0]), "final": float(v[-1])} for k, v in values.items()},
        })
        if args.csv_dir:
            from .numlab import to_csv

            Path(args.csv_dir).mkdir(parents=True, exist_ok=True)
            (Path(args.csv_dir) / f"{mf.model.name}_{name}.csv").write_text(to_csv(tr, obs), encoding="utf-8")
    groups: dict = {}
    for sim, tr in runs:
        key = (tuple(tr.grid.tolist()[:1] + tr.grid.tolist()[-1:]), len(tr.grid), tuple(sorted(sim.observables)))
        groups.setdefault(key, []).append((sim, tr))
    comps = []
    for members in groups.values():
        if len(members) < 2:
            continue
        sim0 = members[0][0]
        obs = {k: mf.model.parse(v) for k, v in sim0.observables.items()}
        c = compare_orbits([tr for _, tr in members], obs)
        comps.append({"runs": [s.name for s, _ in members], "observables": c.observables, "coordinates": c.coordinates})
    report["comparisons"] = comps
    return EXIT_NUMERIC if flagged else EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "gauge": cmd_gauge,
    "equiv": cmd_equiv,
    "fixgauge": cmd_fixgauge,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dirac-forge", description="Constrained Hamiltonian analysis of gauge systems.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("models", nargs="+", help="model file paths or bundled model names")
    p.add_argument("--gauge", action="append", help="gauge condition name (repeatable)")
    p.add_argument("--action", help="group action name for 'gauge'")
    p.add_argument("--transform", help="transformation name, or NAME1,NAME2 for 'equiv'")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--model-out", help="write the gauged model file here ('gauge')")
    p.add_argument("--csv-dir", help="write trajectory CSV files here ('simulate')")
    p.add_argument("--step", type=float, help="override the simulation step")
    p.add_argument("--tol", type=float, help="initial-constraint tolerance")
    return p


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"


def to_text(report: dict) -> str:
    out = [f"dirac-forge {report['command']}: {report['model']}"]
    if "error" in report:
        out.append(f"error ({report['error']['type']}): {report['error']['message']}")
    if report["h0"]:
        out.append(f"H0 = {report['h0']}")
    if report["momenta"]:
        out.append("momenta:")
        out += [f"  {m['momentum']} = {m['definition']}" for m in report["momenta"]]
    if report["constraints"]:
        out.append("constraints:")
        out += [f"  [{c['stage']}] {c['class']:<12} {c['expr']}" for c in report["constraints"]]
    if report["multipliers"]:
        out.append("multipliers:")
        for m in report["multipliers"]:
            out.append(f"  {m['name']}: {m['status']}" + (f" = {m['value']}" if m["value"] else ""))
    for g in report["gauge_results"]:
        if "relations" in g:
            out.append(f"gauge {', '.join(g['gauges'])}:")
            out += [f"  relation: {r} = 0" for r in g["relations"]]
            out += [f"  {c['class']:<12} {c['expr']}" for c in g["constraints"]]
            out += [f"  note: {n}" for n in g["notes"]]
        else:
            out.append(f"gauged with {g['action']}: L = {g['lagrangian']}")
            out.append(f"  covariance certificate: {'ok' if g['covariant_ok'] else 'FAILED'}")
    for w in report["witnesses"]:
        status = f"F = {w['F']}" if w["found"] else f"no primitive; residuals {w['residuals']}"
        out.append(f"equiv {w['models'][0]}/{w['transformations'][0]} ~ {w['models'][1]}/{w['transformations'][1]}: {status}")
    for s in report["simulations"]:
        worst = max(s["drift"].values(), default=0.0)
        out.append(f"simulation {s['name']}: {s['samples']} samples, max drift {worst:.3g}"
                   + (f", flags: {'; '.join(s['flags'])}" if s["flags"] else ""))
    for c in report.get("comparisons", []):
        devs = ", ".join(f"{k} {v:.3g}" for k, v in c["observables"].items())
        out.append(f"orbits {', '.join(c['runs'])}: {devs}")
    out += [f"caveat: {c}" for c in report["caveats"]]
    return "\n".join(out) + "\n"


def run_pipeline(args: argparse.Namespace) -> tuple[int, dict]:
    """Run one command; returns the exit code and the report dictionary."""
    report = empty_report(args.command)
    try:
        code = COMMANDS[args.command](args, report)
    except CommandError as exc:
        code = exc.code
        report["error"] = {"type": exc.kind, "message": str(exc)}
    except MODEL_ERRORS as exc:
        code = EXIT_MODEL
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
    except NumericsError as exc:
        code = EXIT_NUMERIC
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
    except ANALYSIS_ERRORS as exc:
        code = EXIT_ANALYSIS
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
    report["exit_code"] = code
    return code, report


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    code, report = run_pipeline(args)
    text = to_json(report) if args.format == "json" else to_text(report)
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"dirac-forge: cannot write {args.out}: {exc.strerror}", file=sys.stderr)
            return EXIT_MODEL
    else:
        sys.stdout.write(text)
    if "error" in report:
        print(f"dirac-forge: {report['error']['type']}: {report['error']['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
