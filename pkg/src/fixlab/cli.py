"""Command-line front end.

Subcommands load a strict JSON config (unknown keys anywhere are a
config error, catching typos before they silently weaken a hypothesis),
run one task, print a text report, and optionally mirror the full
verdict to a JSON file.  Exit codes: 0 = verdict confirmed/holds,
1 = completed but refuted/failed/partial, 2 = config or evaluation
error.  Reports are deterministic: same config and seed, same bytes.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import defaults
from .expr import EvaluationError, ExprError
from .gauge import GAUGES, MapError, SelfMapSpec, analytic_map, tabulated_map, verify_contraction
from .phi import (
    PhiError,
    check_asymptotic_normal,
    check_nearly_right_admissible,
    check_normal,
    comparison_function,
)
from .picard import default_starts, iterate, run_theorem_harness
from .seqlab import (
    SequenceError,
    lemma1_witness,
    lemma2_check,
    load_sequence_file,
    semi_cauchy_profile,
    sequence_from_points,
    sequence_from_table,
)
from .space import SpaceError, analytic_space, classify_structure, tabulated_space
from .verdicts import to_jsonable

AXIOM_TAGS = {
    "triangular": "(a02)",
    "reflexive_triangular": "(a03)",
    "sufficient": "(a04)",
    "strongly_sufficient": "(d04)",
    "matthews": "(d05)",
    "zero_self_distance": "(n/a)",
}

PHI_TAGS = {
    "normal": ("(b05)", "normal"),
    "asymptotic_normal": ("(b06)", "asymptotically normal"),
    "nearly_right_admissible": ("(b07)", "nearly right admissible"),
}

TASKS = (
    "classify-space",
    "classify-phi",
    "check-contraction",
    "iterate",
    "harness",
    "witness",
    "lemma2",
)


class ConfigError(ValueError):
    """Raised on a malformed or incomplete configuration document."""


def _check_keys(obj: dict, where: str, allowed: set[str], required: set[str] = frozenset()):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    missing = sorted(required - set(obj))
    if missing:
        raise ConfigError(f"{where}: missing required keys {missing}")


def _positive(value, where: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if not (np.isfinite(out) and out > 0):
        raise ConfigError(f"{where}: must be a positive finite number, got {value!r}")
    return out


def _load_space(section, grid_override=None):
    _check_keys(section, "space", {"kind", "expression", "lo", "hi", "grid", "matrix"},
                {"kind"})
    kind = section["kind"]
    if kind == "tabulated":
        _check_keys(section, "space", {"kind", "matrix"}, {"kind", "matrix"})
        return tabulated_space(np.asarray(section["matrix"], dtype=np.float64))
    if kind == "analytic":
        _check_keys(section, "space", {"kind", "expression", "lo", "hi", "grid"},
                    {"kind", "expression", "lo", "hi"})
        grid = grid_override if grid_override is not None else section.get("grid", defaults.GRID)
        grid = int(grid)
        if grid < 2:
            raise ConfigError("space.grid: must be at least 2")
        return analytic_space(
            section["expression"], float(section["lo"]), float(section["hi"]), grid
        )
    raise ConfigError(f"space.kind: expected 'analytic' or 'tabulated', got {kind!r}")


def _load_map(section, space) -> SelfMapSpec:
    _check_keys(section, "map", {"kind", "expression", "indices"}, {"kind"})
    kind = section["kind"]
    if kind == "tabulated":
        _check_keys(section, "map", {"kind", "indices"}, {"kind", "indices"})
        if space.kind != "tabulated":
            raise ConfigError("map: a tabulated map needs a tabulated space")
        return tabulated_map(np.asarray(section["indices"]), space.n)
    if kind == "analytic":
        _check_keys(section, "map", {"kind", "expression"}, {"kind", "expression"})
        return analytic_map(section["expression"], space)
    raise ConfigError(f"map.kind: expected 'analytic' or 'tabulated', got {kind!r}")


def _load_phi(section):
    _check_keys(section, "phi", {"expression", "q", "monotone"}, {"expression"})
    q = section.get("q", [])
    if not isinstance(q, list):
        raise ConfigError("phi.q: expected a list of positive reals")
    return comparison_function(
        section["expression"], q=tuple(float(v) for v in q),
        monotone=bool(section.get("monotone", False)),
    )


def _load_sequence(section):
    _check_keys(section, "sequence", {"points", "table", "file", "metric"})
    sources = [k for k in ("points", "table", "file") if k in section]
    if len(sources) != 1:
        raise ConfigError("sequence: give exactly one of points, table, file")
    metric = section.get("metric", "abs(x - y)")
    if "points" in section:
        return sequence_from_points(np.asarray(section["points"], dtype=np.float64), metric)
    if "table" in section:
        return sequence_from_table(section["table"])
    return load_sequence_file(section["file"], metric)


OPTION_KEYS = {
    "tol", "max_iters", "window", "seed", "eps", "j_max",
    "assume_d_asymptotic", "phi_seeds",
}


def _load_options(config, args) -> dict:
    section = config.get("options", {})
    _check_keys(section, "options", OPTION_KEYS)
    opts = dict(section)
    if args.tol is not None:
        opts["tol"] = args.tol
    if args.seed is not None:
        opts["seed"] = args.seed
    if args.eps is not None:
        opts["eps"] = args.eps
    out = {
        "tol": _positive(opts.get("tol", defaults.TOL), "options.tol"),
        "max_iters": int(_positive(opts.get("max_iters", defaults.MAX_ITERS),
                                   "options.max_iters")),
        "window": int(_positive(opts.get("window", defaults.WINDOW), "options.window")),
        "seed": int(opts["seed"]) if "seed" in opts else None,
        "eps": _positive(opts["eps"], "options.eps") if "eps" in opts else None,
        "j_max": int(_positive(opts.get("j_max", 100), "options.j_max")),
        "assume_d_asymptotic": bool(opts.get("assume_d_asymptotic", False)),
    }
    seeds = opts.get("phi_seeds")
    if seeds is not None:
        if not isinstance(seeds, list) or not seeds:
            raise ConfigError("options.phi_seeds: expected a non-empty list")
        out["phi_seeds"] = tuple(_positive(v, "options.phi_seeds") for v in seeds)
    else:
        out["phi_seeds"] = None
    return out


TOP_KEYS = {"task", "space", "map", "phi", "gauge", "starts", "sequence", "descent", "options"}

TASK_REQUIRES = {
    "classify-space": {"space"},
    "classify-phi": {"phi"},
    "check-contraction": {"space", "map", "phi"},
    "iterate": {"space", "map"},
    "harness": {"space", "map", "phi"},
    "witness": {"sequence"},
    "lemma2": {"phi", "descent"},
}


def _gauge_from(config, args) -> str:
    gauge = args.gauge if args.gauge is not None else config.get("gauge", "M1")
    if gauge not in GAUGES:
        raise ConfigError(f"gauge: expected one of {GAUGES}, got {gauge!r}")
    return gauge


def _starts_from(config, space):
    if "starts" in config:
        starts = config["starts"]
        if not isinstance(starts, list) or not starts:
            raise ConfigError("starts: expected a non-empty list of points")
        if space.kind == "tabulated":
            return [int(s) for s in starts]
        return [float(s) for s in starts]
    return list(default_starts(space))


# ---------------------------------------------------------------------------
# Task runners: each returns (exit_code, text_lines, payload)


def _flag(ok: bool) -> str:
    return "holds" if ok else "FAILS"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _run_classify_space(config, args):
    space = _load_space(config["space"], args.grid)
    structure = classify_structure(space)
    lines = [f"classification: {structure.label}",
             f"all applicable labels: {', '.join(structure.labels)}"]
    for name, rep in structure.reports.items():
        tag = AXIOM_TAGS.get(name, "")
        line = f"  {tag} {name}: {_flag(rep.holds)} [{rep.checked_count} tuples]"
        if not rep.holds:
            parts = ", ".join(f"{k}={_fmt(v)}" for k, v in rep.distances.items())
            line += f" witness {rep.witness} with {parts}"
        lines.append(line)
    return 0, lines, {"task": "classify-space", "structure": to_jsonable(structure)}


def _run_classify_phi(config, args):
    opts = _load_options(config, args)
    phi = _load_phi(config["phi"])
    seeds = opts["phi_seeds"] or (1.0, 0.5, 0.1)
    checks = {
        "normal": check_normal(phi),
        "asymptotic_normal": check_asymptotic_normal(
            phi, seeds, max_iters=opts["max_iters"], tol=opts["tol"], seed=opts["seed"]
        ),
        "nearly_right_admissible": check_nearly_right_admissible(phi),
    }
    lines = [f"phi: {phi.source}"]
    if phi.q_points:
        lines.append(f"declared Q: {list(phi.q_points)}")
    for name, verdict in checks.items():
        tag, title = PHI_TAGS[name]
        line = f"  {tag} {title}: {_flag(verdict.holds)}"
        if not verdict.holds and verdict.witness is not None:
            line += f" witness {_fmt(verdict.witness)}"
        lines.append(line)
    ok = all(v.holds for v in checks.values())
    payload = {"task": "classify-phi", "checks": to_jsonable(checks)}
    return (0 if ok else 1), lines, payload


def _run_check_contraction(config, args):
    space = _load_space(config["space"], args.grid)
    tmap = _load_map(config["map"], space)
    phi = _load_phi(config["phi"])
    gauge = _gauge_from(config, args)
    report = verify_contraction(space, tmap, phi, gauge)
    lines = [
        f"(c03) contraction at gauge {gauge}: {_flag(report.holds)} "
        f"[{report.checked_count} pairs, max slack {report.max_slack:.6e}]"
    ]
    if not report.holds:
        parts = ", ".join(f"{k}={_fmt(v)}" for k, v in report.values.items())
        lines.append(f"  witness pair {report.witness}: {parts}")
    payload = {"task": "check-contraction", "contraction": to_jsonable(report)}
    return (0 if report.holds else 1), lines, payload


def _run_iterate(config, args):
    opts = _load_options(config, args)
    space = _load_space(config["space"], args.grid)
    tmap = _load_map(config["map"], space)
    starts = _starts_from(config, space)
    traces = [
        iterate(space, tmap, x0, max_iters=opts["max_iters"], tol=opts["tol"],
                window=opts["window"])
        for x0 in starts
    ]
    traces.sort(key=lambda tr: tr.start)
    lines = []
    for tr in traces:
        s = tr.summary()
        lines.append(
            f"start {_fmt(s['start'])}: steps={s['steps']} "
            f"d-asymptotic={s['d_asymptotic']} cauchy-0d={s['cauchy_0d']} "
            f"converged-0d={s['converged_0d']} limit={_fmt(s['limit'])}"
        )
    ok = all(tr.converged_0d for tr in traces)
    payload = {"task": "iterate", "traces": [tr.summary() for tr in traces]}
    return (0 if ok else 1), lines, payload


def _run_harness(config, args):
    opts = _load_options(config, args)
    space = _load_space(config["space"], args.grid)
    tmap = _load_map(config["map"], space)
    phi = _load_phi(config["phi"])
    gauge = _gauge_from(config, args)
    starts = _starts_from(config, space)
    verdict = run_theorem_harness(
        space, tmap, phi, gauge=gauge, starts=starts,
        assume_d_asymptotic=opts["assume_d_asymptotic"],
        tol=opts["tol"], max_iters=opts["max_iters"], window=opts["window"],
        seed=opts["seed"], phi_seeds=opts["phi_seeds"],
    )
    if verdict.theorem_id is None:
        headline = f"No theorem applies: {verdict.conclusion_status}"
    else:
        headline = f"Theorem {verdict.theorem_id[1]} {verdict.conclusion_status}"
        fp = verdict.fixed_point_report
        if verdict.conclusion_status == "confirmed" and fp["limits"]:
            headline += f", z={_fmt(fp['limits'][0])}"
            if "self_distance_max" in fp:
                headline += f", d(z,z)={_fmt(fp['self_distance_max'])}"
    lines = [headline, f"space: {verdict.structure.label}"]
    if verdict.applicable:
        lines.append(f"applicable: {', '.join(verdict.applicable)}")
    lines.append("hypotheses:")
    for hyp in verdict.hypotheses:
        line = f"  {hyp.clause}: {hyp.status}"
        if hyp.note:
            line += f" ({hyp.note})"
        if hyp.witness is not None:
            line += f" witness {to_jsonable(hyp.witness)}"
        lines.append(line)
    if verdict.conclusion_checks:
        lines.append("conclusion checks:")
        for chk in verdict.conclusion_checks:
            lines.append(f"  {chk['name']}: {_flag(chk['ok'])} [{_fmt(chk['value'])}]")
    payload = {"task": "harness", "verdict": verdict.to_jsonable()}
    return (0 if verdict.conclusion_status == "confirmed" else 1), lines, payload


def _run_witness(config, args):
    opts = _load_options(config, args)
    prefix = _load_sequence(config["sequence"])
    profile = semi_cauchy_profile(prefix, tol=opts["tol"], eps=opts["eps"])
    report = lemma1_witness(prefix, eps=opts["eps"], j_max=opts["j_max"])
    lines = [
        f"prefix of {prefix.n_points} points; eps={_fmt(report.eps)}"
        + (" (auto)" if report.eps_auto else ""),
        f"semi-Cauchy at tol={_fmt(profile.tol)}: {profile.semi_cauchy}"
        + (f", Cauchy violation: {profile.cauchy_violation}"
           if profile.cauchy_violation is not None else ""),
        f"j_eps={report.j_eps}; rows {'complete' if report.complete else 'PARTIAL'} "
        f"through j={report.rows[-1].j}",
        "    j     m(j)     n(j)        d(m,n)      d(m,n-1)",
    ]
    for row in report.rows[:20]:
        lines.append(
            f"  {row.j:>3d} {row.m:>8d} {row.n:>8d}  {row.d_mn:>12.6g}  {row.d_m_nm1:>12.6g}"
        )
    if len(report.rows) > 20:
        lines.append(f"  ... {len(report.rows) - 20} more rows in the JSON report")
    payload = {
        "task": "witness",
        "profile": to_jsonable(profile),
        "witness": to_jsonable(report),
    }
    return (0 if report.complete else 1), lines, payload


def _run_lemma2(config, args):
    opts = _load_options(config, args)
    phi = _load_phi(config["phi"])
    section = config["descent"]
    _check_keys(section, "descent", {"s", "points"}, {"s", "points"})
    s = float(section["s"])
    points = np.asarray(section["points"], dtype=np.float64)
    verdict = lemma2_check(phi, s, points, window=opts["window"])
    det = verdict.details
    lines = [
        f"descent to s={_fmt(det['s'])}: tail sup phi = {_fmt(det['tail_max'])}, "
        f"envelope estimate = {_fmt(det['estimate'])}",
        f"tail bound: {_flag(verdict.holds)} (slack {_fmt(det['slack'])})",
    ]
    payload = {"task": "lemma2", "verdict": to_jsonable(verdict)}
    return (0 if verdict.holds else 1), lines, payload


RUNNERS = {
    "classify-space": _run_classify_space,
    "classify-phi": _run_classify_phi,
    "check-contraction": _run_check_contraction,
    "iterate": _run_iterate,
    "harness": _run_harness,
    "witness": _run_witness,
    "lemma2": _run_lemma2,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fixlab",
        description="Distance-structure classification, contraction checks, "
                    "Picard iteration, and sequence witnesses.",
    )
    sub = parser.add_subparsers(dest="task", required=True, metavar="TASK")
    for task in TASKS:
        p = sub.add_parser(task)
        p.add_argument("config_path", nargs="?", default=None,
                       help="JSON configuration document")
        p.add_argument("--config", dest="config_flag", default=None,
                       help="alternative way to pass the config path")
        p.add_argument("--json", dest="json_out", default=None,
                       help="write the full report to this file as JSON")
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--grid", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--eps", type=float, default=None)
        p.add_argument("--gauge", choices=list(GAUGES), default=None)
    return parser


def _load_config_document(args) -> dict:
    path = args.config_flag or args.config_path
    if path is None:
        raise ConfigError("no config path given (positional or --config)")
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    _check_keys(config, "config", TOP_KEYS, TASK_REQUIRES[args.task])
    if "task" in config and config["task"] != args.task:
        raise ConfigError(
            f"config names task {config['task']!r} but {args.task!r} was invoked"
        )
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config_document(args)
        code, lines, payload = RUNNERS[args.task](config, args)
    except (ConfigError, ExprError, SpaceError, PhiError, MapError,
            SequenceError, EvaluationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print("\n".join(lines))
    if args.json_out:
        doc = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        try:
            with open(args.json_out, "w", encoding="utf-8") as fh:
                fh.write(doc)
        except OSError as exc:
            print(f"error: cannot write JSON report: {exc}", file=sys.stderr)
            return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
