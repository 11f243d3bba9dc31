"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 argument error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import criteria, persistency
from .criteria import StarConfig
from .noise import SourceNoise, effective_source_state
from .oracle import optimize_settings
from .qstate import CorrelationSpectrum, state_spectrum

EXIT_OK, EXIT_VERIFY, EXIT_ARGS, EXIT_IO = 0, 1, 2, 3

NOISE_PARAMS = ("alpha", "delta", "mu", "beta", "gamma_amp", "xi_amp", "gamma_ph", "xi_ph")
CRITERIA = ("noiseless", "noisy", "gate", "ad", "pd", "noncyclic")
FAMILIES = ("singlet", "gate", "ad", "pd")
VERIFY_GAP = 1e-3
VERIFY_SLACK = 1e-9


class ArgError(Exception):
    pass


class VerifyFailure(Exception):
    pass


def _add_output(p):
    p.add_argument("--output", "-o", help="write here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="starnoise", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="flat key = value file; flags take precedence")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate a closed-form criterion")
    p.add_argument("--criterion", choices=CRITERIA)
    p.add_argument("--n", type=int)
    p.add_argument("--p-n", dest="p_n", type=int)
    p.add_argument("--t1", type=float)
    p.add_argument("--t2", type=float)
    for name in NOISE_PARAMS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float)
    _add_output(p)

    p = sub.add_parser("verify", help="compare the optimized oracle with the closed form")
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--n", type=int)
    p.add_argument("--draws", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sources", choices=("consistent", "independent"),
                   help="draw one noise record for all sources, or one per source")
    _add_output(p)

    p = sub.add_parser("region", help="infinite-persistency membership grid")
    p.add_argument("--case", choices=sorted(persistency.REGION_CASES))
    p.add_argument("--res", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    _add_output(p)

    p = sub.add_parser("nmax-map", help="n_max staircase grid")
    p.add_argument("--case", choices=[c.value for c in persistency.CaseId])
    p.add_argument("--res", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    _add_output(p)

    p = sub.add_parser("nmax", help="n_max for one partially consistent case (k = 1 preset)")
    p.add_argument("--case", choices=[c.value for c in persistency.CaseId])
    p.add_argument("--p1", type=float, help="first primed parameter")
    p.add_argument("--p2", type=float, help="second primed parameter")
    p.add_argument("--cap", type=int)
    _add_output(p)

    p = sub.add_parser("table1", help="persistency table for the four preset cases")
    p.add_argument("--cap", type=int)
    _add_output(p)
    return parser


DEFAULTS = {
    "eval": {"n": 1, "format": "json", **{k: None for k in NOISE_PARAMS}},
    "verify": {"family": "gate", "n": 1, "draws": 20, "restarts": 20, "seed": 0,
               "sources": "consistent", "format": "json"},
    "region": {"case": "mu-beta", "res": None, "seed": 0, "format": "csv"},
    "nmax-map": {"case": "state", "res": None, "cap": persistency.MAP_CAP, "seed": 0, "format": "csv"},
    "nmax": {"cap": persistency.DEFAULT_CAP, "format": "json"},
    "table1": {"cap": persistency.DEFAULT_CAP, "format": "json"},
}


def read_config(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ArgError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ArgError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def merge_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    """Flags override config-file values, which override defaults."""
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    cfg = read_config(args.config) if args.config else {}
    sub = parser._subparsers._group_actions[0].choices[args.command]
    types = {a.dest: a.type for a in sub._actions if a.dest != "help"}
    merged = dict(DEFAULTS.get(args.command, {}))
    for key, raw in cfg.items():
        if key not in types:
            raise ArgError(f"unknown parameter {key!r} in config for {args.command}")
        conv = types[key] or str
        try:
            merged[key] = conv(raw)
        except ValueError as exc:
            raise ArgError(f"parameter {key}: cannot parse {raw!r}") from exc
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
        else:
            merged.setdefault(key, None)
    return merged


def _check_unit(cfg: dict, names):
    for name in names:
        v = cfg.get(name)
        if v is not None and not 0.0 <= v <= 1.0:
            raise ArgError(f"parameter {name} must lie in [0, 1], got {v}")


def _require(cfg: dict, *names):
    missing = [n for n in names if cfg.get(n) is None]
    if missing:
        raise ArgError(f"missing required parameter(s): {', '.join(missing)}")


def _positive(cfg: dict, *names):
    for name in names:
        v = cfg.get(name)
        if v is not None and v < 1:
            raise ArgError(f"parameter {name} must be a positive integer, got {v}")


def _source_from(cfg: dict) -> SourceNoise:
    values = {k: cfg[k] for k in NOISE_PARAMS if cfg.get(k) is not None}
    return SourceNoise(**values)


def cmd_eval(cfg: dict) -> dict:
    _require(cfg, "criterion")
    _positive(cfg, "n", "p_n")
    _check_unit(cfg, NOISE_PARAMS)
    crit, n = cfg["criterion"], cfg["n"]
    if crit == "noiseless":
        _require(cfg, "t1", "t2")
    if crit in ("noiseless", "noisy", "noncyclic") and cfg.get("t1") is not None:
        _require(cfg, "t2")
        if not 0 <= cfg["t2"] <= cfg["t1"] <= 1:
            raise ArgError("need 0 <= t2 <= t1 <= 1")
    if crit == "noncyclic":
        _require(cfg, "p_n")
        if cfg["p_n"] > n:
            raise ArgError(f"parameter p_n must not exceed n = {n}")
    if crit == "ad":
        _require(cfg, "gamma_amp", "xi_amp")
    if crit == "pd":
        _require(cfg, "gamma_ph", "xi_ph")

    try:
        source = _source_from(cfg)
        kind = {"gate": "none", "ad": "amp", "pd": "ph"}.get(crit) or source.channel_kind()
        config = StarConfig.consistent(source, n, kind)
    except ValueError as exc:
        raise ArgError(str(exc)) from exc
    if cfg.get("t1") is not None:
        spectra = [CorrelationSpectrum(cfg["t1"], cfg["t2"], 0.0)] * n
    else:
        spectra = [state_spectrum(effective_source_state(source, kind))] * n

    if crit == "noiseless":
        result = criteria.s_star_noiseless(spectra, n)
    elif crit == "noisy":
        result = criteria.s_star_noisy(config, spectra)
    elif crit == "noncyclic":
        result = criteria.s_noncyclic(config, spectra, cfg["p_n"])
    else:
        try:
            result = {"gate": criteria.s_star_gate_noise, "ad": criteria.s_star_ad,
                      "pd": criteria.s_star_pd}[crit](config)
        except ValueError as exc:
            raise ArgError(str(exc)) from exc
    return {"criterion": crit, "n": n, **result.to_dict()}


def _draw_source(family: str, rng: np.random.Generator) -> SourceNoise:
    if family == "singlet":
        return SourceNoise()
    base = dict(alpha=rng.uniform(0.6, 1), delta=rng.uniform(0.6, 1),
                mu=rng.uniform(0.7, 1), beta=rng.uniform(0.7, 1))
    if family == "ad":
        base.update(gamma_amp=rng.uniform(0, 0.4), xi_amp=rng.uniform(0, 0.4))
    elif family == "pd":
        base.update(gamma_ph=rng.uniform(0, 0.4), xi_ph=rng.uniform(0, 0.4))
    return SourceNoise(**base)


FAMILY_KIND = {"singlet": "none", "gate": "none", "ad": "amp", "pd": "ph"}


def verify_family(family: str, n: int, draws: int, restarts: int, seed: int,
                  sources: str = "consistent") -> dict:
    """Optimize the oracle on random configurations and compare with the
    closed form of the family. Returns a report with the largest gaps."""
    rng = np.random.default_rng(seed)
    kind = FAMILY_KIND[family]
    closed = {"singlet": criteria.s_star_gate_noise, "gate": criteria.s_star_gate_noise,
              "ad": criteria.s_star_ad, "pd": criteria.s_star_pd}[family]
    rows = []
    for d in range(draws if family != "singlet" else 1):
        if sources == "consistent":
            srcs = (_draw_source(family, rng),) * n
        else:
            srcs = tuple(_draw_source(family, rng) for _ in range(n))
        config = StarConfig(srcs, kind)
        states = [effective_source_state(s, kind) for s in srcs]
        opt = optimize_settings(states, srcs, n, restarts=restarts, seed=seed + d)
        target = closed(config).s
        rows.append({"draw": d, "oracle": opt.result.s, "closed_form": target,
                     "gap": opt.result.s - target, "sweeps": opt.sweeps,
                     "sources": [vars(s) for s in srcs]})
    max_abs = max(abs(r["gap"]) for r in rows)
    max_excess = max(r["gap"] for r in rows)
    passed = max_abs <= VERIFY_GAP and max_excess <= VERIFY_SLACK
    return {"family": family, "n": n, "sources": sources, "draws": len(rows),
            "max_abs_gap": max_abs, "max_excess": max_excess, "passed": passed, "rows": rows}


def cmd_verify(cfg: dict) -> dict:
    _positive(cfg, "n", "draws", "restarts")
    if cfg["n"] > 4:
        raise ArgError("parameter n must be at most 4 for oracle verification")
    report = verify_family(cfg["family"], cfg["n"], cfg["draws"], cfg["restarts"],
                           cfg["seed"], cfg["sources"])
    if not report["passed"]:
        worst = max(report["rows"], key=lambda r: abs(r["gap"]) if abs(r["gap"]) > VERIFY_GAP else r["gap"])
        raise VerifyFailure(json.dumps({"summary": {k: v for k, v in report.items() if k != "rows"},
                                        "offending": worst}, indent=1))
    return report


def _grid_text(grid, fmt):
    return persistency.grid_to_csv(grid) if fmt == "csv" else persistency.grid_to_json(grid)


def cmd_region(cfg: dict) -> str:
    if cfg["res"] is not None and cfg["res"] < 2:
        raise ArgError("parameter res must be at least 2")
    grid = persistency.region_scan(cfg["case"], resolution=cfg["res"], workers=cfg.get("threads"))
    return _grid_text(grid, cfg["format"])


def cmd_nmax_map(cfg: dict) -> str:
    if cfg["res"] is not None and cfg["res"] < 2:
        raise ArgError("parameter res must be at least 2")
    _positive(cfg, "cap")
    grid = persistency.nmax_map(cfg["case"], resolution=cfg["res"], cap=cfg["cap"],
                                workers=cfg.get("threads"))
    return _grid_text(grid, cfg["format"])


def cmd_nmax(cfg: dict) -> dict:
    _require(cfg, "case", "p1", "p2")
    _check_unit(cfg, ("p1", "p2"))
    _positive(cfg, "cap")
    case = persistency.PartialNoiseCase.preset(cfg["case"], cfg["p1"], cfg["p2"])
    try:
        result = persistency.n_max(case, cfg["cap"])
    except persistency.NumericalResolutionError as exc:
        raise ArgError(str(exc)) from exc
    return {"case": case.case_id.value, "params": dict(zip(case.param_names, case.primed)),
            **result.to_dict()}


def cmd_table1(cfg: dict):
    _positive(cfg, "cap")
    return persistency.table1(cfg["cap"])


def _table_csv(rows) -> str:
    lines = ["noise_type,params,star_psn,linear_psn_reference"]
    for r in rows:
        params = ";".join(f"{k}={v!r}" for k, v in r["params"].items())
        lines.append(f"{r['noise_type']},{params},{r['star_psn']},{r['linear_psn_reference']}")
    return "\n".join(lines) + "\n"


def _render(command: str, payload, fmt: str) -> str:
    if isinstance(payload, str):
        return payload
    if fmt == "csv":
        if command == "table1":
            return _table_csv(payload)
        if command == "verify":
            payload = payload["rows"]
        rows = payload if isinstance(payload, list) else [payload]
        keys = [k for k in rows[0] if not isinstance(rows[0][k], (list, dict))]
        lines = [",".join(keys)] + [",".join(_scalar(r[k]) for k in keys) for r in rows]
        return "\n".join(lines) + "\n"
    return json.dumps(payload, indent=1) + "\n"


def _scalar(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


COMMANDS = {"eval": cmd_eval, "verify": cmd_verify, "region": cmd_region,
            "nmax-map": cmd_nmax_map, "nmax": cmd_nmax, "table1": cmd_table1}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = merge_config(args, parser)
    except ArgError as exc:
        print(f"starnoise {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    out_dir = os.path.dirname(os.path.abspath(cfg["output"])) if cfg.get("output") else None
    if out_dir is not None and not os.access(out_dir, os.W_OK):
        print(f"starnoise {args.command}: cannot write to {out_dir}", file=sys.stderr)
        return EXIT_IO
    try:
        payload = COMMANDS[args.command](cfg)
    except ArgError as exc:
        print(f"starnoise {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except persistency.NumericalResolutionError as exc:
        print(f"starnoise {args.command}: error: {exc}; raise --cap", file=sys.stderr)
        return EXIT_ARGS
    except VerifyFailure as exc:
        print(f"starnoise verify: gap exceeded\n{exc}", file=sys.stderr)
        return EXIT_VERIFY
    text = _render(args.command, payload, cfg.get("format") or "json")
    if cfg.get("output"):
        try:
            with open(cfg["output"], "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"starnoise {args.command}: cannot write {cfg['output']}: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
