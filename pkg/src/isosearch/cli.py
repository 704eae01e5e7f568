"""Command-line front-end: configuration files, reproducible multi-run
searches, constraint checking, canonicalization, fitting, and synthetic data
generation.

Subcommands: search, check, canon, fit, synth, report.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import os
import sys
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import __version__
from .bsr import BsrConfig, run_bsr
from .constraints import check_all, limit_at_zero_plus
from .algebra import canonical_form, differentiate
from .datasets import (
    Dataset,
    DatasetError,
    GridSpec,
    catalog_model,
    load_csv,
    synthesize,
)
from .expr import ParseError, node_count, parse, render
from .fitting import fit_constants
from .ga import GaConfig, run_ga
from .pareto import (
    ParetoFront,
    ScoredModel,
    log_area_under_front,
    merge_fronts,
    pass_rates,
)

EXIT_OK = 0
EXIT_ERROR = 2

_GA_DEFAULT_PENALTIES = (1.3, 1.3, 1.3)
_BSR_DEFAULT_PENALTIES = (20.0, 10.0)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config files: `key = value` lines, '#' comments.
# ---------------------------------------------------------------------------


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}")


def _floats(s: str) -> tuple:
    return tuple(float(v) for v in s.split(",") if v.strip())


@dataclass(frozen=True)
class RunConfig:
    engine: str = "ga"
    dataset_spec: str = ""
    seed: int = 1
    runs: int = 8
    out_dir: str = "out"
    deterministic: bool = False
    constraints_on: bool = True
    options: dict = field(default_factory=dict)

    @staticmethod
    def from_mapping(m: dict) -> "RunConfig":
        engine = m.get("engine", "ga").lower()
        if engine not in ("ga", "bsr"):
            raise ConfigError(f"engine must be ga or bsr, got {engine!r}")
        runs = int(m.get("runs", "8"))
        if runs < 1:
            raise ConfigError("runs must be >= 1")
        con = m.get("constraints", "on").lower()
        if con not in ("on", "off"):
            raise ConfigError("constraints must be on or off")
        options = {k: v for k, v in m.items()
                   if k.startswith(("ga.", "bsr."))}
        return RunConfig(
            engine=engine,
            dataset_spec=m.get("dataset", ""),
            seed=int(m.get("seed", "1")),
            runs=runs,
            out_dir=m.get("out", "out"),
            deterministic=m.get("deterministic", "false").lower()
            in ("1", "true", "yes"),
            constraints_on=(con == "on"),
            options=options,
        )

    def as_mapping(self) -> dict:
        out = {
            "engine": self.engine,
            "dataset": self.dataset_spec,
            "seed": str(self.seed),
            "runs": str(self.runs),
            "out": self.out_dir,
            "deterministic": "true" if self.deterministic else "false",
            "constraints": "on" if self.constraints_on else "off",
        }
        out.update({k: str(v) for k, v in sorted(self.options.items())})
        return out


def build_dataset(spec: str, master_seed: int) -> Dataset:
    """Dataset spec: ``csv:PATH`` or
    ``synthetic:MODEL:p1,p2,...:log|linear:lo,hi,n:sigma``.  Synthetic noise
    is seeded from the master seed, so every run sees the same data."""
    if not spec:
        raise ConfigError("no dataset configured (set `dataset = ...`)")
    kind, _, rest = spec.partition(":")
    if kind == "csv":
        if not rest:
            raise ConfigError("csv dataset spec needs a path")
        return load_csv(rest)
    if kind == "synthetic":
        parts = rest.split(":")
        if len(parts) != 4:
            raise ConfigError(
                "synthetic spec is synthetic:MODEL:params:kind:lo,hi,n:sigma"
                " (grid kind folded: MODEL:params:lo,hi,n expects 4 fields)"
            )
        model_name, params_s, grid_s, sigma_s = parts
        model = catalog_model(model_name)
        params = _floats(params_s)
        grid_bits = grid_s.split(",")
        if len(grid_bits) == 4:
            gkind, lo, hi, n = grid_bits[0], *grid_bits[1:]
        else:
            gkind, (lo, hi, n) = "log", grid_bits
        grid = GridSpec(float(lo), float(hi), int(n), gkind)
        sigma = float(sigma_s)
        rng = np.random.default_rng(np.random.SeedSequence([master_seed, 0xD5]))
        return synthesize(model, params, grid, sigma, rng)
    raise ConfigError(f"unknown dataset spec kind {kind!r}")


def _engine_config(cfg: RunConfig):
    opts = {k.split(".", 1)[1]: v for k, v in cfg.options.items()
            if k.startswith(cfg.engine + ".")}
    if cfg.engine == "ga":
        base = GaConfig(
            penalties=_GA_DEFAULT_PENALTIES if cfg.constraints_on else (1.0, 1.0, 1.0)
        )
        fields = {
            "population_size": int, "islands": int, "generations": int,
            "parsimony": float, "max_size": int, "replace_frac": float,
            "tournament": int, "hof_period": int, "hof_submit": int,
            "hof_inject": int, "fit_restarts": int, "fit_max_iter": int,
            "fit_tol": float, "check_budget": float,
        }
    else:
        base = BsrConfig(
            penalties=_BSR_DEFAULT_PENALTIES if cfg.constraints_on else (0.0, 0.0)
        )
        fields = {
            "steps": int, "c_ops": float, "c_par": float, "max_size": int,
            "thin": int, "fit_restarts": int, "fit_max_iter": int,
            "fit_tol": float, "check_budget": float,
        }
    updates = {}
    for key, value in opts.items():
        if key == "penalties":
            updates["penalties"] = _floats(value)
        elif key == "move_freqs" and cfg.engine == "bsr":
            updates["move_freqs"] = _floats(value)
        elif key in fields:
            updates[key] = fields[key](value)
        else:
            raise ConfigError(f"unknown option {cfg.engine}.{key}")
    return replace(base, **updates)


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_front_csv(path: str, front: ParetoFront, budget: float,
                     p_max: Optional[float]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["complexity", "loss", "canonical_form",
                    "c1_pass", "c2_pass", "c3_pass", "params"])
        for e in front.entries():
            v = e.verdict
            if v is None or None in (v.c1_pass, v.c2_pass, v.c3_pass):
                try:
                    expr = parse(e.canonical)
                    v = check_all(expr, e.params, budget=budget, p_max=p_max)
                except (ParseError, ValueError):
                    v = None
            marks = (
                [str(bool(v.c1_pass)), str(bool(v.c2_pass)), str(bool(v.c3_pass))]
                if v is not None else ["", "", ""]
            )
            w.writerow([e.complexity, _fmt(e.loss), e.canonical, *marks,
                        ";".join(_fmt(p) for p in e.params)])


def _read_front_csv(path: str) -> list:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rows.append(row)
    return rows


def _write_samples_csv(path: str, samples: list):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["expr", "params", "loss", "raw_l2",
                    "raw_complexity", "canonical", "canonical_complexity"])
        for s in samples:
            w.writerow([
                render(s.expr), ";".join(_fmt(p) for p in s.params),
                _fmt(s.loss), _fmt(s.raw_l2), s.raw_complexity,
                s.canonical, s.canonical_complexity,
            ])


def _read_samples_csv(path: str) -> list:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            params = tuple(float(v) for v in row["params"].split(";") if v)
            out.append(ScoredModel(
                expr=parse(row["expr"]),
                params=params,
                loss=float(row["loss"]),
                raw_l2=float(row["raw_l2"]),
                raw_complexity=int(row["raw_complexity"]),
                canonical=row["canonical"],
                canonical_complexity=int(row["canonical_complexity"]),
            ))
    return out


def _write_pass_rates(path: str, rows: list):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["engine", "constraints_active", "n_unique",
                    "c1_pass_fraction", "c2_pass_fraction", "c3_pass_fraction"])
        for r in rows:
            w.writerow([r.engine, str(r.constraints_on), r.n_unique,
                        _fmt(r.c1), _fmt(r.c2), _fmt(r.c3)])


def _config_hash(mapping: dict) -> str:
    text = "\n".join(f"{k} = {v}" for k, v in sorted(mapping.items()))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _write_manifest(path: str, cfg: RunConfig, run_seeds: list, duration: float):
    m = cfg.as_mapping()
    lines = [f"{k} = {v}" for k, v in m.items()]
    lines.append(f"info.version = {__version__}")
    lines.append(f"info.config_hash = {_config_hash(m)}")
    lines.append(f"info.run_seeds = {','.join(str(s) for s in run_seeds)}")
    lines.append(f"info.duration_s = {duration:.3f}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# search
# ---------------------------------------------------------------------------


def _run_one(payload):
    """Worker entry: one independent search run."""
    engine, dataset, econfig, run_seed = payload
    rng = np.random.default_rng(run_seed)
    if engine == "ga":
        return run_ga(dataset, econfig, rng, seed=run_seed)
    return run_bsr(dataset, econfig, rng, seed=run_seed)


def cmd_search(args) -> int:
    mapping = load_config(args.config) if args.config else {}
    if args.seed is not None:
        mapping["seed"] = str(args.seed)
    if args.runs is not None:
        mapping["runs"] = str(args.runs)
    if args.out is not None:
        mapping["out"] = args.out
    if args.deterministic:
        mapping["deterministic"] = "true"
    if args.constraints is not None:
        mapping["constraints"] = args.constraints
    cfg = RunConfig.from_mapping(mapping)
    dataset = build_dataset(cfg.dataset_spec, cfg.seed)
    econfig = _engine_config(cfg)

    seeds = [int(s.generate_state(1)[0] % (2**31))
             for s in np.random.SeedSequence(cfg.seed).spawn(cfg.runs)]
    payloads = [(cfg.engine, dataset, econfig, s) for s in seeds]

    t0 = time.time()
    if cfg.deterministic or cfg.runs == 1:
        records = [_run_one(p) for p in payloads]
    else:
        workers = min(cfg.runs, os.cpu_count() or 1)
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(_run_one, payloads))
    duration = time.time() - t0

    os.makedirs(cfg.out_dir, exist_ok=True)
    budget = econfig.check_budget
    p_max = dataset.max_pressure
    for i, rec in enumerate(records, start=1):
        _write_front_csv(os.path.join(cfg.out_dir, f"front_run{i:02d}.csv"),
                         rec.front, budget, p_max)
        _write_samples_csv(os.path.join(cfg.out_dir, f"samples_run{i:02d}.csv"),
                           rec.samples)
    merged = merge_fronts([rec.front for rec in records])
    _write_front_csv(os.path.join(cfg.out_dir, "merged_front.csv"),
                     merged, budget, p_max)
    all_samples = [s for rec in records for s in rec.samples]
    row = pass_rates(all_samples, engine=cfg.engine,
                     constraints_on=cfg.constraints_on,
                     budget=budget, p_max=p_max)
    _write_pass_rates(os.path.join(cfg.out_dir, "pass_rates.csv"), [row])
    _write_manifest(os.path.join(cfg.out_dir, "manifest.txt"), cfg, seeds,
                    duration)
    print(f"{cfg.engine}: {cfg.runs} runs in {duration:.1f}s -> {cfg.out_dir}")
    best = merged.entries()
    if best:
        top = min(best, key=lambda e: e.loss)
        print(f"best: complexity {top.complexity}, loss {top.loss:.6g}, "
              f"{top.canonical}")
    area = log_area_under_front(merged)
    if area is not None:
        print(f"log-area under merged front (non-normative): {area:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# check / canon / fit / synth / report
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    expr = parse(args.expression)
    params = _floats(args.params) if args.params else ()
    lo, hi = 1e-8, 1000.0
    if args.range:
        lo, hi = (float(v) for v in args.range.split(","))
    verdict = check_all(expr, params, budget=args.budget,
                        p_max=hi / 10.0)
    lim0 = limit_at_zero_plus(expr, params, budget=args.budget)
    lim1 = limit_at_zero_plus(differentiate(expr), params, budget=args.budget)
    marks = []
    for i, name in enumerate(("C1", "C2", "C3"), start=1):
        ok = verdict.passed(i)
        text = f"{name} {'pass' if ok else 'fail'}"
        if i == 2 and ok and lim1.is_finite:
            text += f" (slope {lim1.value:g})"
        if verdict.timed_out[i - 1]:
            text += " [timeout]"
        marks.append(text)
    print(", ".join(marks))
    print(f"limit f(p->0+) = {lim0}")
    print(f"limit f'(p->0+) = {lim1}")
    print("elapsed: " + ", ".join(
        f"c{i+1}={verdict.elapsed[i]*1000:.1f}ms" for i in range(3)))
    return EXIT_OK


def cmd_canon(args) -> int:
    expr = parse(args.expression)
    params = _floats(args.params) if args.params else None
    cf = canonical_form(expr, fitted_params=params)
    print(f"canonical: {cf.string}")
    print(f"raw_complexity: {node_count(expr)}")
    print(f"canonical_complexity: {cf.complexity}")
    print(f"parameters: {cf.param_count}")
    if cf.values is not None and len(cf.values):
        print("values: " + ", ".join(f"{float(v):.10g}" for v in cf.values))
    if cf.unreliable:
        print("warning: canonicalization unreliable for this expression")
    return EXIT_OK


def cmd_fit(args) -> int:
    expr = parse(args.expression)
    dataset = load_csv(args.data)
    rng = np.random.default_rng(args.seed)
    fr = fit_constants(expr, dataset, restarts=args.restarts, rng=rng)
    print("params: " + (", ".join(f"{v:.10g}" for v in fr.params) or "(none)"))
    print(f"loss: {fr.loss:.12g}")
    print(f"restarts_used: {fr.restarts_used}")
    print(f"converged: {fr.converged}")
    return EXIT_OK


def cmd_synth(args) -> int:
    model = catalog_model(args.model)
    params = _floats(args.params)
    bits = args.grid.split(",")
    if len(bits) == 4:
        grid = GridSpec(float(bits[1]), float(bits[2]), int(bits[3]), bits[0])
    else:
        grid = GridSpec(float(bits[0]), float(bits[1]), int(bits[2]), "log")
    rng = np.random.default_rng(args.seed)
    ds = synthesize(model, params, grid, args.noise, rng)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["pressure", "loading"])
        for p, y in zip(ds.pressures, ds.loadings):
            w.writerow([_fmt(p), _fmt(y)])
    print(f"wrote {len(ds)} points to {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    run_dir = args.runs_dir
    sample_files = sorted(
        f for f in os.listdir(run_dir)
        if f.startswith("samples_run") and f.endswith(".csv")
    )
    if not sample_files:
        raise ConfigError(f"no samples_run*.csv files in {run_dir}")
    manifest = {}
    mpath = os.path.join(run_dir, "manifest.txt")
    if os.path.exists(mpath):
        manifest = load_config(mpath)
    engine = manifest.get("engine", "?")
    con = manifest.get("constraints", "on") == "on"
    samples = []
    for f in sample_files:
        samples.extend(_read_samples_csv(os.path.join(run_dir, f)))
    row = pass_rates(samples, engine=engine, constraints_on=con)
    _write_pass_rates(os.path.join(run_dir, "pass_rates.csv"), [row])
    print(f"{len(samples)} samples, {row.n_unique} unique canonical forms")
    print(f"pass fractions: C1={row.c1:.3f} C2={row.c2:.3f} C3={row.c3:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="isosearch",
        description="Constrained symbolic regression for adsorption isotherms",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("search", help="run the configured search")
    s.add_argument("--config", help="key = value config file")
    s.add_argument("--seed", type=int)
    s.add_argument("--runs", type=int)
    s.add_argument("--out")
    s.add_argument("--deterministic", action="store_true",
                   help="run sequentially in-process")
    s.add_argument("--constraints", choices=["on", "off"])
    s.set_defaults(fn=cmd_search)

    c = sub.add_parser("check", help="thermodynamic constraint verdicts")
    c.add_argument("expression")
    c.add_argument("--params", default="")
    c.add_argument("--range", help="lo,hi pressure range for the check")
    c.add_argument("--budget", type=float, default=0.1)
    c.set_defaults(fn=cmd_check)

    n = sub.add_parser("canon", help="canonical form and complexities")
    n.add_argument("expression")
    n.add_argument("--params", default="")
    n.set_defaults(fn=cmd_canon)

    f = sub.add_parser("fit", help="fit constants to a CSV dataset")
    f.add_argument("expression")
    f.add_argument("--data", required=True)
    f.add_argument("--restarts", type=int, default=8)
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(fn=cmd_fit)

    y = sub.add_parser("synth", help="write a synthetic dataset CSV")
    y.add_argument("model")
    y.add_argument("--params", required=True)
    y.add_argument("--grid", default="log,0.01,100,20")
    y.add_argument("--noise", type=float, default=0.0)
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--out", required=True)
    y.set_defaults(fn=cmd_synth)

    r = sub.add_parser("report", help="rebuild pass-rate table from run files")
    r.add_argument("runs_dir")
    r.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, DatasetError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
