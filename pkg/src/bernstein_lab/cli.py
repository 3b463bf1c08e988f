"""Batch experiment runner.

A run is described by a JSON configuration (validated against
schema/config.schema.json).  The runner expands it into grid cells, runs
each cell in isolation (a failing cell is recorded, never fatal), sorts
the results and writes report.json (full records) and report.csv (one flat
row per cell) into the output directory.

CSV columns: curve_label, experiment, k, r, value, aux1, aux2, status.
The first CSV line is a '#' comment carrying the generation time; every
other byte depends only on the configuration and the precision.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional

import jsonschema
import numpy as np

from .cache import ProfileCache, resolve_cache_dir
from .errors import ConfigInvalid
from .functions import (
    DEFAULT_PRECISION,
    INFINITE_ORDER_THRESHOLD,
    CurveSpec,
    growth_profile,
    order_estimate,
    profile_key,
)

EXPERIMENTS = ("profile", "classc", "quotient", "exponent", "zeros", "kernel", "verify")
CSV_COLUMNS = ("curve_label", "experiment", "k", "r", "value", "aux1", "aux2", "status")
DEFAULT_SEED_TEXT = "0xB3R57E1N"
U64 = (1 << 64) - 1
DEFAULT_T_GRID = [2.0 + i for i in range(9)]
DEFAULT_SUP_SAMPLES = 1024
DEFAULT_PROFILE_SAMPLES = 256
DEFAULT_BAND = 0.4


def parse_seed(value) -> int:
    """A 64-bit seed from an integer or a string.

    Strings are read as hexadecimal when possible and otherwise as base 36
    (so the letters in the default seed text are meaningful), after dropping
    an optional 0x prefix.  The result is truncated to 64 bits.
    """
    if value is None:
        value = DEFAULT_SEED_TEXT
    if isinstance(value, bool):
        raise ConfigInvalid("seed must be an integer or a string", "/seed")
    if isinstance(value, int):
        if value < 0:
            raise ConfigInvalid("seed must be nonnegative", "/seed")
        return value & U64
    text = str(value).strip()
    body = text[2:] if text[:2].lower() == "0x" else text
    if not body:
        raise ConfigInvalid(f"unparseable seed {value!r}", "/seed")
    for base in ((16, 36) if text[:2].lower() == "0x" else (10, 16, 36)):
        try:
            return int(body, base) & U64
        except ValueError:
            continue
    raise ConfigInvalid(f"unparseable seed {value!r}", "/seed")


DEFAULT_SEED = parse_seed(DEFAULT_SEED_TEXT)


def load_schema() -> dict:
    text = resources.files("bernstein_lab").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def validate_config(cfg: dict) -> dict:
    """Schema check plus the cross-field rules; raises ConfigInvalid with a JSON pointer."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        pointer = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ConfigInvalid(err.message, pointer)
    exp = cfg.get("experiment")
    if exp is None:
        raise ConfigInvalid("experiment is required", "/experiment")
    if exp not in ("verify",) and "curve" not in cfg:
        raise ConfigInvalid(f"experiment {exp} needs a curve", "/curve")
    if exp in ("quotient", "exponent", "kernel", "zeros"):
        if "k_range" not in cfg:
            raise ConfigInvalid(f"experiment {exp} needs k_range", "/k_range")
        lo, hi = cfg["k_range"]
        if lo > hi:
            raise ConfigInvalid("k_range is empty (min > max)", "/k_range")
    if exp == "exponent" and cfg["k_range"][1] - max(cfg["k_range"][0], 2) + 1 < 4:
        raise ConfigInvalid("exponent fits need at least 4 values of k >= 2", "/k_range")
    try:
        parse_seed(cfg.get("seed"))
    except ConfigInvalid as exc:
        raise ConfigInvalid(exc.message, "/seed") from None
    return cfg


def cell_rng(seed: int, curve_digest: str, k, r) -> np.random.Generator:
    """The per-cell random stream: SHA-256 of (seed, curve digest, k, r)."""
    h = hashlib.sha256(f"{seed}|{curve_digest}|{k}|{float(r)!r}".encode()).digest()
    return np.random.default_rng(int.from_bytes(h[:8], "big"))


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    try:
        return repr(float(x))
    except (TypeError, ValueError):
        return str(x)


# ---------------------------------------------------------------------------
# cells


def _row(label, experiment, k, r, value, aux1=None, aux2=None, status="ok", record=None) -> dict:
    return {"curve_label": label, "experiment": experiment, "k": k, "r": r, "value": value,
            "aux1": aux1, "aux2": aux2, "status": status, "record": record or {}}


def _cell_quotient(cfg, curve, k, r, method):
    from .quotient import extremal_quotient, random_search

    prec = cfg.get("precision_bits")
    if method == "gram_l2":
        q = extremal_quotient(k, curve, r, prec)
        aux2 = q.metadata.get("quad_points")
    else:
        rng = cell_rng(cfg["_seed"], curve.digest, k, r)
        q = random_search(k, curve, r, int(cfg.get("random_draws", 32)), rng,
                          samples=int(cfg.get("samples", 512)), precision_bits=prec)
        aux2 = q.metadata.get("draws")
    return _row(curve.label, cfg["experiment"], k, r, q.log_quotient, method, aux2, record=_quotient_record(q))


def _quotient_record(q) -> dict:
    d = q.to_dict()
    d["metadata"] = {key: v for key, v in d["metadata"].items() if isinstance(v, (int, float, str, bool))}
    return d


def _cell_zeros(cfg, curve, k, r):
    from .zeros import lower_bound_experiment

    rec = lower_bound_experiment(k, curve, cfg.get("mode", "thm14"), r, cfg.get("precision_bits"))
    flat = {key: v for key, v in rec.items() if key not in ("witness", "series")}
    flat["witness"] = rec["witness"].to_dict()
    status = "ok" if rec["chain_holds"] else "chain_violated"
    return _row(curve.label, "zeros", k, r, rec["count"], rec["vanishing_order"], rec["jensen_bound"],
                status, flat)


def _cell_kernel(cfg, curve, k, r):
    from .quotient import kernel_witness_estimate
    from .restriction import default_kernel_precision, dim_pk, kernel_vanishing_poly, verify_kernel

    prec = cfg.get("precision_bits") or default_kernel_precision(k)
    target = int(cfg.get("target_order") or dim_pk(curve.m + 1, k) - 1)
    p = kernel_vanishing_poly(k, curve, target, prec)
    order = verify_kernel(p, curve, target, prec)
    q = kernel_witness_estimate(p, curve, r, int(cfg.get("samples", DEFAULT_SUP_SAMPLES)), prec)
    rec = {"target_order": target, "vanishing_order": order, "quotient": q.log_quotient,
           "precision_bits": prec, "witness": p.to_dict()}
    return _row(curve.label, "kernel", k, r, q.log_quotient, order, target, record=rec)


def _cell_profile(cfg, curve, index):
    f = curve.coords[index]
    grid = [float(t) for t in cfg.get("t_grid", DEFAULT_T_GRID)]
    prec = int(cfg.get("precision_bits") or DEFAULT_PRECISION)
    cache_dir = cfg.get("_cache_dir")
    cache = ProfileCache(cache_dir) if cache_dir else None
    key = profile_key(f, grid, prec)
    prof = cache.lookup(key, prec) if cache else None
    hit = prof is not None
    if prof is None:
        prof = growth_profile(f, grid, prec, int(cfg.get("samples", DEFAULT_PROFILE_SAMPLES)))
        if cache:
            cache.store(key, prof)  # reached only when the profile completed
    rows = []
    for i, t in enumerate(prof.t_samples):
        nu = prof.nu_values[i] if prof.nu_values is not None else None
        rows.append(_row(f.label, "profile", index, t, float(prof.phi_values[i]),
                         None if nu is None else float(nu), prof.rho_hat))
    rows[0]["record"] = {"coordinate": index, "cache_hit": hit, "profile": prof.to_dict()}
    return rows


def _cell_classc(cfg, curve, index):
    from .conditions import check_condition_I, check_condition_II, check_growth_1_11

    f = curve.coords[index]
    grid = [float(t) for t in cfg.get("t_grid", DEFAULT_T_GRID)]
    prec = int(cfg.get("precision_bits") or DEFAULT_PRECISION)
    samples = int(cfg.get("samples", DEFAULT_PROFILE_SAMPLES))
    infinite = f.kind in ("exp_of", "iterated_exp") or order_estimate(f) > INFINITE_ORDER_THRESHOLD
    first = check_condition_II if infinite else check_condition_I
    rows = []
    for rep in (first(f, grid, prec, samples), check_growth_1_11(f, grid, prec, samples)):
        last = rep.witness_values[-1] if rep.witness_values else None
        rows.append(_row(f.label, "classc", index, rep.violated_at, last, rep.condition_id, rep.trend,
                         rep.verdict, rep.to_dict()))
    return rows


def _cell_chain(cfg, curve):
    from .conditions import check_chain_conditions

    grid = [float(t) for t in cfg.get("t_grid", DEFAULT_T_GRID)]
    prec = int(cfg.get("precision_bits") or DEFAULT_PRECISION)
    rows = []
    for i, rep in enumerate(check_chain_conditions(curve, grid, prec, int(cfg.get("samples", 256)))):
        last = rep.witness_values[-1] if rep.witness_values else None
        rows.append(_row(curve.label, "classc", f"pair{i}", rep.violated_at, last, rep.condition_id, rep.trend,
                         rep.verdict, rep.to_dict()))
    return rows


def _run_cell(task: tuple) -> List[dict]:
    """Worker entry point: never raises, a failure becomes a failed row."""
    cfg, kind, k, r, extra = task
    curve = CurveSpec.from_dict(cfg["curve"])
    try:
        if kind in ("quotient", "exponent"):
            out = _cell_quotient(cfg, curve, k, r, extra)
        elif kind == "zeros":
            out = _cell_zeros(cfg, curve, k, r)
        elif kind == "kernel":
            out = _cell_kernel(cfg, curve, k, r)
        elif kind == "profile":
            out = _cell_profile(cfg, curve, k)
        elif kind == "classc":
            out = _cell_classc(cfg, curve, k)
        elif kind == "chain":
            out = _cell_chain(cfg, curve)
        else:
            raise ValueError(f"unknown cell kind {kind}")
    except Exception as exc:  # noqa: BLE001 -- per-cell isolation is the contract
        out = _row(curve.label, cfg["experiment"], k, r, None, extra, None, f"failed:{type(exc).__name__}",
                   {"error": str(exc), "traceback": traceback.format_exc(limit=3)})
    return out if isinstance(out, list) else [out]


def _tasks(cfg: dict, curve: CurveSpec) -> List[tuple]:
    exp = cfg["experiment"]
    r_values = [float(r) for r in cfg.get("r_values", [1.0])]
    tasks = []
    if exp in ("quotient", "exponent", "zeros", "kernel"):
        lo, hi = cfg["k_range"]
        methods = cfg.get("methods", ["gram_l2"]) if exp in ("quotient", "exponent") else [None]
        for k in range(lo, hi + 1):
            for r in r_values:
                for m in methods:
                    tasks.append((cfg, exp, k, r, m))
    elif exp == "profile":
        tasks = [(cfg, "profile", i, None, None) for i in range(curve.m)]
    elif exp == "classc":
        tasks = [(cfg, "classc", i, None, None) for i in range(curve.m)]
        if curve.m >= 2:
            tasks.append((cfg, "chain", None, None, None))
    return tasks


def _sort_key(row: dict):
    k = row["k"]
    kk = (0, k, "") if isinstance(k, int) else (1, 0, str(k))
    r = row["r"]
    rr = (0, float(r)) if isinstance(r, (int, float)) else (1, 0.0)
    return (row["curve_label"], row["experiment"], rr, kk, str(row["aux1"]))


def _fit_rows(cfg: dict, rows: List[dict], curve: CurveSpec) -> List[dict]:
    """Exponent fits per (r, method) over the surviving cells."""
    from .expfit import compare_fit, fit_exponent, theoretical_exponent

    theory = None
    if "theory" in cfg:
        t = cfg["theory"]
        theory = theoretical_exponent(t["class"], t.get("param"))
    band = float(cfg.get("band", DEFAULT_BAND))
    groups: Dict[tuple, list] = {}
    for row in rows:
        if row["status"] == "ok" and isinstance(row["k"], int):
            groups.setdefault((row["r"], row["aux1"]), []).append((row["k"], row["value"]))
    out = []
    for (r, method), pts in sorted(groups.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        try:
            fit = fit_exponent(pts)
            rec = fit.to_dict()
            verdict = None
            if theory is not None:
                rec["comparison"] = compare_fit(fit, theory, band)
                verdict = rec["comparison"]["verdict"]
            out.append(_row(curve.label, "exponent", "fit", r, fit.slope, fit.stderr, fit.points_used,
                            verdict or "ok", rec))
        except Exception as exc:  # noqa: BLE001
            out.append(_row(curve.label, "exponent", "fit", r, None, method, None,
                            f"failed:{type(exc).__name__}", {"error": str(exc)}))
    return out


def _csv_text(rows: List[dict], stamp: str) -> str:
    buf = io.StringIO()
    buf.write(f"# generated {stamp}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([row["curve_label"], row["experiment"], _num(row["k"]), _num(row["r"]), _num(row["value"]),
                    _num(row["aux1"]), _num(row["aux2"]), row["status"]])
    return buf.getvalue()


def _json_safe(x):
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, (str, int, float, bool)) or x is None:
        return x
    try:
        return float(x)
    except (TypeError, ValueError):
        return str(x)


def run_config(cfg: dict, echo=None) -> int:
    """Run one configuration; returns the process exit status."""
    cfg = validate_config(dict(cfg))
    seed = parse_seed(cfg.get("seed"))
    out_dir = Path(cfg.get("out_dir", "out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    exp = cfg["experiment"]

    if exp == "verify":
        from .acceptance import run_all

        results = run_all(seed=seed, selected=cfg.get("criteria"), precision_bits=cfg.get("precision_bits"),
                          echo=echo)
        rows = [_row("acceptance", "verify", res.number, None, 0 if res.skipped else int(res.passed),
                     round(res.elapsed, 3), res.title,
                     "skipped" if res.skipped else ("pass" if res.passed else "fail"),
                     {"detail": res.detail, "measured": res.measured}) for res in results]
        status = 0 if all(res.passed or res.skipped for res in results) else 1
    else:
        curve = CurveSpec.from_dict(cfg["curve"])
        work = dict(cfg, _seed=seed, _cache_dir=None)
        cache_dir = resolve_cache_dir(cfg.get("cache_dir"))
        if cache_dir is not None:
            work["_cache_dir"] = str(cache_dir)
        tasks = _tasks(work, curve)
        jobs = int(cfg.get("jobs", 1))
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                batches = list(pool.map(_run_cell, tasks))
        else:
            batches = [_run_cell(t) for t in tasks]
        rows = sorted((row for b in batches for row in b), key=_sort_key)
        if exp == "exponent":
            rows += _fit_rows(cfg, rows, curve)
        if exp == "zeros":
            _write_zeros_csv(out_dir / "zeros.csv", rows, stamp)
        if echo:
            failed = sum(1 for row in rows if row["status"].startswith("failed"))
            echo(f"{exp}: {len(rows)} rows, {failed} failed cells")
        status = 0

    report = {"generated": stamp, "seed": seed, "config": cfg,
              "rows": [dict(row) for row in rows]}
    (out_dir / "report.json").write_text(json.dumps(_json_safe(report), indent=1, sort_keys=True))
    (out_dir / "report.csv").write_text(_csv_text(rows, stamp))
    return status


def _write_zeros_csv(path: Path, rows: List[dict], stamp: str) -> None:
    buf = io.StringIO()
    buf.write(f"# generated {stamp}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "mode", "r", "vanishing_order", "count", "jensen_bound", "chain_holds", "status"])
    for row in rows:
        rec = row["record"]
        w.writerow([row["k"], rec.get("mode", ""), _num(row["r"]), _num(rec.get("vanishing_order")),
                    _num(rec.get("count")), _num(rec.get("jensen_bound")), _num(rec.get("chain_holds")),
                    row["status"]])
    path.write_text(buf.getvalue())


# ---------------------------------------------------------------------------
# command line


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bernstein-lab", description="Bernstein-inequality experiment runner")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", type=Path, help="JSON configuration file")
    ap.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
    ap.add_argument("--cache-dir", type=Path, help="growth-profile cache directory")
    ap.add_argument("--precision", type=int, help="working precision in bits")
    ap.add_argument("--jobs", type=int, help="worker processes")
    ap.add_argument("--seed", help="64-bit seed (integer or string)")
    ap.add_argument("--kmax", type=int, help="upper end of k_range")
    return ap


def config_from_args(args: argparse.Namespace) -> dict:
    cfg: Dict[str, Any] = {}
    if args.config is not None:
        try:
            cfg = json.loads(args.config.read_text())
        except (OSError, ValueError) as exc:
            raise ConfigInvalid(f"cannot read config: {exc}", "") from None
        if not isinstance(cfg, dict):
            raise ConfigInvalid("config must be a JSON object", "")
    if cfg.get("experiment", args.experiment) != args.experiment:
        raise ConfigInvalid(f"config experiment {cfg['experiment']!r} does not match subcommand "
                            f"{args.experiment!r}", "/experiment")
    cfg["experiment"] = args.experiment
    if args.out is not None:
        cfg["out_dir"] = str(args.out)
    if args.cache_dir is not None:
        cfg["cache_dir"] = str(args.cache_dir)
    if args.precision is not None:
        cfg["precision_bits"] = args.precision
    if args.jobs is not None:
        cfg["jobs"] = args.jobs
    if args.seed is not None:
        cfg["seed"] = int(args.seed) if args.seed.isdigit() else args.seed
    if args.kmax is not None:
        lo = cfg.get("k_range", [1, args.kmax])[0]
        cfg["k_range"] = [min(lo, args.kmax), args.kmax]
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        t0 = time.time()
        status = run_config(cfg, echo=lambda s: print(s, flush=True))
    except ConfigInvalid as exc:
        print(f"invalid config at {exc.pointer or '/'}: {exc.message}", file=sys.stderr)
        return 2
    print(f"wrote {cfg.get('out_dir', 'out')}/report.csv in {time.time() - t0:.1f}s")
    return status


if __name__ == "__main__":
    sys.exit(main())
