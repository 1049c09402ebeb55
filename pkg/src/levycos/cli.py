"""
Command line front end.

    levycos price       --config run.json [--out DIR] [--threads N]
    levycos validate    --config run.json    # prices plus Monte Carlo 95% intervals
    levycos convergence --config run.json    # short-time order of the expansion
    levycos greeks      --config run.json    # Delta/Gamma with a finite-difference check

Exit status: 0 on success, 2 for configuration or model errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import replace

import jsonschema
import numpy as np

from .american import price_american
from .bermudan import BermudanProblem, price_bermudan
from .config import (
    REPORT_SCHEMA,
    ConfigError,
    build_engine,
    build_model,
    build_sim,
    load_config,
    schedules_of,
    strikes_of,
    styles_of,
)
from .cos import european_price, make_grid
from .expansion import CharFnExpansion, UnsupportedOrderError
from .fft import ConvolutionPlan
from .mc_oracle import convergence_order, european_ci, ls_bermudan_ci, mc_char_fn_grid, simulate_paths
from .models import ModelError

CSV_COLUMNS = ["model", "style", "T", "M", "K", "order", "value", "delta", "gamma",
               "mc_lo", "mc_hi", "in_ci", "ms_per_date"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
FD_BUMP = 1e-4


class NumericError(RuntimeError):
    pass


# --------------------------------------------------------------------------- #
# output
# --------------------------------------------------------------------------- #

def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    return v


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in CSV_COLUMNS})
    return buf.getvalue()


def write_report(command: str, cfg: dict, rows: list, summary: dict, out_dir: str) -> dict:
    report = _clean({"command": command, "config": cfg, "rows": rows, "summary": summary})
    jsonschema.validate(report, REPORT_SCHEMA)
    formats = cfg.get("output", {}).get("formats", ["csv", "json"])
    paths = {}
    if "json" in formats:
        paths["json"] = os.path.join(out_dir, f"{command}.json")
        atomic_write(paths["json"], json.dumps(report, indent=2) + "\n")
    if "csv" in formats and rows and "value" in rows[0]:
        paths["csv"] = os.path.join(out_dir, f"{command}.csv")
        atomic_write(paths["csv"], rows_to_csv(report["rows"]))
    return paths


# --------------------------------------------------------------------------- #
# commands
# --------------------------------------------------------------------------- #

def _setup(cfg: dict):
    model = build_model(cfg["model"])
    eng = build_engine(cfg.get("engine"))
    if eng.xbar is not None:
        model = replace(model, expansion_point=eng.xbar)
    return model, eng


def _check_finite(row: dict) -> None:
    for key in ("value", "delta", "gamma"):
        v = row.get(key)
        if v is not None and not math.isfinite(v):
            raise NumericError(f"non-finite {key} for {row['style']} K={row['K']} T={row['T']}")


def _price_rows(cfg: dict, with_mc: bool, threads: int) -> list:
    model, eng = _setup(cfg)
    opt = cfg["option"]
    styles = styles_of(opt)
    strikes = strikes_of(opt)
    sim = build_sim(cfg.get("mc"), threads) if with_mc else None
    expansion = CharFnExpansion(model, eng.order)
    plan = ConvolutionPlan(eng.N)
    rows = []
    for T, dates in schedules_of(opt):
        grid = make_grid(model, T, eng.N, eng.L)
        model.check_domain(grid.a, grid.b)
        problem_dates = dates
        if "bermudan" in styles and dates is None:
            raise ConfigError("bermudan style needs num_dates or exercise_dates")
        ens = None
        if sim is not None and {"european", "bermudan"} & set(styles):
            times = problem_dates if "bermudan" in styles else (T,)
            ens = simulate_paths(model, times, sim)
        for K in strikes:
            base = {"model": model.name, "T": T, "K": float(K), "order": eng.order}
            for style in styles:
                row = dict(base, style=style, M=None, mc_lo=None, mc_hi=None, in_ci=None)
                t0 = time.perf_counter()
                if style == "european":
                    rep = european_price(model, expansion, grid, K, T)
                    row["ms_per_date"] = 1e3 * (time.perf_counter() - t0)
                    if ens is not None:
                        row["mc_lo"], row["mc_hi"] = european_ci(model, K, T, sim, ens)
                elif style == "bermudan":
                    problem = BermudanProblem(K, T, problem_dates)
                    rep = price_bermudan(model, expansion, problem, grid, eng.terms, plan, eng.panel_width)
                    row["M"] = problem.M
                    row["ms_per_date"] = 1e3 * rep.diagnostics["seconds_per_date"]
                    row["boundary"] = list(rep.boundary)
                    if ens is not None:
                        row["mc_lo"], row["mc_hi"] = ls_bermudan_ci(model, problem, sim, ens)
                else:
                    d = opt.get("richardson_d", 1)
                    rep = price_american(model, expansion, K, T, grid, d, eng.terms)
                    row["M"] = rep.diagnostics["M"][-1]
                    row["ms_per_date"] = 1e3 * (time.perf_counter() - t0) / sum(rep.diagnostics["M"])
                    row["bermudan_ladder"] = rep.diagnostics["bermudan"]
                row.update(value=rep.value, delta=rep.delta, gamma=rep.gamma)
                if row["mc_lo"] is not None:
                    row["in_ci"] = bool(row["mc_lo"] <= rep.value <= row["mc_hi"])
                _check_finite(row)
                rows.append(row)
    return rows


def cmd_price(cfg: dict, threads: int):
    rows = _price_rows(cfg, False, threads)
    return rows, {"n_rows": len(rows)}


def cmd_validate(cfg: dict, threads: int):
    rows = _price_rows(cfg, with_mc=True, threads=threads)
    checked = [r for r in rows if r["in_ci"] is not None]
    inside = sum(r["in_ci"] for r in checked)
    return rows, {"n_rows": len(rows), "checked": len(checked), "inside_ci": inside}


def _is_constant(model) -> bool:
    return model.vol.is_constant and model.default.is_constant and model.jump_scale.is_constant


def cmd_convergence(cfg: dict, threads: int):
    model, eng = _setup(cfg)
    conv = cfg.get("convergence", {})
    orders = conv.get("orders", [0, 1, 2])
    t_grid = np.asarray(conv.get("t", [1 / 32, 1 / 16, 1 / 8, 1 / 4, 1 / 2]))
    xi = np.linspace(0.0, conv.get("xi_max", 20.0), conv.get("xi_points", 41))
    sim = build_sim(cfg.get("mc"), threads)
    if _is_constant(model):
        rows = [{"order": n, "exact": True} for n in orders]
        return rows, {"exact": True, "note": "constant coefficients: every order is exact"}
    mc = mc_char_fn_grid(model, t_grid, xi, sim, control=True, extrapolate=conv.get("extrapolate", True))
    expansion = CharFnExpansion(model, max(2, max(orders)), xbar=model.x0)
    rows = []
    for n in orders:
        res = convergence_order(model, n, xi, t_grid, sim, mc=mc, expansion=expansion)
        if not np.all(np.isfinite(res.error)):
            raise NumericError(f"non-finite error at order {n}")
        rows.append({"order": n, "exact": False, "slope": res.slope, "stderr": res.stderr,
                     "t": res.t, "error": res.error, "noise": res.noise,
                     "inconclusive": res.inconclusive})
    return rows, {"exact": False, "paths": sim.n_paths, "steps_per_year": sim.steps_per_year}


def _bumped(model, S):
    # expansion point held at the base value so only the evaluation point moves
    return replace(model, spot=S, expansion_point=model.xbar)


def cmd_greeks(cfg: dict, threads: int):
    model, eng = _setup(cfg)
    opt = cfg["option"]
    styles = [s for s in styles_of(opt) if s != "american"]
    rows = []
    for T, dates in schedules_of(opt):
        grid = make_grid(model, T, eng.N, eng.L)
        for K in strikes_of(opt):
            for style in styles:
                if style == "bermudan" and dates is None:
                    raise ConfigError("bermudan style needs num_dates or exercise_dates")

                def value(m, full=False):
                    e = CharFnExpansion(m, eng.order)
                    if style == "european":
                        rep = european_price(m, e, grid, K, T)
                    else:
                        rep = price_bermudan(m, e, BermudanProblem(K, T, dates), grid, eng.terms,
                                             panel_width=eng.panel_width)
                    return rep if full else rep.value

                base = _bumped(model, model.spot)
                rep = value(base, True)
                h = FD_BUMP * model.spot
                up, dn = value(_bumped(model, model.spot + h)), value(_bumped(model, model.spot - h))
                fd_delta = (up - dn) / (2 * h)
                fd_gamma = (up - 2 * rep.value + dn) / h**2
                row = {"model": model.name, "style": style, "T": T, "K": float(K),
                       "M": None if style == "european" else len(dates), "order": eng.order,
                       "value": rep.value, "delta": rep.delta, "gamma": rep.gamma,
                       "fd_delta": fd_delta, "fd_gamma": fd_gamma,
                       "delta_err": abs(rep.delta - fd_delta), "gamma_err": abs(rep.gamma - fd_gamma)}
                _check_finite(row)
                rows.append(row)
    worst = max((r["delta_err"] for r in rows), default=0.0)
    return rows, {"n_rows": len(rows), "max_delta_err": worst,
                  "max_gamma_err": max((r["gamma_err"] for r in rows), default=0.0)}


COMMANDS = {
    "price": cmd_price,
    "validate": cmd_validate,
    "convergence": cmd_convergence,
    "greeks": cmd_greeks,
}


# --------------------------------------------------------------------------- #
# entry point
# --------------------------------------------------------------------------- #

def _threads(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("PRICER_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"PRICER_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("PRICER_THREADS must be positive")
        return n
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levycos", description="COS pricing under local Lévy models with default")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--threads", type=int, help="Monte Carlo worker threads (default: $PRICER_THREADS or 1)")
    p.add_argument("--quiet", action="store_true", help="do not print result rows")
    return p


def _print_rows(rows: list, out) -> None:
    for r in rows:
        if "value" in r:
            ci = "" if r.get("mc_lo") is None else f"  mc [{r['mc_lo']:.6f}, {r['mc_hi']:.6f}]"
            m = "" if r.get("M") is None else f" M={r['M']}"
            print(f"{r['style']:9s} T={r['T']:g}{m} K={r['K']:g}  value={r['value']:.6f}  "
                  f"delta={r['delta']:.6f}  gamma={r['gamma']:.6f}{ci}", file=out)
        elif r.get("exact"):
            print(f"order {r['order']}: exact", file=out)
        else:
            flag = "  (inconclusive)" if r["inconclusive"] else ""
            print(f"order {r['order']}: slope {r['slope']:.3f} +/- {r['stderr']:.3f}{flag}", file=out)


def main(argv: list | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = _threads(args.threads)
        if threads < 1:
            raise ConfigError("--threads must be positive")
        cfg = load_config(args.config)
        rows, summary = COMMANDS[args.command](cfg, threads)
    except (ConfigError, ModelError, UnsupportedOrderError) as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out_dir = args.out or cfg.get("output", {}).get("dir", "results")
    paths = write_report(args.command, cfg, rows, summary, out_dir)
    if not args.quiet:
        _print_rows(rows, sys.stdout)
        for kind, path in paths.items():
            print(f"wrote {path}", file=sys.stdout)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
