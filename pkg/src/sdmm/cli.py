"""Command-line front end.

Exit codes: 0 success, 2 invalid parameters, 3 enumeration budget refused.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import analysis, capacity, schemes
from .capacity import CapacityError
from .field import FieldError
from .sharing import ConfigError, SdmmConfig, SecretBatch

EXIT_OK, EXIT_INVALID, EXIT_BUDGET = 0, 2, 3

PARAM_KEYS = ("l", "k", "m", "n", "x", "x_a", "x_b", "s", "q", "version", "scheme", "seed", "flags")
INT_KEYS = {"l", "k", "m", "n", "x", "x_a", "x_b", "s", "q", "seed"}


class UsageError(ValueError):
    pass


def fmt_value(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}" if v.denominator != 1 else str(v.numerator)
    if isinstance(v, float):
        return f"{v:.12g}"
    if v is None:
        return ""
    return str(v)


def decimal(v) -> str:
    if isinstance(v, (Fraction, float, int)) and not isinstance(v, bool):
        return f"{float(v):.6f}"
    return ""


def emit(header: Sequence[str], rows: Sequence[Sequence], fmt: str, out) -> None:
    """Write rows as CSV or an aligned table; every numeric cell gets a
    companion decimal column named ``<col>_decimal`` in CSV."""
    numeric = [i for i, _ in enumerate(header)
               if any(isinstance(r[i], (Fraction, float)) for r in rows)]
    full_header = list(header) + [f"{header[i]}_decimal" for i in numeric]
    body = [[fmt_value(c) for c in r] + [decimal(r[i]) for i in numeric] for r in rows]
    if fmt == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(full_header)
        w.writerows(body)
        return
    widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(full_header)]
    out.write("  ".join(h.ljust(w) for h, w in zip(full_header, widths)).rstrip() + "\n")
    for b in body:
        out.write("  ".join(c.ljust(w) for c, w in zip(b, widths)).rstrip() + "\n")


def read_config_file(path: str) -> dict[str, str]:
    """Plain ``key=value`` lines; blank lines and ``#`` comments skipped."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (p.strip() for p in line.split("=", 1))
            key = key.lower().replace("-", "_")
            if key not in PARAM_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out


def resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge defaults < config file < explicit flags."""
    params = dict(defaults)
    if getattr(args, "config", None):
        for key, value in read_config_file(args.config).items():
            params[key] = int(value) if key in INT_KEYS else value
    for key in PARAM_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    if params.get("seed") is None:
        env = os.environ.get("SDMM_SEED")
        try:
            params["seed"] = int(env) if env is not None else 0
        except ValueError:
            raise UsageError(f"SDMM_SEED must be an integer, got {env!r}") from None
    return params


BASE_DEFAULTS = {"l": 1, "k": 1, "m": 1, "n": 2, "x": 1, "q": 11, "version": "AB_phi", "scheme": "csa",
                 "flags": ""}


def build_config(p: dict) -> SdmmConfig:
    version = p["version"]
    x = p["x"]
    x_a = p.get("x_a")
    x_b = p.get("x_b")
    cfg = SdmmConfig.for_scheme(p["scheme"], version, p["l"], p["k"], p["m"], p["n"], x, p["q"], x_a, x_b)
    if p.get("s") is not None and p["s"] != cfg.S:
        cfg = SdmmConfig(cfg.L, cfg.K, cfg.M, cfg.N, cfg.X_A, cfg.X_B, p["s"], cfg.q, version)
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def cmd_capacity(p: dict, out, fmt: str) -> int:
    flags = [f for f in str(p.get("flags") or "").split(",") if f.strip()]
    res = capacity.sdmm_capacity(p["version"], p["l"], p["k"], p["m"], p["n"], p["x"], flags)
    emit(("version", "L", "K", "M", "N", "X", "case", "status", "value", "assumptions"),
         [(p["version"], p["l"], p["k"], p["m"], p["n"], p["x"], res.regime, res.status, res.value,
           "|".join(res.assumptions))], fmt, out)
    return EXIT_OK


def _scalar_exhaustive(cfg: SdmmConfig, seed: int) -> tuple[int, int]:
    q = cfg.q
    good = total = 0
    for a in range(q):
        for b in range(q):
            batch = SecretBatch.from_lists(cfg.field, [[[a]]] * cfg.S, [[[b]]] * cfg.S)
            res = schemes.scalar_mul_session(cfg, batch, seed)
            total += 1
            good += all(int(m[0, 0]) == a * b % q for m in res.products)
    return good, total


def cmd_simulate(p: dict, out, fmt: str, exhaustive: bool = False, transcript: bool = False) -> int:
    cfg = build_config(p)
    seed = p["seed"]
    if exhaustive:
        if p["scheme"] != "scalar":
            raise UsageError("--exhaustive applies to the scalar scheme")
        good, total = _scalar_exhaustive(cfg, seed)
        emit(("scheme", "q", "N", "X", "correct", "pairs"), [("scalar", cfg.q, cfg.N, cfg.X, good, total)], fmt, out)
        return EXIT_OK if good == total else 1
    batch = SecretBatch.random(cfg, seed)
    res = schemes.run_session(p["scheme"], cfg, batch, seed)
    if p["scheme"] == "hadamard":
        oracle = [a * b % cfg.q for a, b in zip(batch.a_mats, batch.b_mats)]
    else:
        oracle = batch.products(cfg.field)
    ok = all(np.array_equal(x, y) for x, y in zip(res.products, oracle))
    rows = [(p["scheme"], cfg.version, cfg.L, cfg.K, cfg.M, cfg.N, cfg.X_A, cfg.X_B, cfg.S, cfg.q, seed,
             "OK" if ok else "FAIL", res.ledger.total, res.achieved_rate)]
    emit(("scheme", "version", "L", "K", "M", "N", "X_A", "X_B", "S", "q", "seed", "correctness", "download",
          "rate"), rows, fmt, out)
    if transcript:
        recs = res.transcript_records()
        emit(("server", "scheme", "symbols", "charged", "wire", "payload"),
             [(r["server"], r["scheme"], r["symbols"], r["charged"], r["wire"], r["payload"]) for r in recs], fmt, out)
    return EXIT_OK if ok else 1


def cmd_audit(p: dict, out, fmt: str, subset: Optional[int]) -> int:
    cfg = analysis.audit_config(p["scheme"], p["n"], p["x"], p["q"], L=p["l"], K=p["k"], M=p["m"], S=p.get("s"))
    size = subset if subset is not None else p["x"]
    rep = analysis.audit_collusion(p["scheme"], cfg, size)
    rows = [(p["scheme"], cfg.N, cfg.X_A, cfg.S, cfg.q, " ".join(map(str, s.servers)), s.mi_a, s.mi_b, s.mi_joint)
            for s in rep.subsets]
    rows.append((p["scheme"], cfg.N, cfg.X_A, cfg.S, cfg.q, "max", rep.max_mi, "", "pass" if rep.passed else "fail"))
    emit(("scheme", "N", "X", "S", "q", "servers", "mi_A", "mi_B", "mi_joint"), rows, fmt, out)
    return EXIT_OK


def cmd_entropy(p: dict, out, fmt: str, mode: str, budget: int) -> int:
    rep = analysis.measure_product_entropy(p["l"], p["k"], p["m"], p["q"], mode=mode, budget=budget, seed=p["seed"])
    rows = [(rep.L, rep.K, rep.M, rep.q, mode, "H(AB)", rep.entropy, Fraction(rep.formula), rep.gap, rep.samples)]
    if rep.entropy_given_a is not None:
        rows.append((rep.L, rep.K, rep.M, rep.q, mode, "H(AB|A)", rep.entropy_given_a,
                     Fraction(rep.formula_given_a), abs(rep.formula_given_a - rep.entropy_given_a), rep.samples))
        rows.append((rep.L, rep.K, rep.M, rep.q, mode, "H(AB|B)", rep.entropy_given_b,
                     Fraction(rep.formula_given_b), abs(rep.formula_given_b - rep.entropy_given_b), rep.samples))
    emit(("L", "K", "M", "q", "mode", "metric", "value", "formula", "gap", "samples"), rows, fmt, out)
    return EXIT_OK


def _int_list(text: Optional[str], default: tuple[int, ...]) -> tuple[int, ...]:
    if not text:
        return default
    return tuple(int(v) for v in text.split(","))


def cmd_sweep(p: dict, out, fmt: str, args) -> int:
    grid = analysis.SweepGrid(
        versions=tuple(args.versions.split(",")) if args.versions else analysis.SweepGrid.versions,
        schemes=tuple(args.schemes.split(",")) if args.schemes else analysis.SweepGrid.schemes,
        dims=_int_list(args.dims, analysis.SweepGrid.dims),
        servers=_int_list(args.servers, analysis.SweepGrid.servers),
        collusion=_int_list(args.collusion, analysis.SweepGrid.collusion),
        q=args.q if args.q is not None else analysis.SweepGrid.q,
        seed=p["seed"],
    )
    rows = analysis.sweep_rate_vs_capacity(grid)
    emit(analysis.SWEEP_HEADER, analysis.sweep_csv_rows(rows), fmt, out)
    return EXIT_OK


def cmd_pir_demo(p: dict, out, fmt: str, want: str) -> int:
    desired = [int(v) for v in want.split(",")]
    p = dict(p)
    p["m"] = len(desired)
    if p["k"] < len(desired) and p.get("k_explicit") is None:
        p["k"] = max(desired)
    cfg = build_config(p)
    res = schemes.pir_reduction_demo(cfg, desired, p["seed"], scheme=p["scheme"])
    rows = []
    for s, (got, exp) in enumerate(zip(res.retrieved, res.expected)):
        for c, k in enumerate(desired):
            rows.append((s + 1, k, " ".join(map(str, got[:, c].tolist())), " ".join(map(str, exp[:, c].tolist())),
                         np.array_equal(got[:, c], exp[:, c]), res.ledger.total, res.generic_ledger.total))
    emit(("batch", "message", "retrieved", "source", "equal", "download", "generic_download"), rows, fmt, out)
    return EXIT_OK if res.correct and res.ledger_unchanged else 1


# ---------------------------------------------------------------------------
# argument parsing


def _add_params(sp: argparse.ArgumentParser, scheme_choices=None) -> None:
    for key in ("l", "k", "m", "n", "x", "q", "s", "seed"):
        sp.add_argument(f"--{key}", type=int, default=None)
    sp.add_argument("--x-a", dest="x_a", type=int, default=None)
    sp.add_argument("--x-b", dest="x_b", type=int, default=None)
    sp.add_argument("--version", default=None)
    sp.add_argument("--scheme", default=None, choices=scheme_choices)
    sp.add_argument("--config", default=None, help="file of key=value lines, overridden by flags")
    sp.add_argument("--out", default=None, help="write output here instead of stdout")
    sp.add_argument("--format", default="csv", choices=("csv", "table"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdmm", description="Secure distributed matrix multiplication toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("capacity", help="capacity value or bound for one version")
    _add_params(sp)
    sp.add_argument("--flags", default=None,
                    help="comma-separated limit regimes, e.g. k_over_min_lm, max_lm_over_k, k_over_m")

    sp = sub.add_parser("simulate", help="run one session and check it against direct multiplication")
    _add_params(sp, sorted(schemes.SESSIONS))
    sp.add_argument("--exhaustive", action="store_true", help="scalar scheme: try every (a, b) pair")
    sp.add_argument("--transcript", action="store_true", help="also print per-server answer records")

    sp = sub.add_parser("audit", help="exhaustive collusion audit")
    _add_params(sp, ["general", "csa"])
    sp.add_argument("--subset", type=int, default=None, help="colluding set size (default X)")

    sp = sub.add_parser("entropy", help="measure the entropy of a random matrix product")
    _add_params(sp)
    sp.add_argument("--mode", default="exhaustive", choices=("exhaustive", "sampled"))
    sp.add_argument("--budget", type=int, default=analysis.ENUMERATION_BUDGET)

    sp = sub.add_parser("sweep", help="achieved rate versus capacity over a grid")
    _add_params(sp)
    sp.add_argument("--versions", default=None)
    sp.add_argument("--schemes", default=None)
    sp.add_argument("--dims", default=None, help="values for each of L, K, M")
    sp.add_argument("--servers", default=None)
    sp.add_argument("--collusion", default=None)

    sp = sub.add_parser("pir-demo", help="retrieve columns of A through an SDMM session")
    _add_params(sp, ["general", "csa"])
    sp.add_argument("--want", default="1", help="comma-separated 1-based column indices")
    return parser


def _defaults_for(command: str) -> dict:
    d = dict(BASE_DEFAULTS)
    if command == "audit":
        d.update(n=2, q=3, scheme="general")
    elif command == "entropy":
        d.update(q=5)
    elif command == "pir-demo":
        d.update(n=4, l=2, k=3, q=11)
    return d


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    buf = io.StringIO()
    try:
        p = resolve(args, _defaults_for(args.command))
        if args.command == "pir-demo" and args.k is not None:
            p["k_explicit"] = True
        if args.command == "capacity":
            code = cmd_capacity(p, buf, args.format)
        elif args.command == "simulate":
            code = cmd_simulate(p, buf, args.format, args.exhaustive, args.transcript)
        elif args.command == "audit":
            code = cmd_audit(p, buf, args.format, args.subset)
        elif args.command == "entropy":
            code = cmd_entropy(p, buf, args.format, args.mode, args.budget)
        elif args.command == "sweep":
            code = cmd_sweep(p, buf, args.format, args)
        else:
            code = cmd_pir_demo(p, buf, args.format, args.want)
    except analysis.BudgetExceeded as exc:
        stderr.write(f"refused: {exc}\n")
        return EXIT_BUDGET
    except (ConfigError, CapacityError, FieldError, UsageError, OSError, ValueError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    text = buf.getvalue()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
