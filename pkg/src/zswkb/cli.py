"""Command line front end: spectrum, wkb, compare, stokes, selftest."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import replace
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .compare import run_compare
from .config import RunConfig, load_config
from .errors import WindowCertificationFailed, ZSError
from .oracle import Rect, locate_eigenvalues
from .stokes import certify_window, trace_all
from .transition import solve_quantization_A, solve_quantization_B
from .turning_points import find_turning_points, order_real_points

log = logging.getLogger("zswkb")

SPECTRUM_FIELDS = ["h", "re", "im", "multiplicity", "trace_residual"]
PREDICTION_FIELDS = ["h", "mode", "j", "k", "stage", "lambda_re", "lambda_im", "action_value"]
PAIR_FIELDS = ["h", "stage", "j", "k", "pred_re", "pred_im", "oracle_re", "oracle_im", "distance"]
STOKES_FIELDS = ["line", "source_index", "source_re", "source_im", "arg", "termination",
                 "point", "re", "im"]


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_finite(data), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, fields, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r[k]) for k in fields})


def _out(cfg: RunConfig, args) -> Path:
    d = Path(args.out or cfg.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _window_rect(cfg: RunConfig) -> Rect:
    c, r, t = cfg.center, cfg.radius, cfg.transverse
    if cfg.mode == "A":
        return Rect(c.real - r, c.real + r, c.imag - t, c.imag + t)
    return Rect(-t, t, c.imag - r, c.imag + r)


def _certify(cfg: RunConfig):
    if cfg.potential.is_zero:
        return {"ok": True, "mode": cfg.mode, "bounded_lines": [], "violations": []}
    cert = certify_window(cfg.potential, cfg.center, mode=cfg.mode)
    if not cert.ok:
        raise WindowCertificationFailed("; ".join(cert.violations))
    return cert.record()


def _pmap(cfg, fn, items):
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, items))


def cmd_spectrum(cfg: RunConfig, args) -> int:
    out = _out(cfg, args)
    rect = _window_rect(cfg)
    hs = [args.h] if args.h else list(cfg.h_ladder)
    per_h = _pmap(cfg, lambda h: locate_eigenvalues(cfg.potential, h, rect), hs)
    rows = [r.record() for recs in per_h for r in recs]
    write_csv(out / f"{cfg.prefix}_spectrum.csv", SPECTRUM_FIELDS, rows)
    print(f"{len(rows)} eigenvalues in {rect} over h = {hs}")
    return 0


def cmd_wkb(cfg: RunConfig, args) -> int:
    out = _out(cfg, args)
    cert = _certify(cfg)
    c, r = cfg.center, cfg.radius
    hs = [args.h] if args.h else list(cfg.h_ladder)

    def solve(h):
        if cfg.mode == "A":
            return solve_quantization_A(cfg.potential, c - r, c + r, h, cfg.k_range,
                                        cfg.newton_tol, quad_tol=cfg.quad_tol)
        return solve_quantization_B(cfg.potential, c.imag - r, c.imag + r, h, cfg.k_range,
                                    cfg.stage2, cfg.newton_tol, quad_tol=cfg.quad_tol)

    results = _pmap(cfg, solve, hs)
    rows, failures = [], []
    for h, res in zip(hs, results):
        for p in res.predictions:
            if cfg.j_range and p.j is not None and not cfg.j_range[0] <= p.j <= cfg.j_range[1]:
                continue
            rows.append({"h": h, **p.record()})
        failures += [{"h": h, **f} for f in res.failures]
    write_csv(out / f"{cfg.prefix}_predictions.csv", PREDICTION_FIELDS, rows)
    write_json(out / f"{cfg.prefix}_predictions.json",
               {"certification": cert, "failures": failures, "count": len(rows)})
    print(f"{len(rows)} predictions, {len(failures)} solver failures")
    return 0


def cmd_compare(cfg: RunConfig, args) -> int:
    out = _out(cfg, args)
    rep = run_compare(cfg)
    data = rep.record()
    data["config"] = cfg.to_dict()
    write_json(out / f"{cfg.prefix}_report.json", data)
    write_csv(out / f"{cfg.prefix}_pairs.csv", PAIR_FIELDS, [p.record() for p in rep.pairs])
    table = rep.table()
    (out / f"{cfg.prefix}_report.txt").write_text(table + "\n")
    print(table)
    return 0


def _indexed(V, lam, tps):
    """Circle indices 1..2l on the real points when lam is imaginary and
    they can be ordered; every other point is numbered after them."""
    real, rest = [], list(tps)
    if lam.real == 0 and lam.imag != 0:
        near = [tp for tp in tps if tp.is_real]
        try:
            real = order_real_points(V, lam.imag, near)
            rest = [tp for tp in tps if not tp.is_real]
        except ZSError:
            real = []
    n = len(real)
    return real + [replace(tp, index=n + i + 1) for i, tp in enumerate(rest)]


def cmd_stokes(cfg: RunConfig, args) -> int:
    out = _out(cfg, args)
    V, lam = cfg.potential, complex(args.lam) if args.lam else cfg.center
    cert = certify_window(V, lam)
    tps = _indexed(V, lam, find_turning_points(V, lam))
    lines = trace_all(V, lam, tps)
    rows = []
    for i, ln in enumerate(lines):
        src = ln.polyline[0]
        for k, z in enumerate(ln.polyline):
            rows.append({"line": i, "source_index": ln.source_index, "source_re": src.real,
                         "source_im": src.imag, "arg": ln.initial_argument,
                         "termination": str(ln.termination), "point": k,
                         "re": z.real, "im": z.imag})
    write_csv(out / f"{cfg.prefix}_stokes_points.csv", STOKES_FIELDS, rows)
    write_json(out / f"{cfg.prefix}_stokes.json", {
        "lambda": [lam.real, lam.imag],
        "turning_points": [tp.record() for tp in tps],
        "lines": [ln.record() for ln in lines],
        "certification": cert.record(),
    })
    print(f"{len(lines)} Stokes lines from {len(tps)} turning points; "
          f"certification {'ok' if cert.ok else 'FAILED'}")
    for v in cert.violations:
        print(f"  {v}")
    return 0 if cert.ok else 3


def cmd_selftest(cfg: RunConfig, args) -> int:
    from .selftest import mutated_e_table, selftest
    from .oracle import TRACE_TOL
    table = mutated_e_table() if args.mutate_e2 else None
    tol = TRACE_TOL / args.tighten
    summary = selftest(cfg.seed, e_table=table, integrator_tol=tol)
    for line in summary.lines():
        print(line)
    if args.out:
        write_json(_out(cfg, args) / f"{cfg.prefix}_selftest.json", summary.record())
    print("selftest", "passed" if summary.ok else "FAILED")
    return 0 if summary.ok else 4


COMMANDS = {"spectrum": cmd_spectrum, "wkb": cmd_wkb, "compare": cmd_compare,
            "stokes": cmd_stokes, "selftest": cmd_selftest}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=int, help="seed for randomized suites")
    common.add_argument("--threads", type=int, help="worker threads for per-h work")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="zswkb", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("spectrum", parents=[common], help="oracle eigenvalues in the window")
    s.add_argument("--h", type=float, help="single h instead of the ladder")
    s = sub.add_parser("wkb", parents=[common], help="quantization-condition predictions")
    s.add_argument("--h", type=float, help="single h instead of the ladder")
    sub.add_parser("compare", parents=[common], help="predictions vs oracle over the h ladder")
    s = sub.add_parser("stokes", parents=[common], help="Stokes geometry at the window center")
    s.add_argument("--lam", help="spectral parameter, e.g. 0.5j (default: window center)")
    s = sub.add_parser("selftest", parents=[common], help="per-module invariant suites")
    s.add_argument("--mutate-e2", action="store_true", help="perturb E_2 (must fail)")
    s.add_argument("--tighten", type=float, default=1.0,
                   help="divide the integrator tolerance by this factor")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        cfg.validate()
        return COMMANDS[args.command](cfg, args)
    except ZSError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, ArithmeticError) as exc:
        log.debug("numerical failure", exc_info=True)
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
