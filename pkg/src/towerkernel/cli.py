"""Command-line front end: kernel, green, tower, tau, enumerate, effective, selftest."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ConfigError, ExperimentConfig, fmt17, load_config
from .groups import (
    ResourceCapError,
    enumerate_ball,
    identity_only,
    injectivity_radius,
    level_predicate,
    whole_group,
)
from .hyperbolic import MODELS, ModelPoint
from .kernels import DivergenceWarning, SingularityError, green_series, quotient_kernel_series
from .tower import EffectiveInputs, LOG3, effective_bound_rhs, run_tower_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CAP = 4

REPORT_FIELDS = ["j", "index", "tau_j_at_basepoint", "tau_certified", "sup_grid_error", "ej_bound",
                 "hyp_norm_deviation", "terms_used", "tail", "additivity_residual"]


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _complex_arg(text: str) -> complex:
    try:
        re_s, im_s = text.split(",")
        return complex(float(re_s), float(im_s))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RE,IM but got {text!r}") from None


def _tau_arg(text: str) -> float:
    t = text.strip().replace(" ", "")
    if t.startswith("log"):
        arg = t[3:].strip("()")
        return math.log(float(arg))
    return float(t)


def _config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required")
    cfg = load_config(args.config)
    if args.max_word_length is not None:
        cfg.series = replace(cfg.series, max_len=args.max_word_length)
    if getattr(args, "tol", None) is not None:
        cfg.series = replace(cfg.series, tol=args.tol)
    g = cfg.group
    if not cfg.bundled and (g.asserted_free_discrete or g.asserted_convergence_type):
        print("WARNING: freeness, discreteness and convergence type are asserted by this "
              "config and are not verified", file=sys.stderr)
    return cfg


def _point(cfg: ExperimentConfig, value: complex, model: str | None) -> ModelPoint:
    try:
        return ModelPoint(value, model or cfg.group.model)
    except ValueError as exc:
        raise CliError(EXIT_NUMERIC, "invalid_point", str(exc)) from None


def _predicate(cfg: ExperimentConfig, level: int | None):
    if level is not None:
        if cfg.tower is None:
            raise ConfigError("--level needs a [tower] section")
        return level_predicate(cfg.tower, level)
    return identity_only() if cfg.subgroup == "identity" or cfg.group.rank == 0 else whole_group()


def _header(cfg: ExperimentConfig, **extra) -> list[str]:
    s = cfg.series
    meta = {"config_sha256": cfg.sha256, "max_len": s.max_len, "policy": s.closure_policy,
            "tol": fmt17(s.tol)}
    meta.update(extra)
    return [f"# {k}={v}" for k, v in meta.items()]


def cmd_kernel(args) -> int:
    cfg = _config(args)
    z, w = _point(cfg, args.z, args.model), _point(cfg, args.w, args.model)
    kv = quotient_kernel_series(cfg.group, _predicate(cfg, args.level), z, w, cfg.series)
    print("\n".join(_header(cfg, terms_used=kv.truncation["terms_used"])))
    print(f"# Q(z,w) ~ {kv.value.real:.6g} {kv.value.imag:+.6g}i  (tail {kv.tail_estimate:.6g})")
    print(f"value_re={fmt17(kv.value.real)}")
    print(f"value_im={fmt17(kv.value.imag)}")
    print(f"tail_estimate={fmt17(kv.tail_estimate)}")
    print(f"terms_used={kv.truncation['terms_used']}")
    return EXIT_OK


def cmd_green(args) -> int:
    cfg = _config(args)
    z, w = _point(cfg, args.z, args.model), _point(cfg, args.w, args.model)
    gv = green_series(cfg.group, _predicate(cfg, args.level), z, w, cfg.series)
    print("\n".join(_header(cfg, terms_used=gv.terms_used)))
    print(f"# g(z,w) ~ {gv.value:.6g}  (tail {gv.tail_estimate:.6g})")
    print(f"value={fmt17(gv.value)}")
    print(f"tail_estimate={fmt17(gv.tail_estimate)}")
    print(f"tail_certified={str(gv.tail_certified).lower()}")
    print(f"terms_used={gv.terms_used}")
    return EXIT_OK


def report_csv(report, header_lines) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_FIELDS)
    for row in report.as_dicts():
        writer.writerow([str(row[f]).lower() if isinstance(row[f], bool) else fmt17(row[f])
                         for f in REPORT_FIELDS])
    return buf.getvalue()


def report_records(report, meta: dict) -> str:
    lines = [json.dumps({"record": "metadata", **meta}, sort_keys=True)]
    for row in report.as_dicts():
        rec = {k: (v if isinstance(v, (bool, int)) else fmt17(v)) for k, v in row.items()}
        rec["record"] = "level"
        lines.append(json.dumps(rec, sort_keys=True))
    return "\n".join(lines) + "\n"


def cmd_tower(args) -> int:
    cfg = _config(args)
    if cfg.tower is None:
        raise ConfigError(f"{cfg.path}: missing [tower] section")
    report = run_tower_report(cfg.group, cfg.tower, cfg.series, cfg.grid, cfg.basepoint,
                              {"config_sha256": cfg.sha256})
    meta = dict(report.metadata)
    header = [f"# {k}={v}" for k, v in sorted(meta.items())]
    outputs = list(cfg.outputs)
    if args.out is not None:
        outputs = [(args.format or "csv", Path(args.out))]
    if not outputs:
        sys.stdout.write(report_csv(report, header))
    for fmt, path in outputs:
        text = report_csv(report, header) if fmt == "csv" else report_records(report, meta)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        print(f"# wrote {fmt} report to {path}", file=sys.stderr)
    for row in report.rows:
        print(f"# j={row.j} index={row.index} tau={row.tau_j_at_basepoint:.6g} "
              f"sup_err={row.sup_grid_error:.6g} bound={row.ej_bound:.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_tau(args) -> int:
    cfg = _config(args)
    x = _point(cfg, args.z if args.z is not None else cfg.basepoint.coordinate,
               args.model or (None if args.z is not None else cfg.basepoint.model))
    pred = _predicate(cfg, args.level)
    L = cfg.series.max_len
    if L < 1:
        raise ConfigError("tau needs max_len >= 1")
    tau, certified = injectivity_radius(cfg.group, pred, x, L)
    print(f"# tau ~ {tau:.6g} ({'certified' if certified else 'heuristic upper bound'})")
    print(f"tau={fmt17(tau)}")
    print(f"certified={str(certified).lower()}")
    return EXIT_OK


def cmd_enumerate(args) -> int:
    cfg = _config(args)
    ball = enumerate_ball(cfg.group, cfg.series.max_len, cfg.series.element_cap)
    print(f"count={len(ball)}")
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["word", "length", "displacement"])
            for i in range(len(ball)):
                writer.writerow([str(ball.word(i)), int(ball.lengths[i]),
                                 fmt17(ball.displacement[i])])
    return EXIT_OK


def cmd_effective(args) -> int:
    if args.genus is None or args.tau is None:
        raise ConfigError("effective needs --genus and --tau")
    try:
        inputs = EffectiveInputs(args.genus, args.tau)
        value = effective_bound_rhs(inputs)
    except ValueError as exc:
        raise CliError(EXIT_NUMERIC, "invalid_input", str(exc)) from None
    print(f"# rhs ~ {value:.6g}; valid for compact genus-{args.genus} towers with "
          f"injectivity radius tau >= log 3 = {LOG3:.6g} (formula evaluator only)")
    print(f"rhs={fmt17(value)}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="towerkernel", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, points=True):
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--max-word-length", type=int, metavar="N")
        p.add_argument("--tol", type=float, metavar="X")
        if points:
            p.add_argument("--z", type=_complex_arg, metavar="RE,IM")
            p.add_argument("--w", type=_complex_arg, metavar="RE,IM")
            p.add_argument("--model", choices=MODELS,
                           help="model of --z/--w (defaults to the group's model)")
            p.add_argument("--level", type=int, help="sum over tower level j instead of the group")

    for name, fn in (("kernel", cmd_kernel), ("green", cmd_green), ("tau", cmd_tau)):
        p = sub.add_parser(name)
        common(p)
        p.set_defaults(func=fn)
    p = sub.add_parser("tower")
    common(p, points=False)
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=["csv", "record"])
    p.set_defaults(func=cmd_tower)
    p = sub.add_parser("enumerate")
    common(p, points=False)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_enumerate)
    p = sub.add_parser("effective")
    p.add_argument("--genus", type=int)
    p.add_argument("--tau", type=_tau_arg, help="float, or log<N> such as log3")
    p.set_defaults(func=cmd_effective)
    p = sub.add_parser("selftest")
    p.set_defaults(func=cmd_selftest)
    return parser


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "exit_code": code, "message": message}, sort_keys=True),
          file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    for needed in ("z", "w"):
        if args.command in ("kernel", "green") and getattr(args, needed) is None:
            return _fail(EXIT_CONFIG, "usage", f"--{needed} is required")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", DivergenceWarning)
            return args.func(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except ResourceCapError as exc:
        return _fail(EXIT_CAP, "resource_cap", str(exc))
    except SingularityError as exc:
        return _fail(EXIT_NUMERIC, "singularity", str(exc))
    except CliError as exc:
        return _fail(exc.code, exc.kind, str(exc))
    except (ArithmeticError, ValueError) as exc:
        return _fail(EXIT_NUMERIC, "numeric", str(exc))


if __name__ == "__main__":
    sys.exit(main())
