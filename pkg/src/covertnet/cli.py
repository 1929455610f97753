"""Command-line entry point: simulate, sweep, bound, regime and verify."""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
import warnings
from dataclasses import replace
from typing import Any, Sequence

from .bounds import classify_regime, converse_power_cap, cutset_bound, necessary_inr
from .errors import BoundViolation, ConfigurationError, CovertnessViolation, CovertNetError
from .harness import SweepSpec, run_sweep, to_csv, to_json, verify_invariants
from .netgen import NetworkConfig
from .schemes import SCHEMES, RegimeWarning

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # Usage errors are configuration errors, not violations.
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=float, nargs="+", default=None, help="legitimate-node density (one or more)")
    p.add_argument("--kappa", type=float, nargs="+", default=None)
    p.add_argument("--alpha", type=float, nargs="+", default=None)
    p.add_argument("--delta", type=float, nargs="+", default=None)
    p.add_argument("--l", type=float, default=None, help="fixed observation window")
    p.add_argument("--l-beta", type=float, default=None, help="window law l = n**beta")
    p.add_argument("--gamma", type=float, default=None, help="preservation exponent (default kappa/2)")
    p.add_argument("--c-b", type=float, default=None, help="preservation width constant")
    p.add_argument("--scheme", choices=(*SCHEMES, "all"), default="all")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="covertnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sim = sub.add_parser("simulate", help="run schemes on sampled instances of one grid of configs")
    _common(sim)
    sw = sub.add_parser("sweep", help="run a sweep spec file; flags override its fields")
    sw.add_argument("spec", help="JSON sweep spec")
    _common(sw)
    bd = sub.add_parser("bound", help="cutset bound and necessary INR")
    _common(bd)
    rg = sub.add_parser("regime", help="regime classification table")
    _common(rg)
    vf = sub.add_parser("verify", help="run the invariant self-checks")
    _common(vf)
    return parser


def _spec_from_args(args: argparse.Namespace, base: SweepSpec | None = None) -> SweepSpec:
    spec = base or SweepSpec(n_values=(4096.0,), trials=1)
    over: dict[str, Any] = {}
    for flag, name in (("n", "n_values"), ("kappa", "kappas"), ("alpha", "alphas"), ("delta", "deltas")):
        v = getattr(args, flag)
        if v is not None:
            over[name] = tuple(v)
    if args.gamma is not None:
        over["gammas"] = (args.gamma,)
    if args.l is not None:
        over["l"], over["l_beta"] = args.l, None
    if args.l_beta is not None:
        over["l_beta"], over["l"] = args.l_beta, None
    if args.scheme != "all":
        over["schemes"] = (args.scheme,)
    for flag in ("trials", "seed", "c_b"):
        v = getattr(args, flag)
        if v is not None:
            over[flag] = v
    if args.out is not None:
        over["out"] = args.out
    return replace(spec, **over)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _table(rows: list[dict[str, Any]], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True) + "\n"
    keys = list(rows[0]) if rows else []
    lines = [",".join(keys)] + [",".join(str(r[k]) for k in keys) for r in rows]
    return "\n".join(lines) + "\n"


def _configs(spec: SweepSpec) -> list[NetworkConfig]:
    return spec.configs()


def cmd_run(args: argparse.Namespace, base: SweepSpec | None = None) -> int:
    spec = _spec_from_args(args, base)
    rows = run_sweep(spec, jobs=args.jobs)
    _emit(to_json(rows, spec) if args.format == "json" else to_csv(rows), spec.out)
    return EXIT_OK


def cmd_bound(args: argparse.Namespace) -> int:
    rows = []
    for cfg in _configs(_spec_from_args(args)):
        cb = cutset_bound(cfg)
        rows.append({
            "n": cfg.n, "kappa": cfg.kappa, "alpha": cfg.alpha, "delta": cfg.delta, "l": cfg.window,
            "necessary_inr": necessary_inr(cfg.delta, cfg.window),
            "p_cb": converse_power_cap(cfg), **{k: v for k, v in cb.to_dict().items() if k != "p_cb"},
        })
    _emit(_table(rows, args.format), args.out)
    return EXIT_OK


def cmd_regime(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args)
    rows = []
    for kappa, alpha in itertools.product(spec.kappas, spec.alphas):
        cfg = NetworkConfig(n=spec.n_values[-1], kappa=kappa, alpha=alpha,
                            l=spec.l if spec.l is not None else 1.0, l_beta=spec.l_beta)
        r = classify_regime(cfg)
        rows.append({"kappa": kappa, "alpha": alpha, "l_beta": spec.l_beta if spec.l is None else 0.0,
                     "regime": r.label, "scheme": r.scheme, "exponent": r.exponent,
                     "snr_exponent": r.snr_exponent})
    _emit(_table(rows, args.format), args.out)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    spec = _spec_from_args(args, SweepSpec(n_values=(1024.0,), trials=2, c_b=0.01))
    failed = 0
    for cfg in _configs(spec):
        # every scheme is checked at every config, in regime or not
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            checks = verify_invariants(cfg, trials=spec.trials)
        for c in checks:
            failed += not c.ok
            print(f"{'PASS' if c.ok else 'FAIL'} n={cfg.n:g} kappa={cfg.kappa} alpha={cfg.alpha} {c.name} {c.detail}")
    print(f"{failed} failed")
    return EXIT_OK if failed == 0 else EXIT_VIOLATION


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("COVERTNET_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_run(args, SweepSpec.load(args.spec))
        if args.command == "bound":
            return cmd_bound(args)
        if args.command == "regime":
            return cmd_regime(args)
        return cmd_verify(args)
    except (CovertnessViolation, BoundViolation) as exc:
        print(f"covertnet: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (ConfigurationError, CovertNetError) as exc:
        print(f"covertnet: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
