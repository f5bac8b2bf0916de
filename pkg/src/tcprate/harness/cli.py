"""TCP send-rate model and NewReno simulator under random packet loss.

Exit status: 0 success, 1 usage or input error, 2 validation criteria not met.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from .. import __version__
from ..analytic_laws import SaturatedPathError, SideConditionError, linear_law, sqrt_law
from ..core_path import TABLE1, ValidationError, check_probability, classify_regime
from ..full_model import TABLE4_COLUMNS, assemble
from ..simulator import LOSS_EVENT_COLUMNS, run_simulation
from ..window_dist import solve_window_distribution
from .config import (
    DEFAULT_P_GRID,
    SweepSpec,
    default_out_dir,
    load_setting,
    sweep_from_ini,
)
from .sweep import QUICK_PACKETS, run_sweep

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CRITERIA = 2

DEFAULT_EPSILON = 0.01


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_p(text: str) -> float:
    """A probability given as a fraction (``0.01``) or a percentage (``1%``)."""
    t = text.strip()
    try:
        value = float(t[:-1]) / 100 if t.endswith("%") else float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a probability: {text!r}") from None
    return value


def parse_p_list(text: str) -> tuple[float, ...]:
    return tuple(parse_p(x) for x in text.split(",") if x.strip())


def _writer(out):
    return csv.writer(out, lineterminator="\n")


def _fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return str(x)
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _emit(args, name: str, text: str) -> None:
    sys.stdout.write(text)
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text)


class _Buffer:
    def __init__(self):
        self.parts = []

    def write(self, s):
        self.parts.append(s)

    def text(self):
        return "".join(self.parts)


# -- subcommands -----------------------------------------------------------


def cmd_model(args) -> int:
    setting = load_setting(args.setting)
    path, p = setting.path, check_probability(args.p)
    buf = _Buffer()
    w = _writer(buf)
    w.writerow(["# model", path.label(), f"p={p:g}"])
    calc = assemble(path, setting.tcp, p)
    w.writerow(["row", *TABLE4_COLUMNS])
    w.writerow(["calc", *(f"{v:.3f}" for v in calc.table4_values())])

    w.writerow(["law", "w_eff", "SR(kbps)", "valid", "validity_bound"])
    for fn in (sqrt_law, linear_law):
        try:
            r = fn(path, p)
            w.writerow(
                [r.law.value, _fmt(r.w_eff), _fmt(r.send_rate / 1e3), r.valid,
                 _fmt(r.validity_bound)]
            )  # fmt: skip
        except (SaturatedPathError, SideConditionError) as exc:
            w.writerow([fn.__name__, "", "", False, f"not applicable: {exc}"])

    reg = classify_regime(path, p)
    w.writerow(["regime", "p_min", "p_max", "p_max_saturated", "law"])
    w.writerow(
        [reg.kind.value, _fmt(reg.p_min), _fmt(reg.p_max), _fmt(reg.p_max_saturated),
         reg.applicable_law or ""]
    )  # fmt: skip
    _emit(args, f"model_{path.label()}_p{p:g}.csv", buf.text())

    if path.saturated:
        tail = solve_window_distribution(path.receiver_window, p).tail(path.floor_beta)
        if tail > args.epsilon:
            print(
                f"warning: P(W>{path.floor_beta})={100 * tail:.1f}% exceeds "
                f"{100 * args.epsilon:g}%; the full model assumes an unsaturated path",
                file=sys.stderr,
            )
    return EXIT_OK


def cmd_simulate(args) -> int:
    setting = load_setting(args.setting)
    p = check_probability(args.p, allow_zero=True)
    n = QUICK_PACKETS if args.quick and args.packets is None else args.packets or 10_000_000
    trace = [] if args.trace else None
    rep = run_simulation(
        setting.path,
        setting.tcp,
        p,
        n,
        args.seed,
        no_drop_rtx_td=args.no_drop_rtx_td,
        no_drop_rtx_all=args.no_drop_rtx_all,
        trace=trace,
    )
    rep.check_consistency()
    buf = _Buffer()
    w = _writer(buf)
    w.writerow(["# simulate", rep.setting, f"p={p:g}", f"packets={n}", f"seed={args.seed}",
                f"backend={rep.backend}"])  # fmt: skip
    w.writerow(["row", *TABLE4_COLUMNS])
    w.writerow(["meas", *(f"{v:.3f}" for v in rep.breakdown().table4_values())])
    w.writerow(["sent", "dropped", "retransmitted", "elapsed_s", "w_eff",
                "SR_traffic", "SR_sender", "SR_elements", "SR_perW"])  # fmt: skip
    w.writerow(
        [rep.sent, rep.dropped, rep.retransmitted, _fmt(rep.elapsed), _fmt(rep.w_eff)]
        + [_fmt(x / 1e3) for x in (rep.sr_traffic, rep.sr_sender, rep.sr_elements, rep.sr_per_w)]
    )
    w.writerow(["LE", "TD", "TO", "TDTO", "FR", "TOFRxtd", *LOSS_EVENT_COLUMNS])
    stats = rep.loss_event_stats()
    w.writerow(
        [rep.loss_events, rep.td, rep.to, rep.tdto, rep.fr, rep.tofrxtd]
        + [_fmt(stats[c]) for c in LOSS_EVENT_COLUMNS]
    )
    _emit(args, f"simulate_{rep.setting}_p{p:g}_s{args.seed}.csv", buf.text())
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            tw = _writer(fh)
            tw.writerow(["time", "event", "seq", "cwnd", "ssthresh", "in_fr"])
            tw.writerows(trace)
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.config:
        spec = sweep_from_ini(Path(args.config).read_text())
    else:
        names = [s.strip() for s in args.settings.split(",") if s.strip()]
        if not names:
            raise UsageError("no settings given")
        settings = tuple(load_setting(n) for n in names)
        grid = parse_p_list(args.p_grid)
        if not grid:
            raise UsageError("empty p grid")
        kwargs = {}
        if args.packets is not None:
            kwargs.update(packets=args.packets, packets_low_p=args.packets)
        spec = SweepSpec(settings=settings, p_grid=grid, seed=args.seed, **kwargs)
    if args.out:
        spec = replace(spec, out_dir=args.out)

    def progress(row):
        status = row.error or f"err {row.pct_err:+.2f}%"
        print(f"{row.setting} p={row.p:g}: {status}", file=sys.stderr)

    result = run_sweep(
        spec,
        quick=args.quick,
        workers=args.workers,
        no_drop_rtx_td=args.no_drop_rtx_td,
        no_drop_rtx_all=args.no_drop_rtx_all,
        progress=progress,
    )
    print(result.summary())
    print(f"results in {spec.out_dir}")
    return EXIT_OK if result.ok else EXIT_CRITERIA


def cmd_dist(args) -> int:
    if (args.w_r is None) == (args.setting is None):
        raise UsageError("give exactly one of --w-r and --setting")
    w_r = args.w_r if args.w_r is not None else load_setting(args.setting).path.receiver_window
    p = check_probability(args.p)
    dist = solve_window_distribution(w_r, p)
    buf = _Buffer()
    w = _writer(buf)
    w.writerow(["W", "P(W)"])
    for win, mass in dist.as_dict().items():
        w.writerow([win, repr(mass)])
    _emit(args, f"dist_W{w_r}_p{p:g}.csv", buf.text())
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tcprate", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    settings_help = "built-in name (" + ", ".join(TABLE1) + ") or a setting file"

    m = sub.add_parser("model", help="full model, analytic laws and regime at one point")
    m.add_argument("--setting", required=True, help=settings_help)
    m.add_argument("--p", required=True, type=parse_p)
    m.add_argument("--epsilon", type=parse_p, default=DEFAULT_EPSILON,
                   help="warn when P(W > floor(beta)) exceeds this (default 1%%)")  # fmt: skip
    m.add_argument("--out", help="also write the CSV into this directory")
    m.set_defaults(func=cmd_model)

    s = sub.add_parser("simulate", help="one simulation run")
    s.add_argument("--setting", required=True, help=settings_help)
    s.add_argument("--p", required=True, type=parse_p)
    s.add_argument("--packets", type=int, help="transmissions to simulate (default 10M)")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--quick", action="store_true", help=f"{QUICK_PACKETS:,} packets")
    s.add_argument("--no-drop-rtx-td", action="store_true",
                   help="never drop retransmissions sent during fast recovery")  # fmt: skip
    s.add_argument("--no-drop-rtx-all", action="store_true",
                   help="never drop any retransmission")  # fmt: skip
    s.add_argument("--trace", help="write a per-event trace CSV here")
    s.add_argument("--out", help="also write the CSV into this directory")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="model vs simulation sweep")
    v.add_argument("--config", help="sweep manifest; overrides --settings/--p-grid/--packets")
    v.add_argument("--settings", "--setting", dest="settings", default=",".join(TABLE1))
    v.add_argument("--p-grid", "--p", dest="p_grid",
                   default=",".join(repr(p) for p in DEFAULT_P_GRID))  # fmt: skip
    v.add_argument("--packets", type=int)
    v.add_argument("--seed", type=int, default=1)
    v.add_argument("--quick", action="store_true",
                   help=f"{QUICK_PACKETS:,} packets per run, error band slack doubled")  # fmt: skip
    v.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    v.add_argument("--no-drop-rtx-td", action="store_true")
    v.add_argument("--no-drop-rtx-all", action="store_true")
    v.add_argument("--out", default=None,
                   help="output directory (default $TCPRATE_OUT or ./tcprate-out)")  # fmt: skip
    v.set_defaults(func=cmd_validate)

    d = sub.add_parser("dist", help="window distribution P(W) as CSV")
    d.add_argument("--w-r", type=int)
    d.add_argument("--setting", help=settings_help)
    d.add_argument("--p", required=True, type=parse_p)
    d.add_argument("--out", help="also write the CSV into this directory")
    d.set_defaults(func=cmd_dist)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "validate" and args.out is None and not args.config:
        args.out = default_out_dir()
    try:
        return args.func(args)
    except (UsageError, ValidationError, ValueError, FileNotFoundError) as exc:
        print(f"tcprate {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
