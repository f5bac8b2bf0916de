"""Model-versus-simulation sweeps with row-level resume."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..core_path import classify_regime
from ..full_model import TABLE4_COLUMNS, ModelBreakdown, assemble
from ..simulator import run_simulation
from ..window_dist import solve_window_distribution
from .config import Setting, SweepSpec

#: Acceptable model error in percent, before slack.
ERROR_BAND = (-5.0, 0.0)
BAND_SLACK = 1.5
QUICK_PACKETS = 1_000_000
QUICK_SLACK_FACTOR = 2.0
#: Only these p are judged against the band.
JUDGED_P = (0.005, 0.20)

PACKET_COLUMNS = TABLE4_COLUMNS[:5]
TIME_COLUMNS = TABLE4_COLUMNS[6:12]
WERR_COLUMNS = tuple(f"%wErr {c}" for c in PACKET_COLUMNS + TIME_COLUMNS)

PARTIAL_NAME = "validate.partial.csv"
RESULT_NAME = "validate.csv"
SUMMARY_NAME = "validate-summary.txt"

CSV_FIELDS = (
    "setting", "p", "packets", "seed", "regime", "saturable", "tail_above_beta",
    "model_sr_kbps", "sim_sr_kbps", "pct_err", *WERR_COLUMNS, "error",
)  # fmt: skip


def weighted_errors(calc: ModelBreakdown, meas: ModelBreakdown) -> dict[str, float]:
    """Per-element error weighted by the measured total of its kind, in percent."""
    c = calc.table4_values()
    m = meas.table4_values()
    out = {}
    for i, col in enumerate(PACKET_COLUMNS):
        out[f"%wErr {col}"] = 100 * (c[i] - m[i]) / m[5]
    for j, col in enumerate(TIME_COLUMNS, start=6):
        out[f"%wErr {col}"] = 100 * (c[j] - m[j]) / m[12]
    return out


def pct_error(model: float, sim: float) -> float:
    return 100 * (model - sim) / sim


@dataclass(frozen=True)
class ComparisonRow:
    setting: str
    p: float
    packets: int
    seed: int
    regime: str = ""
    saturable: bool = False
    tail_above_beta: float = math.nan
    model_sr_kbps: float = math.nan
    sim_sr_kbps: float = math.nan
    pct_err: float = math.nan
    w_err: dict = field(default_factory=dict)
    error: str = ""

    @property
    def key(self) -> tuple[str, str]:
        return self.setting, repr(float(self.p))

    def to_csv(self) -> dict[str, str]:
        d = {
            "setting": self.setting,
            "p": repr(float(self.p)),
            "packets": str(self.packets),
            "seed": str(self.seed),
            "regime": self.regime,
            "saturable": str(int(self.saturable)),
            "tail_above_beta": repr(self.tail_above_beta),
            "model_sr_kbps": repr(self.model_sr_kbps),
            "sim_sr_kbps": repr(self.sim_sr_kbps),
            "pct_err": repr(self.pct_err),
            "error": self.error,
        }
        for c in WERR_COLUMNS:
            d[c] = repr(self.w_err.get(c, math.nan))
        return d

    @classmethod
    def from_csv(cls, d: dict[str, str]) -> ComparisonRow:
        return cls(
            setting=d["setting"],
            p=float(d["p"]),
            packets=int(d["packets"]),
            seed=int(d["seed"]),
            regime=d["regime"],
            saturable=d["saturable"] == "1",
            tail_above_beta=float(d["tail_above_beta"]),
            model_sr_kbps=float(d["model_sr_kbps"]),
            sim_sr_kbps=float(d["sim_sr_kbps"]),
            pct_err=float(d["pct_err"]),
            w_err={c: float(d[c]) for c in WERR_COLUMNS},
            error=d["error"],
        )


def compare_point(
    setting: Setting,
    p: float,
    packets: int,
    seed: int,
    no_drop_rtx_td: bool = False,
    no_drop_rtx_all: bool = False,
) -> ComparisonRow:
    """Model and simulation at one grid point.  Failures land in ``error``."""
    row = ComparisonRow(
        setting=setting.name,
        p=p,
        packets=packets,
        seed=seed,
        saturable=setting.path.saturated,
    )
    try:
        regime = classify_regime(setting.path, p)
        dist = solve_window_distribution(setting.path.receiver_window, p)
        calc = assemble(setting.path, setting.tcp, p, dist=dist)
        rep = run_simulation(
            setting.path,
            setting.tcp,
            p,
            packets,
            seed,
            no_drop_rtx_td=no_drop_rtx_td,
            no_drop_rtx_all=no_drop_rtx_all,
        )
        rep.check_consistency()
        return replace(
            row,
            regime=regime.kind.value,
            tail_above_beta=dist.tail(setting.path.floor_beta),
            model_sr_kbps=calc.send_rate / 1e3,
            sim_sr_kbps=rep.send_rate / 1e3,
            pct_err=pct_error(calc.send_rate, rep.send_rate),
            w_err=weighted_errors(calc, rep.breakdown()),
        )
    except Exception as exc:  # noqa: BLE001 - recorded per row, sweep continues
        return replace(row, error=f"{type(exc).__name__}: {exc}")


def band(quick: bool = False) -> tuple[float, float]:
    slack = BAND_SLACK * (QUICK_SLACK_FACTOR if quick else 1.0)
    return ERROR_BAND[0] - slack, ERROR_BAND[1] + slack


def judge(row: ComparisonRow, quick: bool = False) -> str:
    """'pass', 'fail' or 'n/a' (outside the judged scope)."""
    if row.saturable or not (JUDGED_P[0] <= row.p <= JUDGED_P[1]):
        return "n/a"
    if row.error or not math.isfinite(row.pct_err):
        return "fail"
    lo, hi = band(quick)
    return "pass" if lo <= row.pct_err <= hi else "fail"


def read_rows(path: Path) -> list[ComparisonRow]:
    """Rows of a (possibly truncated) result file; malformed lines are skipped."""
    if not path.exists():
        return []
    rows = []
    with path.open(newline="") as fh:
        for d in csv.DictReader(fh):
            try:
                rows.append(ComparisonRow.from_csv(d))
            except (KeyError, TypeError, ValueError):
                continue
    return rows


def write_rows(path: Path, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow(r.to_csv())


def _append(path: Path, row: ComparisonRow) -> None:
    new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        if new:
            w.writeheader()
        w.writerow(row.to_csv())


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[ComparisonRow, ...]
    verdicts: tuple[str, ...]
    quick: bool
    skipped: int

    @property
    def failures(self) -> list[ComparisonRow]:
        return [r for r, v in zip(self.rows, self.verdicts) if v == "fail"]

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        lo, hi = band(self.quick)
        counts = {v: self.verdicts.count(v) for v in ("pass", "fail", "n/a")}
        lines = [
            f"band [{lo:+.1f}%, {hi:+.1f}%] on never-saturated settings, "
            f"{JUDGED_P[0]:.1%} <= p <= {JUDGED_P[1]:.0%}",
            f"rows {len(self.rows)} (resumed {self.skipped}): pass {counts['pass']}, "
            f"fail {counts['fail']}, not judged {counts['n/a']}",
        ]
        for r in self.failures:
            what = r.error or f"err {r.pct_err:+.2f}%"
            lines.append(f"FAIL {r.setting} p={r.p:g}: {what}")
        lines.append("PASS" if self.ok else "FAIL")
        return "\n".join(lines)


def run_sweep(
    spec: SweepSpec,
    *,
    quick: bool = False,
    workers: int | None = None,
    no_drop_rtx_td: bool = False,
    no_drop_rtx_all: bool = False,
    progress=None,
) -> SweepResult:
    """Run every grid point not already present in the output directory.

    Completed rows are appended to a partial file as they arrive, so an
    interrupted sweep resumes where it stopped.  The final table is
    ordered by (setting, p) as listed in ``spec``.
    """
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    partial = out / PARTIAL_NAME
    done = {r.key: r for r in read_rows(partial)}
    skipped = 0
    todo = []
    for setting, p in spec.points():
        if (setting.name, repr(float(p))) in done:
            skipped += 1
            continue
        n = QUICK_PACKETS if quick else spec.packets_for(p)
        todo.append((setting, p, n, spec.seed_for(setting.name, p)))

    def record(row: ComparisonRow) -> None:
        _append(partial, row)
        done[row.key] = row
        if progress is not None:
            progress(row)

    if workers is not None and workers <= 1:
        for args in todo:
            record(compare_point(*args, no_drop_rtx_td, no_drop_rtx_all))
    elif todo:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(compare_point, *args, no_drop_rtx_td, no_drop_rtx_all)
                for args in todo
            ]
            for fut in as_completed(futures):
                record(fut.result())

    ordered = []
    for setting, p in spec.points():
        row = done.get((setting.name, repr(float(p))))
        if row is not None:
            ordered.append(row)
    write_rows(out / RESULT_NAME, ordered)
    result = SweepResult(
        rows=tuple(ordered),
        verdicts=tuple(judge(r, quick) for r in ordered),
        quick=quick,
        skipped=skipped,
    )
    (out / SUMMARY_NAME).write_text(result.summary() + "\n")
    return result
