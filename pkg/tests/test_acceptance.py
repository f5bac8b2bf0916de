"""Acceptance criteria, one test and one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines
interleaved, or read them from the captured output on failure.  The
simulation-backed criteria use the quick tier (2M packets, fixed seeds)
and take well under a minute with the compiled kernel.
"""

import math

import numpy as np
import pytest

from tcprate.analytic_laws import linear_law_unsat
from tcprate.core_path import TABLE1, TO_STATS_SETTINGS, TcpConfig, classify_regime, derive_path
from tcprate.full_model import TABLE4_COLUMNS, assemble
from tcprate.simulator import RtoEstimator, run_simulation
from tcprate.window_dist import solve_window_distribution

from oracles import chain_oracle

QUICK = 2_000_000
SEED = 1


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line for a criterion, then assert it."""

    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


# reference threshold table, percent: (p_min, p_max unsaturated, p_max saturated)
REFERENCE_THRESHOLDS = {
    "2M-R100-W12": (1.04, 1.39, None),
    "2M-R100-W24": (1.04, 0.35, 0.64),
    "2M-R200-W24": (0.24, 0.35, None),
    "2M-R200-W44": (0.24, 0.10, 0.20),
    "10M-R40-W32": (0.24, 0.20, None),
    "10M-R50-W44": (0.16, 0.10, None),
    "10M-R100-W44": (0.039, 0.10, None),
}

# reference model rows for 10M-R50-W44, in TABLE4_COLUMNS order
REFERENCE_ROWS = {
    0.05: (5.854, 0.010, 0.403, 0.274, 0.797, 7.338, 50.000, 3.221, 17.719, 4.926, 14.952, 14.204, 105.023, 838.476),
    0.10: (3.883, 0.046, 0.289, 0.247, 0.508, 4.973, 50.000, 27.278, 87.469, 5.380, 30.246, 13.611, 213.984, 278.863),
    0.15: (2.977, 0.083, 0.187, 0.175, 0.286, 3.707, 50.000, 78.988, 164.071, 4.210, 34.729, 9.840, 341.839, 130.141),
    0.20: (2.465, 0.104, 0.114, 0.114, 0.150, 2.947, 50.000, 158.948, 221.631, 2.872, 31.452, 6.290, 471.193, 75.055),
}  # fmt: skip

NEVER_SATURATED = [n for n, path in TABLE1.items() if not path.saturated]
VALIDATION_P = (0.005, 0.01, 0.05, 0.10, 0.20)
BAND = (-6.5, 1.5)


def test_criterion_1_threshold_table(verdict):
    misses = []
    for name, reference in REFERENCE_THRESHOLDS.items():
        reg = classify_regime(TABLE1[name], 0.01)
        computed = (reg.p_min, reg.p_max, reg.p_max_saturated)
        for label, want, got in zip(("p_min", "p_max", "p_max sat"), reference, computed):
            if want is None:
                continue
            got_pct = math.nan if got is None else 100 * got
            if not abs(got_pct - want) <= 0.005:
                misses.append(f"{name} {label} {got_pct:.4f}% vs {want}%")
    cells = sum(v is not None for row in REFERENCE_THRESHOLDS.values() for v in row)
    verdict(1, not misses, f"{cells - len(misses)}/{cells} cells within 0.005 pp; " + "; ".join(misses))


def test_criterion_2_linear_spot_values(verdict):
    path = TABLE1["2M-R100-W12"]
    got = {p: linear_law_unsat(path, p).w_eff for p in (0.005, 0.01, 0.02)}
    ok = [round(got[0.005], 2), round(got[0.01], 2), round(got[0.02], 2)] == [10.74, 9.48, 6.96]
    ok = ok and [round(got[0.005], 1), round(got[0.01], 1), round(got[0.02])] == [10.7, 9.5, 7]
    verdict(2, ok, ", ".join(f"p={p:.1%} w_eff={w:.4f}" for p, w in got.items()))


def test_criterion_3_full_model_rows(verdict):
    path = TABLE1["10M-R50-W44"]
    misses = []
    worst = 0.0
    for p, reference in REFERENCE_ROWS.items():
        got = assemble(path, TcpConfig(), p).table4_values()
        for col, want, value in zip(TABLE4_COLUMNS, reference, got):
            err = 100 * (value - want) / want
            worst = max(worst, abs(err))
            if abs(err) > 0.5:
                misses.append(f"p={p:.0%} {col} {value:.3f} vs {want} ({err:+.1f}%)")
    total = 14 * len(REFERENCE_ROWS)
    verdict(
        3,
        not misses,
        f"{total - len(misses)}/{total} cells within 0.5%, worst {worst:.1f}%; " + "; ".join(misses),
    )


def test_criterion_4_window_distribution(verdict):
    norm = max(
        abs(solve_window_distribution(w_r, p).mass.sum() - 1)
        for w_r in (2, 3, 5, 12, 24, 44, 100, 256)
        for p in (1e-4, 1e-3, 0.01, 0.05, 0.2, 0.5)
    )
    oracle = max(
        np.max(np.abs(solve_window_distribution(w_r, p).mass[1:] - chain_oracle(w_r, p)))
        for w_r in range(2, 7)
        for p in (0.001, 0.01, 0.05, 0.2, 0.5)
    )
    tv = {}
    for name in ("2M-R100-W12", "2M-R200-W24", "10M-R40-W32", "10M-R100-W44"):
        path = TABLE1[name]
        model = solve_window_distribution(path.receiver_window, 0.01).mass
        measured = run_simulation(path, p=0.01, n_packets=QUICK, seed=SEED).window_distribution()
        tv[path.receiver_window] = 0.5 * float(np.abs(model - measured).sum())
    ok = norm <= 1e-12 and oracle <= 1e-9 and max(tv.values()) <= 0.03
    detail = f"normalisation {norm:.1e}, oracle {oracle:.1e}, TV " + ", ".join(
        f"W{w}={d:.4f}" for w, d in tv.items()
    )
    verdict(4, ok, detail)


def test_criterion_5_simulator_validation(verdict):
    w12 = TABLE1["2M-R100-W12"]
    w_eff = run_simulation(w12, p=0.01, n_packets=QUICK, seed=SEED).w_eff
    w_ok = abs(w_eff / 9.5 - 1) <= 0.03
    outside = []
    errors = []
    for name in NEVER_SATURATED:
        path = TABLE1[name]
        for p in VALIDATION_P:
            model = assemble(path, TcpConfig(), p).send_rate
            sim = run_simulation(path, p=p, n_packets=QUICK, seed=SEED).send_rate
            err = 100 * (model - sim) / sim
            errors.append(err)
            if not BAND[0] <= err <= BAND[1]:
                outside.append(f"{name} p={p:g} {err:+.2f}%")
    n = len(errors)
    verdict(
        5,
        w_ok and not outside,
        f"w_eff {w_eff:.3f} ({100 * (w_eff / 9.5 - 1):+.2f}% vs 9.5); "
        f"{n - len(outside)}/{n} points in [{BAND[0]}%, {BAND[1]}%]; " + "; ".join(outside),
    )


def test_criterion_6_loss_event_statistics(verdict):
    to_share, td_share = [], []
    for name in TO_STATS_SETTINGS:
        stats = run_simulation(TABLE1[name], p=0.01, n_packets=QUICK, seed=SEED).loss_event_stats()
        to_share.append(stats["%TO/LE"])
        td_share.append(stats["%TD/LE"])
    to_mean, td_mean = np.mean(to_share), np.mean(td_share)
    ok = abs(to_mean - 1.2) <= 0.5 and td_mean >= 98
    verdict(6, ok, f"%TO/LE {to_mean:.3f} (want 1.2 +/- 0.5), %TD/LE {td_mean:.2f} (want >= 98)")


def _single_drop_recovery_ok(w_r, drop):
    path = derive_path(100e6, 1500, w_r, rtt=0.1)
    trace = []
    run_simulation(path, p=0.0, n_packets=drop + 4 * w_r, seed=1, drop_seqs=[drop], trace=trace)
    i = next((k for k, e in enumerate(trace) if e[1] == "td"), None)
    if i is None:
        return None
    w = trace[i][3]
    s = max(w // 2, 2)
    w_end = w + s - 1
    n_da = w_r - w if w <= w_r < w_end else s - 1
    j = next(k for k in range(i, len(trace)) if trace[k][1] == "fr")
    new = sum(1 for e in trace[i + 1 : j] if e[1] == "send")
    peak = max(e[3] for e in trace[i + 1 : j + 1] if e[5])
    return new == n_da and peak == min(w_end, w_r)


def test_criterion_7_properties(verdict):
    checks = {}
    w12 = TABLE1["2M-R100-W12"]

    a = run_simulation(w12, p=0.03, n_packets=200_000, seed=5)
    b = run_simulation(w12, p=0.03, n_packets=200_000, seed=5)
    checks["determinism"] = a == b

    consistent = True
    for name in TABLE1:
        for p in (0.001, 0.05, 0.2):
            rep = run_simulation(TABLE1[name], p=p, n_packets=100_000, seed=2)
            try:
                rep.check_consistency()
            except Exception:
                consistent = False
    checks["conservation and four-way rate"] = consistent

    est = RtoEstimator()
    r = 2.0
    est.sample(r)
    factors = []
    for n in range(1, 21):
        est.sample(r)
        if n in (10, 20):
            factors.append(est.rto / r)
    checks["rto factors"] = abs(factors[0] - 1.113) <= 1e-3 and abs(factors[1] - 1.006) <= 1e-3

    bursts = True
    for name in ("2M-R100-W12", "2M-R200-W24", "10M-R100-W44"):
        path = TABLE1[name]
        trace = []
        run_simulation(path, p=0.0, n_packets=600, seed=1, drop_seqs=[300], trace=trace)
        td = next(e for e in trace if e[1] == "td")
        fr = next(e for e in trace if e[1] == "fr")
        burst = sum(1 for e in trace if e[0] == fr[0] and e[1] == "send")
        bursts &= td[3] == path.receiver_window and burst == path.receiver_window // 2 + 1
    checks["FR burst"] = bursts

    outcomes = [_single_drop_recovery_ok(w_r, d) for w_r in (8, 12, 24, 44, 60) for d in (40, 97, 250)]
    checks["N_DA and W_end"] = all(o is not False for o in outcomes) and outcomes.count(True) >= 10

    failed = [k for k, v in checks.items() if not v]
    verdict(
        7,
        not failed,
        f"{len(checks) - len(failed)}/{len(checks)} property groups hold"
        + (f"; failing: {', '.join(failed)}" if failed else "")
        + f"; rto factors {factors[0]:.4f}, {factors[1]:.4f}",
    )


def test_criterion_8_undroppable_fr_retransmissions(verdict):
    means = {}
    for p in (0.05, 0.10):
        gains = []
        for name in TO_STATS_SETTINGS:
            base = run_simulation(TABLE1[name], p=p, n_packets=QUICK, seed=SEED).send_rate
            kept = run_simulation(
                TABLE1[name], p=p, n_packets=QUICK, seed=SEED, no_drop_rtx_td=True
            ).send_rate
            gains.append(100 * (kept / base - 1))
        means[p] = float(np.mean(gains))
    ok = all(g <= 15 for g in means.values())
    verdict(
        8,
        ok,
        "mean improvement over the TO-stats settings "
        + ", ".join(f"p={p:.0%}: {g:.2f}%" for p, g in means.items())
        + " (limit 15%)",
    )
