"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The deterministic suite (1-7) runs in seconds. The trend suite (8-15) runs
each scenario at full scale for fixed seeds 1-5 and judges the 5-seed mean;
batches are computed once per session and shared across criteria.
"""

import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import pytest

from aqmsim.engine import Rng
from aqmsim.harness import emit_outputs, run_experiment
from aqmsim.metrics import jain_index
from aqmsim.qdisc import (
    Discipline,
    Outcome,
    Packet,
    QdiscParams,
    QdiscState,
    drawing_factor,
    drawing_split,
    enqueue_choked,
    update_avg_queue,
)
from aqmsim.scenario import load_preset, sweep_scenarios

SEEDS = (1, 2, 3, 4, 5)
DISCIPLINES = ("red", "choke", "gchoke", "choked")
WORKERS = min(os.cpu_count() or 1, 2)


def run_batch(scenarios):
    if WORKERS > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=WORKERS) as pool:
            return list(pool.map(run_experiment, scenarios))
    return [run_experiment(s) for s in scenarios]


def verdict(criterion: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line, flush=True)
    assert ok, line


def mean(values):
    return statistics.mean(values)


@pytest.fixture(scope="session")
def model1_batch():
    jobs, keys = [], []
    for disc in DISCIPLINES:
        for seed in SEEDS:
            jobs.append(replace(load_preset(f"model1-{disc}"), seed=seed))
            keys.append(disc)
    reports = run_batch(jobs)
    out = {disc: [] for disc in DISCIPLINES}
    for disc, report in zip(keys, reports):
        out[disc].append(report)
    return out


@pytest.fixture(scope="session")
def model2_batch():
    jobs, keys = [], []
    for seed in SEEDS:
        for label, scenario in sweep_scenarios("model2-sweep", seed=seed):
            jobs.append(scenario)
            keys.append((label, scenario.discipline.value))
    reports = run_batch(jobs)
    out = {}
    for key, report in zip(keys, reports):
        out.setdefault(key, []).append(report)
    return out


@pytest.fixture(scope="session")
def buffer_batch():
    jobs, keys = [], []
    for seed in SEEDS:
        for label, scenario in sweep_scenarios("buffer-sweep", seed=seed):
            if scenario.buffer_pkts == 100:
                continue
            jobs.append(scenario)
            keys.append((label, scenario.discipline.value))
    reports = run_batch(jobs)
    out = {}
    for key, report in zip(keys, reports):
        out.setdefault(key, []).append(report)
    return out


@pytest.fixture(scope="session")
def reno_vegas_batch():
    jobs, keys = [], []
    for seed in SEEDS:
        for _, scenario in sweep_scenarios("reno-vs-vegas", seed=seed):
            jobs.append(scenario)
            keys.append(scenario.discipline.value)
    reports = run_batch(jobs)
    out = {}
    for disc, report in zip(keys, reports):
        out.setdefault(disc, []).append(report)
    return out


@pytest.fixture(scope="session")
def rtt_mix_batch():
    jobs, keys = [], []
    for seed in SEEDS:
        for _, scenario in sweep_scenarios("rtt-mix", seed=seed):
            jobs.append(scenario)
            keys.append(scenario.discipline.value)
    reports = run_batch(jobs)
    out = {}
    for disc, report in zip(keys, reports):
        out.setdefault(disc, []).append(report)
    return out


# -- deterministic / property suite -----------------------------------------


def test_criterion_1_drawing_factor_anchors():
    params = QdiscParams(capacity=100, t_min=40, t_max=80)
    ok = (
        drawing_factor(83, params) == 5
        and drawing_factor(11, params) == 1
        and drawing_split(5) == (5, 3)
    )
    verdict(
        "1 drawing-factor anchors",
        ok,
        f"D(83)={drawing_factor(83, params)}, D(11)={drawing_factor(11, params)}, "
        f"split(5)={drawing_split(5)}",
    )


def test_criterion_2_ewma_exact():
    cases = [
        ((40.0, 40, 0.02), 40.0),
        ((0.0, 50, 0.02), 1.0),
        ((40.0, 80, 0.02), 40.8),
    ]
    errors = [abs(update_avg_queue(*args) - want) for args, want in cases]
    ok = all(e <= 1e-12 for e in errors)
    verdict("2 EWMA exact values", ok, f"max abs error {max(errors):.2e}")


def test_criterion_3_jain_index_properties():
    hand_ok = (
        abs(jain_index([1.0, 0.0, 0.0, 0.0]) - 0.25) < 1e-15
        and abs(jain_index([3.0, 1.0]) - 0.8) < 1e-15
    )
    scale_ok = True
    for shares in ([3.0, 1.0], [1.0, 2.0, 3.0, 4.0], [10.0, 0.0, 5.0]):
        base = jain_index(shares)
        for scale in (1e-3, 0.5, 7.0, 1e3):
            scaled = jain_index([x * scale for x in shares])
            scale_ok &= abs(scaled - base) <= 1e-12 * abs(base)
    bounds_ok = True
    for shares in ([1.0], [9.0, 1.0, 1.0], [0.5] * 20, [1.0] + [0.0] * 9):
        index = jain_index(shares)
        bounds_ok &= 1.0 / len(shares) - 1e-12 <= index <= 1.0 + 1e-12
    verdict(
        "3 Jain index properties",
        hand_ok and scale_ok and bounds_ok,
        f"hand={hand_ok} scale={scale_ok} bounds={bounds_ok}",
    )


def test_criterion_4_draw_bound_over_model1_run(model1_batch):
    violations = sum(r.draw_bound_violations for r in model1_batch["choked"])
    verdict(
        "4 CHOKeD draws <= D_r + D_f over full model-1 runs",
        violations == 0,
        f"{violations} violations across {len(model1_batch['choked'])} runs",
    )


def test_criterion_5_clean_buffer_red_equivalence():
    params = QdiscParams(capacity=100, t_min=40, t_max=80, max_p=0.1)
    state = QdiscState(
        params=params,
        discipline=Discipline.CHOKED,
        buffer=[Packet(2, i) for i in range(50)],
        q_a=60.0,
    )
    rng = Rng(123)
    trials = 100_000
    drops = 0
    for _ in range(trials):
        decision = enqueue_choked(state, Packet(1, 0), rng)
        assert decision.outcome is not Outcome.MATCH_DROP
        if decision.outcome is Outcome.DROP_ARRIVING:
            drops += 1
        else:
            state.buffer.pop()
    rate = drops / trials
    verdict(
        "5 clean-buffer CHOKeD matches RED drop rate",
        abs(rate - 0.05) <= 0.005,
        f"empirical {rate:.4f} vs expected 0.0500 +/- 0.005",
    )


def test_criterion_6_conservation_everywhere(
    model1_batch, model2_batch, buffer_batch, reno_vegas_batch, rtt_mix_batch
):
    reports = []
    for batch in (model1_batch, model2_batch, buffer_batch, reno_vegas_batch, rtt_mix_batch):
        for runs in batch.values():
            reports.extend(runs)
    # the one preset family not in the trend batches
    reports.append(run_experiment(replace(load_preset("model1-droptail"), duration_s=20.0)))
    webmix = [s for _, s in sweep_scenarios("web-mix", seed=1)]
    reports.extend(run_batch([replace(s, duration_s=20.0, warmup_s=4.0) for s in webmix]))
    bad = 0
    for report in reports:
        for flow_id, c in report.conservation.items():
            if c["emitted"] != c["delivered"] + c["dropped"] + c["residual"]:
                bad += 1
    verdict(
        "6 conservation exact for every flow in every run",
        bad == 0,
        f"{bad} violations across {len(reports)} runs",
    )


def test_criterion_7_byte_identical_csv(tmp_path):
    scenario = load_preset("model1-choked")
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    emit_outputs(run_experiment(scenario), str(dir_a))
    emit_outputs(run_experiment(scenario), str(dir_b))
    same = all(
        (dir_a / name).read_bytes() == (dir_b / name).read_bytes()
        for name in ("summary.csv", "aggregate.csv", "queue_trace.csv", "timeseries.csv")
    )
    verdict("7 determinism: byte-identical CSVs", same, "model1-choked seed 1 run twice")


# -- simulation trend suite ---------------------------------------------------


def test_criterion_8_model1_udp_throughput(model1_batch):
    udp = {
        disc: mean(r.udp_throughput_bps / 1e6 for r in model1_batch[disc])
        for disc in DISCIPLINES
    }
    fair_share = 1e6 / 34 / 1e6
    ok = (
        udp["red"] >= 0.5
        and 0.06 <= udp["choke"] <= 0.25
        and udp["choked"] <= 0.06
        and udp["choked"] <= 2 * fair_share
    )
    verdict(
        "8 model-1 UDP throughput bands",
        ok,
        f"red={udp['red']:.3f} (>=0.5), choke={udp['choke']:.3f} (in [0.06,0.25]), "
        f"choked={udp['choked']:.4f} (<=0.06 and <= {2 * fair_share:.4f})",
    )


def test_criterion_9_model1_fairness_ordering(model1_batch):
    fair = {
        disc: mean(r.fairness for r in model1_batch[disc]) for disc in DISCIPLINES
    }
    ok = (
        fair["choked"] > fair["gchoke"] > fair["choke"] > fair["red"]
        and fair["choked"] >= 0.90
    )
    verdict(
        "9 model-1 fairness ordering CHOKeD > gCHOKe > CHOKe > RED and >= 0.90",
        ok,
        " > ".join(f"{d}={fair[d]:.4f}" for d in ("choked", "gchoke", "choke", "red")),
    )


def test_criterion_10_model1_delay_ordering(model1_batch):
    delay = {
        disc: mean(r.mean_queuing_delay_s for r in model1_batch[disc])
        for disc in DISCIPLINES
    }
    ok = delay["red"] > delay["choke"] > delay["gchoke"] > delay["choked"]
    verdict(
        "10 model-1 queuing-delay ordering RED > CHOKe > gCHOKe > CHOKeD",
        ok,
        " > ".join(f"{d}={delay[d]:.4f}" for d in ("red", "choke", "gchoke", "choked")),
    )


def test_criterion_11_model1_queue_stability(model1_batch):
    means = []
    for report in model1_batch["choked"]:
        points = [p.q_a for p in report.queue_trace if p.t >= report.warmup_s]
        means.append(mean(points))
    q_a = mean(means)
    verdict(
        "11 model-1 CHOKeD time-mean Q_a within [30, 60]",
        30.0 <= q_a <= 60.0,
        f"mean Q_a = {q_a:.1f} packets",
    )


def test_criterion_12_model2_orderings(model2_batch):
    labels = ("25-flows", "50-flows", "73-flows", "100-flows")
    details = []
    ordering_ok = True
    for label in labels:
        tcp = {
            disc: mean(r.tcp_throughput_bps / 1e6 for r in model2_batch[(label, disc)])
            for disc in DISCIPLINES
        }
        point_ok = tcp["choked"] > tcp["gchoke"] > tcp["choke"] > tcp["red"]
        ordering_ok &= point_ok
        details.append(f"{label}: " + ("ok" if point_ok else "BROKEN"))
    fairness_ok = True
    for label in ("25-flows", "100-flows"):
        choked = mean(r.fairness for r in model2_batch[(label, "choked")])
        gchoke = mean(r.fairness for r in model2_batch[(label, "gchoke")])
        fairness_ok &= choked > gchoke
        details.append(f"{label} fairness {choked:.3f} vs {gchoke:.3f}")
    verdict(
        "12 model-2 TCP throughput ordering at every point + fairness at 25/100",
        ordering_ok and fairness_ok,
        "; ".join(details),
    )


def test_criterion_13_buffer_sweep(buffer_batch):
    details = []
    fairness_ok = True
    for label in ("B300", "B500"):
        fair = {
            disc: mean(r.fairness for r in buffer_batch[(label, disc)])
            for disc in DISCIPLINES
        }
        best = max(fair, key=fair.get)
        fairness_ok &= best == "choked"
        details.append(f"{label} fairness leader {best} ({fair['choked']:.3f})")
    delay300 = {
        disc: mean(r.mean_queuing_delay_s for r in buffer_batch[("B300", disc)])
        for disc in DISCIPLINES
    }
    delay_ok = min(delay300, key=delay300.get) == "choked"
    details.append(f"B300 delay leader {min(delay300, key=delay300.get)} ({delay300['choked']:.3f}s)")
    verdict(
        "13 buffer sweep: CHOKeD fairness highest at B=300/500, delay lowest at B=300",
        fairness_ok and delay_ok,
        "; ".join(details),
    )


def test_criterion_14_reno_vegas_sdv(reno_vegas_batch):
    sdv = {
        disc: mean(r.throughput_sdv_kbps() for r in reno_vegas_batch[disc])
        for disc in DISCIPLINES
    }
    ok = min(sdv, key=sdv.get) == "choked"
    verdict(
        "14 reno-vs-vegas SDV lowest under CHOKeD",
        ok,
        ", ".join(f"{d}={sdv[d]:.1f}" for d in DISCIPLINES),
    )


def test_criterion_15_rtt_mix_fairness(rtt_mix_batch):
    fair = {
        disc: mean(r.fairness for r in rtt_mix_batch[disc]) for disc in DISCIPLINES
    }
    ok = all(fair["choked"] > fair[d] for d in ("red", "choke", "gchoke"))
    verdict(
        "15 rtt-mix CHOKeD fairness strictly greatest",
        ok,
        ", ".join(f"{d}={fair[d]:.4f}" for d in DISCIPLINES),
    )
