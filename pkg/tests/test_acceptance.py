"""End-to-end acceptance criteria, each reported as one PASS/FAIL line."""

import random
from dataclasses import replace

from dmacsim.descriptor import Descriptor, decode, encode
from dmacsim.driver import DmaDriver
from dmacsim.frontend import MARKER
from dmacsim.harness import (PRESETS, architectural_issue_lags, build_workload,
                             check_integrity, latency_table, next_known_by_position,
                             preload, run_scenario, scenario)
from dmacsim.memory import BusTransaction, Kind, MemoryConfig, PayloadClass
from dmacsim.metrics import MeasurementWindow, estimate_area, ideal_utilization
from dmacsim.testbench import Testbench
from helpers import Bus


def util(preset, L, n, **kw):
    return run_scenario(scenario(preset, L, n, **kw)).report.steady_state_utilization


def test_1_ideal_memory_matches_the_bound(verdict):
    sizes = (8, 16, 32, 64, 128, 256, 512, 1024, 4096)
    errs = {n: util("base", 1, n) - n / (n + 32) for n in sizes}
    worst = max(errs, key=lambda n: abs(errs[n]))
    verdict("1 base config at L=1 reaches n/(n+32) within 0.01",
            all(abs(e) <= 0.01 for e in errs.values()),
            f"worst deviation {errs[worst]:+.4f} at n={worst}")


def test_2_latency_probes(verdict):
    row = latency_table((1, 13, 100))["scaled"]
    verdict("2 main DMAC i_rf=3, rf_rb=8/32/206, r_w=1", row == (3, 8, 32, 206, 1),
            f"(i_rf, rf_rb@1, rf_rb@13, rf_rb@100, r_w) = {row}")


def test_3_prefetching_at_ddr3_latency(verdict):
    sizes = (8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096)
    spec64 = util("speculation", 13, 64) / ideal_utilization(64)
    base = {n: util("base", 13, n) / ideal_utilization(n) for n in sizes}
    reaches = [n for n in sizes if base[n] >= 0.99]
    ok = spec64 >= 0.99 and reaches == [n for n in sizes if n >= 256] and base[64] < 0.95
    verdict("3 speculation ideal at 64 B, base ideal only from 256 B", ok,
            f"speculation@64 {spec64:.3f}, base@64 {base[64]:.3f}, base@128 {base[128]:.3f}, "
            f"base@256 {base[256]:.3f} of ideal")


def test_4_scaled_at_far_memory(verdict):
    r = util("scaled", 100, 128) / ideal_utilization(128)
    verdict("4 scaled config at L=100 ideal from 128 B", r >= 0.99, f"{r:.4f} of ideal")


def test_5_against_the_baseline(verdict):
    r1 = util("base", 1, 64) / util("baseline", 1, 64)
    b13 = util("baseline", 13, 64)
    r13 = util("base", 13, 64) / b13
    rs = util("speculation", 13, 64) / b13
    ok = 2.0 <= r1 <= 3.0 and r13 >= 1.5 and rs >= 3.0
    verdict("5 speedup over the baseline at 64 B", ok,
            f"L=1 base {r1:.2f}x, L=13 base {r13:.2f}x, L=13 speculation {rs:.2f}x")


def test_6_misprediction_adds_no_latency(verdict):
    rng = random.Random(2024)
    checked = mismatches = 0
    for i in range(100):
        h = rng.choice([0.0, 0.25, 0.5, 0.75])
        cfg = scenario("speculation", rng.choice([1, 13, 100]), rng.choice([8, 64, 256, 1024]),
                       hit_rate=h, seed=rng.getrandbits(32),
                       transfer_count=rng.randint(20, 40))
        cfg = replace(cfg, window=MeasurementWindow(2, 12))
        paired = replace(cfg, name="base", dmac=PRESETS["base"])
        a = run_scenario(cfg).testbench.transfers
        b = run_scenario(paired).testbench.transfers
        lag_a = architectural_issue_lags(a, next_known_by_position(a), only_after_miss=True)
        lag_b = architectural_issue_lags(b, next_known_by_position(b))
        for pos, lag in lag_a.items():
            checked += 1
            mismatches += lag != lag_b[pos]
    verdict("6 mispredicted fetch issues exactly as without speculation",
            mismatches == 0 and checked > 0,
            f"{checked} mispredicted descriptors over 100 workloads, {mismatches} differ")


def test_7_area_model(verdict):
    points = (estimate_area(4, 0), estimate_area(4, 4), estimate_area(24, 24))
    affine = all(round(estimate_area(d, s) - estimate_area(d - 1, s), 9) == 5.28
                 for d in range(2, 33) for s in range(0, 33))
    verdict("7 area model", points == (41.42, 49.18, 193.58) and affine,
            f"{points}, affine over 1<=d<=32, 0<=s<=32: {affine}")


def _bounded_run(cfg):
    """Run step by step, checking the outstanding-read bounds after every event."""
    tb = Testbench(cfg.dmac, cfg.memory, record_trace=True)
    wl = build_workload(cfg.workload, cfg.seed, cfg.memory)
    preload(tb, wl)
    for ch in wl.chains:
        tb.launch(ch.head_address)
    fe = tb.frontend
    d, s = cfg.dmac.frontend.descriptors_in_flight, cfg.dmac.frontend.prefetch_slots
    violations = 0
    while not tb.idle:
        tb.sim.step()
        violations += fe.in_flight > d or fe.speculative_outstanding > s
    check_integrity(tb, wl)
    markers = all(tb.memory.backdoor_read(a, 8) == MARKER for a, _ in wl.descriptors)
    return tb, violations, markers


def test_8_integrity_and_protocol_invariants(verdict):
    rng = random.Random(8)
    roundtrip = all(decode(encode(d)) == d for d in (
        Descriptor(rng.getrandbits(32), rng.getrandbits(32), rng.getrandbits(64),
                   rng.getrandbits(64), rng.getrandbits(64)) for _ in range(10_000)))

    runs = violations = 0
    markers_ok = determinism_ok = True
    for preset in ("base", "speculation", "scaled"):
        for L in (1, 13, 100):
            for h in (1.0, 0.5, 0.0):
                if preset == "base" and h < 1.0:
                    continue
                cfg = scenario(preset, L, rng.choice([8, 64, 200, 512]), hit_rate=h,
                               seed=rng.getrandbits(32), transfer_count=30, chains=2)
                tb, v, m = _bounded_run(cfg)     # raises IntegrityError on dst != src
                runs += 1
                violations += v
                markers_ok &= m
                again, _, _ = _bounded_run(cfg)
                determinism_ok &= tb.sim.trace == again.sim.trace

    bus = Bus()
    for p in ("a", "b"):
        bus.arbiter.add_port(p)

    def saturate():
        for _ in range(200):
            for p in ("a", "b"):
                bus.arbiter.request(p, BusTransaction(Kind.READ, 0, rng.randint(1, 8), 8,
                                                      PayloadClass.PAYLOAD, p, "sink", 0))
    bus.at(0, saturate)
    bus.run()
    gap = count_a = count_b = 0
    for g in bus.arbiter.grants:
        count_a += g.port == "a"
        count_b += g.port == "b"
        gap = max(gap, abs(count_a - count_b))

    ok = roundtrip and markers_ok and violations == 0 and gap <= 1 and determinism_ok
    verdict("8 integrity and protocol invariants", ok,
            f"round-trip 10^4 {roundtrip}, {runs} runs dst=src, markers {markers_ok}, "
            f"bound violations {violations}, RR max gap {gap}, deterministic {determinism_ok}")


def test_9_driver_flow(verdict):
    tb = Testbench(PRESETS["speculation"], MemoryConfig(one_way_latency=13))
    drv = DmaDriver(tb, 0x1000, 0x10000, max_chains=4)
    rng = random.Random(9)
    calls = []
    irq_chains = 0
    handles = []
    for c in range(10):
        want = rng.random() < 0.6
        irq_chains += want
        chain = []
        for k in range(rng.randint(1, 4)):
            i = len(handles)
            tb.memory.backdoor_write(0x100000 + 0x1000 * i, bytes([i]) * 256)
            h = drv.prepare_memcpy(0x100000 + 0x1000 * i, 0x300000 + 0x1000 * i, 256,
                                   want_irq=want, callback=calls.append)
            chain.append(h)
            handles.append(h)
        drv.commit(chain)
    drv.issue()
    drv.run()
    once = len(calls) == len(handles) == len({id(h) for h in calls})
    data = all(tb.memory.backdoor_read(0x300000 + 0x1000 * i, 256) == bytes([i]) * 256
               for i in range(len(handles)))
    ok = (drv.peak_active == 4 and drv.csr_writes == 10 and drv.active_chains == 0
          and once and data and tb.frontend.irq_count == irq_chains)
    verdict("9 driver throttles to 4 chains and completes all 10", ok,
            f"peak {drv.peak_active}, launches {drv.csr_writes}, callbacks {len(calls)}/"
            f"{len(handles)}, IRQs {tb.frontend.irq_count} for {irq_chains} IRQ chains")
