"""The ten acceptance criteria, each at its stated tolerance.

Every test records a PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion is reported with its measured value.
"""

from __future__ import annotations

import random
import time
from ipaddress import IPv4Interface, IPv4Network
from pathlib import Path

from conftest import ROOT
from helpers import Job, Probe, bottleneck, engine, server_with_vm, two_hosts
from oracles import lindley_mean_in_system, mm1_mean_in_system, ps_completions, serialization_time
from report import verdict

from labbench.events import EventKind
from labbench.scenario import ScenarioSpec, run_scenario
from labbench.stats import check_conservation, read_csv
from labbench.topology import build_network, emit_topology, parse_excerpt, parse_topology
from labbench.traffic import ArrivalModel, SizeDistribution, generate_workload

CORPUS = ROOT / "scenarios" / "corpus"
EXAMPLES = ROOT / "scenarios"


def _scenario(tmp_path: Path, topology: str, workload: str, *, control: str | None = None,
              until: float, seed: int = 0, interval: float = 1.0, suffix: str = ".txt", out="out"):
    (tmp_path / "topology.cfg").write_text(topology)
    wl = tmp_path / f"workload{suffix}"
    wl.write_text(workload)
    ctl = None
    if control is not None:
        ctl = tmp_path / "control.txt"
        ctl.write_text(control)
    spec = ScenarioSpec(tmp_path / "topology.cfg", wl, until, tmp_path / out, ctl, seed, interval)
    return spec, run_scenario(spec)


def _series(samples, obj, metric):
    return {s.time: s.value for s in samples if s.object == obj and s.metric == metric}


# 1 -------------------------------------------------------------------------


def test_c1_figure5_fidelity():
    started = time.perf_counter()
    verbatim = (CORPUS / "figure5_verbatim.txt").read_text()
    checks = []
    for label, doc in (
        ("verbatim", parse_excerpt(verbatim, "figure5_verbatim.txt")),
        ("corpus", parse_topology((CORPUS / "figure5.cfg").read_text(), "figure5.cfg")),
    ):
        r1, sw1 = doc.device("R1"), doc.device("SW1")
        subs = {i.name: i for i in r1.subinterfaces("FastEthernet0/1")}
        expected = {
            f"FastEthernet0/1.{v}": (v, v == 100, IPv4Interface(f"192.168.{v}.1/24")) for v in (100, 101, 102)
        }
        got = {n: (i.encapsulation.vlan_id, i.encapsulation.native, i.ip) for n, i in subs.items()}
        trunk = sw1.interface("FastEthernet0/1")
        again = parse_topology(emit_topology(doc))
        checks.append((label, got == expected, trunk.mode == "trunk",
                       trunk.allowed_vlans == frozenset({100, 101, 102}), again == doc))
    model = build_network(parse_topology((CORPUS / "figure5.cfg").read_text()))
    domains_ok = set(model.vlan_domains) == {100, 101, 102}
    subnets_ok = set(model.subnets) == {IPv4Network(f"192.168.{v}.0/24") for v in (100, 101, 102)}
    elapsed = time.perf_counter() - started
    ok = all(all(c[1:]) for c in checks) and domains_ok and subnets_ok and elapsed < 1.0
    verdict(1, "R1/SW1 excerpt fidelity", ok, f"{checks}, domains={domains_ok}, subnets={subnets_ok}, {elapsed:.3f}s")
    assert ok


# 2 -------------------------------------------------------------------------


def test_c2_serialization_exact():
    eng = engine(two_hosts("10mbps", "0s"))
    probe = Probe()
    eng.send(0.0, "A", "10.0.0.2", 1500, flow=probe)
    eng.run(1.0)
    arrival = probe.delivered[0][0]
    expected = 1500 * 8 / 1e7
    ok = arrival == expected == 0.0012 and float(serialization_time(1500, 10**7)) == arrival
    verdict(2, "serialization exactness", ok, f"arrival={arrival!r} expected={expected!r}")
    assert ok


# 3 -------------------------------------------------------------------------


def test_c3_conservation_from_csv(tmp_path):
    started = time.perf_counter()
    rng = random.Random(2024)
    seed = rng.randrange(2**31)
    spec = ScenarioSpec(
        EXAMPLES / "bench" / "topology.cfg", EXAMPLES / "bench" / "workload.gen", 70.0, tmp_path,
        EXAMPLES / "bench" / "control.txt", seed, 0.5,
    )
    result = run_scenario(spec)
    samples = read_csv(tmp_path / "stats.csv")
    check = check_conservation(samples)
    injected = max(_series(samples, "net", "packets_injected").values())
    drops = max(_series(samples, "net", "drops_queue_full").values())
    elapsed = time.perf_counter() - started
    ok = result.status == 0 and check.ok and injected >= 10**4 and drops > 0 and elapsed < 10
    verdict(3, "conservation", ok,
            f"seed={seed} instants={check.instants} failures={len(check.failures)} "
            f"injected={injected:.0f} queue_full={drops:.0f} {elapsed:.2f}s")
    assert ok


# 4 & 5 ---------------------------------------------------------------------

# 1500 B packets: 20 Mbps is one every 0.6 ms, 5 Mbps every 2.4 ms, 15 Mbps every 0.8 ms.
_SATURATE = "stream src=A dst=B fixed=1500 interval=0.0006 count=100000\n"
_TWO_CLASSES = (
    "stream src=A dst=B fixed=1500 interval=0.0024 count=25000 prio=7\n"
    "stream src=A dst=B fixed=1500 interval=0.0008 count=75000 prio=0\n"
)
_WAN = "link:R:Se0/0->B:eth0"


def test_c4_saturation_and_drops(tmp_path):
    spec, result = _scenario(tmp_path, bottleneck(queue=64), _SATURATE, until=60.0, suffix=".gen")
    samples = read_csv(spec.out_dir / "stats.csv")
    tx = _series(samples, _WAN, "bytes_tx")
    throughput = (tx[60.0] - tx[10.0]) * 8 / 50
    drops = _series(samples, _WAN, "drops_queue_full")[60.0]
    ok = result.status == 0 and abs(throughput - 10e6) <= 0.02 * 10e6 and drops > 0
    verdict(4, "saturation and drops", ok, f"throughput={throughput:.1f} bps drops_queue_full={drops:.0f}")
    assert ok


def test_c5_strict_priority(tmp_path):
    spec, result = _scenario(tmp_path, bottleneck(queue=64), _TWO_CLASSES, until=60.0, suffix=".gen")
    samples = read_csv(spec.out_dir / "stats.csv")
    hi = _series(samples, f"{_WAN}#p7", "drops_queue_full")[60.0]
    lo = _series(samples, f"{_WAN}#p0", "drops_queue_full")[60.0]
    total = _series(samples, _WAN, "drops_queue_full")[60.0]
    ok = result.status == 0 and hi == 0 and lo > 0 and total == lo
    verdict(5, "strict priority", ok, f"prio7 drops={hi:.0f} prio0 drops={lo:.0f}")
    assert ok


# 6 -------------------------------------------------------------------------


def test_c6_mm1_time_average():
    started = time.perf_counter()
    bandwidth = 1e8
    mean_bytes = 12500  # 1 ms mean service
    lam = 500.0  # rho = 0.5
    n = 100_000
    rng = random.Random(6)
    t, arrivals, sizes = 0.0, [], []
    for _ in range(n):
        t += rng.expovariate(lam)
        arrivals.append(t)
        sizes.append(max(1, round(rng.expovariate(1 / mean_bytes))))
    eng = engine(two_hosts("100mbps", "0s", queue=10**9), mtu=10**9)
    for a, s in zip(arrivals, sizes):
        eng.send(a, "A", "10.0.0.2", s)
    horizon = arrivals[-1]
    eng.run(horizon)
    d = eng.link("A:eth0").dirs[0]
    simulated = d.occupancy_integral(horizon) / horizon
    replayed = lindley_mean_in_system(arrivals, [s * 8 / bandwidth for s in sizes], horizon)
    analytic = mm1_mean_in_system(0.5)
    elapsed = time.perf_counter() - started
    ok = (
        eng.injected >= 10**5
        and abs(simulated - analytic) <= 0.10 * analytic
        and abs(simulated - replayed) <= 1e-6 * replayed
        and elapsed < 60
    )
    verdict(6, "M/M/1 sanity", ok,
            f"L_sim={simulated:.4f} L_lindley={replayed:.4f} analytic={analytic} packets={eng.injected} {elapsed:.2f}s")
    assert ok


# 7 -------------------------------------------------------------------------


def test_c7_control_halves_bandwidth(tmp_path):
    control = "t=30 set_bandwidth link=R:Se0/0 value=5mbps\n"
    spec, result = _scenario(tmp_path, bottleneck(queue=64), _SATURATE, control=control, until=60.0, suffix=".gen")
    samples = read_csv(spec.out_dir / "stats.csv")
    tx = _series(samples, _WAN, "bytes_tx")
    after = (tx[60.0] - tx[31.0]) * 8 / 29
    before = (tx[30.0] - tx[10.0]) * 8 / 20
    log = (spec.out_dir / "events.log").read_text().splitlines()
    applied = [line for line in log if line.split()[1] == "control"]
    ok = (
        result.status == 0
        and abs(after - 5e6) <= 0.02 * 5e6
        and len(applied) == 1
        and "kind=set_bandwidth" in applied[0]
        and applied[0].startswith("30.000000 ")
    )
    verdict(7, "control efficacy", ok, f"before={before:.1f} after={after:.1f} bps, control lines={len(applied)}")
    assert ok


# 8 -------------------------------------------------------------------------


def _ps_run(arrivals):
    eng = engine(server_with_vm(cores=1, cpu_fixed=1))
    jobs = [Job(i, "VM1") for i in range(len(arrivals))]
    for t, job in zip(arrivals, jobs):
        eng.schedule(t, EventKind.INJECT, job)
    eng.run(100.0)
    return [job.finished for job in jobs]


def test_c8_processor_sharing():
    together = _ps_run([0.0, 0.0])
    staggered = _ps_run([0.0, 0.5, 1.0])
    oracle = [float(x) for x in ps_completions([0, "1/2", 1], [1, 1, 1], cores=1)]
    ok = (
        together == [2.0, 2.0]
        and oracle == [1.75, 2.75, 3.0]
        and all(abs(a - b) <= 1e-9 for a, b in zip(staggered, oracle))
    )
    verdict(8, "processor sharing", ok, f"together={together} staggered={staggered} oracle={oracle}")
    assert ok


# 9 -------------------------------------------------------------------------


def test_c9_determinism(tmp_path):
    runs = {
        "figure5": (EXAMPLES / "figure5" / "workload.txt", None, 60.0),
        "bench": (EXAMPLES / "bench" / "workload.gen", EXAMPLES / "bench" / "control.txt", 70.0),
    }
    identical = {}
    for name, (wl, ctl, until) in runs.items():
        outs = []
        for k in range(2):
            out = tmp_path / f"{name}{k}"
            run_scenario(ScenarioSpec(EXAMPLES / name / "topology.cfg", wl, until, out, ctl, 7))
            outs.append(((out / "stats.csv").read_bytes(), (out / "events.log").read_bytes()))
        identical[name] = outs[0] == outs[1]

    poisson = [generate_workload(SizeDistribution.fixed(1000), ArrivalModel.poisson(5), 50, "A", "B", seed=s)
               for s in (1, 2)]
    fixed = [generate_workload(SizeDistribution.fixed(1000), ArrivalModel.fixed_interval(0.2), 50, "A", "B", seed=s)
             for s in (1, 2)]
    poisson_changes = poisson[0].entries != poisson[1].entries
    fixed_same = fixed[0].entries == fixed[1].entries

    out_a, out_b = tmp_path / "seedA", tmp_path / "seedB"
    bench = EXAMPLES / "bench"
    run_scenario(ScenarioSpec(bench / "topology.cfg", bench / "workload.gen", 70.0, out_a, None, 1))
    run_scenario(ScenarioSpec(bench / "topology.cfg", bench / "workload.gen", 70.0, out_b, None, 2))
    scenario_changes = (out_a / "stats.csv").read_bytes() != (out_b / "stats.csv").read_bytes()

    ok = all(identical.values()) and poisson_changes and fixed_same and scenario_changes
    verdict(9, "determinism", ok,
            f"identical={identical} poisson_changes={poisson_changes} fixed_same={fixed_same} "
            f"seeded_scenario_changes={scenario_changes}")
    assert ok


# 10 ------------------------------------------------------------------------


def test_c10_ram_admission(tmp_path):
    topo = server_with_vm(cores=1, vm_ram="1gb", footprint="600mb", cpu_fixed=1)
    workload = (
        "t=0 src=PC1 dst=VM1:svc kind=query size=200 resp=1000\n"
        "t=0 src=PC1 dst=VM1:svc kind=query size=200 resp=1000\n"
    )
    spec, result = _scenario(tmp_path, topo, workload, until=10.0, interval=0.1)
    samples = read_csv(spec.out_dir / "stats.csv")
    log = (spec.out_dir / "events.log").read_text().splitlines()
    rejects = [line for line in log if line.split()[1] == "reject"]
    failed = [line for line in log if line.split()[1] == "flow_failed"]
    used = _series(samples, "vm:VM1", "ram_used")
    alloc = _series(samples, "vm:VM1", "ram_alloc")
    within = all(used[t] <= alloc[t] for t in used)
    peak = max(used.values())
    ok = (
        result.status == 0
        and len(rejects) == 1 and "reason=ram_exhausted" in rejects[0]
        and len(failed) == 1 and "reason=ram_exhausted" in failed[0]
        and within and peak == 600e6
    )
    verdict(10, "RAM admission", ok, f"rejects={len(rejects)} failed={len(failed)} peak_ram_used={peak:.0f} within={within}")
    assert ok
