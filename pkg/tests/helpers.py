"""Small topologies and probes shared by the test modules."""

from __future__ import annotations

from labbench.engine import Engine
from labbench.topology import build_network, parse_topology


def two_hosts(bandwidth="10mbps", delay="0s", queue=64):
    return f"""
device A host
interface eth0
 ip address 10.0.0.1 255.255.255.0
device B host
interface eth0
 ip address 10.0.0.2 255.255.255.0
link A:eth0 B:eth0 bandwidth {bandwidth} delay {delay} queue {queue}
"""


def bottleneck(access="100mbps", wan="10mbps", queue=64, delay="1ms"):
    """A --access-- R --wan-- B; the R->B direction is the bottleneck."""
    return f"""
device A host
interface eth0
 ip address 10.0.1.10 255.255.255.0
device R router
interface Fa0/0
 ip address 10.0.1.1 255.255.255.0
interface Se0/0
 ip address 10.0.2.1 255.255.255.0
device B host
interface eth0
 ip address 10.0.2.10 255.255.255.0
link A:eth0 R:Fa0/0 bandwidth {access} delay 0s queue 100000
link R:Se0/0 B:eth0 bandwidth {wan} delay {delay} queue {queue}
"""


def server_with_vm(cores=1, vm_ram="1gb", footprint="0", cpu_fixed=1, cpu_per_byte=0,
                   kind="db", bandwidth="1gbps", disk="", resp="", delay="0s"):
    disk_line = f"disk {disk}" if disk else ""
    resp_opt = f" resp {resp}" if resp else ""
    return f"""
device PC1 host
interface eth0
 ip address 10.0.0.10 255.255.255.0
device S1 server
interface eth0
 ip address 10.0.0.20 255.255.255.0
cores 8
ram 16gb
{disk_line}
link PC1:eth0 S1:eth0 bandwidth {bandwidth} delay {delay} queue 1024
vm VM1 host S1 cores {cores} ram {vm_ram} ip 10.0.0.21
service VM1 svc {kind} cpu_fixed {cpu_fixed} cpu_per_byte {cpu_per_byte} footprint {footprint}{resp_opt}
"""


def model(text):
    return build_network(parse_topology(text))


def engine(text, **kw):
    kw.setdefault("sample_interval", None)
    return Engine(model(text), **kw)


class Probe:
    """Stand-in flow that records what happens to its packets."""

    def __init__(self, fid=0):
        self.id = fid
        self.delivered = []
        self.dropped = []

    def on_deliver(self, engine, device, pkt):
        self.delivered.append((engine.now, device, pkt))

    def on_drop(self, engine, pkt, reason):
        self.dropped.append((engine.now, reason, pkt))


class Job:
    """Stand-in flow that submits one request straight to a VM when started."""

    def __init__(self, fid, vm, service="svc", request_size=100, response_size=100):
        self.id = fid
        self.vm = vm
        self.service = service
        self.request_size = request_size
        self.response_size = response_size
        self.finished = None
        self.failed = None
        self.result = None

    def start(self, engine):
        self.result = engine.cloud.admit_request(engine.cloud.vms[self.vm], self)

    def respond(self, engine, vm, size):
        self.finished = engine.now

    def fail(self, engine, reason):
        self.failed = reason
