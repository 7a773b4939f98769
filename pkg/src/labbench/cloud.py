"""Servers and VMs serving requests under egalitarian processor sharing.

With ``k`` requests in their CPU phase on a VM with ``c`` cores, each one
progresses at ``min(c, k) / k`` core-seconds per second, so no request ever
gets more than one core. File requests additionally wait for their disk
read, ``response_size / disk_rate`` after admission; CPU and disk overlap, so
completion is the later of the two.
"""

from __future__ import annotations

from .cloud_specs import ResponseRule, ServiceSpec, VmSpec  # noqa: F401  (re-exported)
from .errors import UnknownService
from .events import EventKind

ACCEPTED = "accepted"
REJECTED = "rejected"

# remaining work below this (relative to the request's total) counts as done
_WORK_EPS = 1e-12


class ActiveRequest:
    __slots__ = ("flow", "service", "arrived", "work", "remaining_work", "ram_held", "disk_ready",
                 "response_size", "consumed")

    def __init__(self, flow, service, arrived, work, ram_held, disk_ready, response_size):
        self.flow = flow
        self.service = service
        self.arrived = arrived
        self.work = work
        self.remaining_work = work
        self.ram_held = ram_held
        self.disk_ready = disk_ready
        self.response_size = response_size
        self.consumed = 0.0


class VmState:
    def __init__(self, spec: VmSpec, server):
        self.spec = spec
        self.name = spec.name
        self.host = spec.host
        self.server = server
        self.address = int(spec.address)
        self.alloc_cores = spec.alloc_cores
        self.alloc_ram = spec.alloc_ram
        self.ram_used = 0
        self.requests: dict[int, ActiveRequest] = {}
        self.cpu: list[ActiveRequest] = []  # requests still needing CPU
        self.last_update = 0.0
        self.generation = 0
        self.target: ActiveRequest | None = None  # CPU request the pending event finishes
        self.rejects = 0
        self.completed = 0

    def rate(self) -> float:
        k = len(self.cpu)
        return min(self.alloc_cores, k) / k if k else 0.0


class CloudRuntime:
    """All VM state of one engine; mutated only from its event loop."""

    def __init__(self, engine, model):
        self.engine = engine
        self.servers = {name: dev for name, dev in model.devices.items() if dev.kind == "server"}
        self.vms: dict[str, VmState] = {}
        for spec in model.vms:
            self.vms[spec.name] = VmState(spec, self.servers[spec.host])
        self.by_address = {vm.address: vm for vm in self.vms.values()}

    def vm(self, name: str) -> VmState:
        return self.vms[name]

    # ---------------------------------------------------------------- requests

    def admit_request(self, vm: VmState, flow) -> str:
        """Accept the flow's request if its RAM footprint fits, else reject it."""
        service = vm.spec.service(flow.service)
        if service is None:
            raise UnknownService(f"{vm.name}:{flow.service}")
        engine = self.engine
        now = engine.now
        if vm.ram_used + service.ram_footprint > vm.alloc_ram:
            vm.rejects += 1
            engine.stats.log_event(now, "reject", vm=vm.name, flow=flow.id, reason="ram_exhausted")
            flow.fail(engine, "ram_exhausted")
            return REJECTED
        resp = service.response_size(flow.request_size, flow.response_size)
        disk_ready = now
        if service.kind == "file" and vm.server.disk_rate:
            disk_ready = now + resp / vm.server.disk_rate
        req = ActiveRequest(flow, service, now, service.work(resp), service.ram_footprint, disk_ready, resp)
        self.service_progress(vm)
        vm.ram_used += req.ram_held
        vm.requests[flow.id] = req
        if req.work > 0:
            vm.cpu.append(req)
        self._reschedule(vm)
        return ACCEPTED

    def service_progress(self, vm: VmState) -> None:
        """Advance every CPU-phase request to the engine clock."""
        now = self.engine.now
        dt = now - vm.last_update
        if dt > 0 and vm.cpu:
            step = dt * vm.rate()
            for req in vm.cpu:
                req.remaining_work -= step
                req.consumed += step
        vm.last_update = now

    def _reschedule(self, vm: VmState) -> None:
        vm.generation += 1
        now = self.engine.now
        best = None
        vm.target = None
        if vm.cpu:
            rate = vm.rate()
            vm.target = min(vm.cpu, key=lambda r: (r.remaining_work, r.flow.id))
            best = now + max(vm.target.remaining_work, 0.0) / rate
        for req in vm.requests.values():
            if req.remaining_work <= 0 and req.disk_ready > now and (best is None or req.disk_ready < best):
                best = req.disk_ready
                vm.target = None
        if best is not None:
            self.engine.schedule(max(best, now), EventKind.SERVICE_COMPLETE, (vm, vm.generation))

    def on_service_event(self, payload) -> None:
        vm, generation = payload
        if generation != vm.generation:
            return  # superseded by a later reschedule
        self.service_progress(vm)
        now = self.engine.now
        if vm.cpu:
            still = []
            for req in vm.cpu:
                # the request this event was scheduled for is done by construction
                if req is vm.target or req.remaining_work <= _WORK_EPS * max(1.0, req.work):
                    req.consumed += req.remaining_work
                    req.remaining_work = 0.0
                else:
                    still.append(req)
            vm.cpu = still
        finished = [
            r for r in vm.requests.values() if r.remaining_work <= 0 and r.disk_ready <= now
        ]
        for req in sorted(finished, key=lambda r: r.flow.id):
            self.complete_request(vm, req)
        self._reschedule(vm)

    def complete_request(self, vm: VmState, req: ActiveRequest) -> None:
        """Release the request's RAM and send its response back to the client."""
        del vm.requests[req.flow.id]
        vm.ram_used -= req.ram_held
        vm.completed += 1
        req.flow.respond(self.engine, vm, req.response_size)

    # ---------------------------------------------------------------- resources

    def vm_metrics(self, vm: VmState) -> dict[str, float]:
        return {
            "cpu_alloc": vm.alloc_cores,
            "cpu_used": min(vm.alloc_cores, len(vm.cpu)),
            "ram_alloc": vm.alloc_ram,
            "ram_used": vm.ram_used,
            "active_requests": len(vm.requests),
            "rejects_ram": vm.rejects,
        }

    def set_cores(self, vm: VmState, cores: int) -> None:
        if cores < 1:
            raise ValueError("a VM needs at least one core")
        others = sum(v.alloc_cores for v in self.vms.values() if v.host == vm.host and v is not vm)
        if others + cores > vm.server.cores:
            raise ValueError(f"server {vm.host} has {vm.server.cores} cores; {others} already allocated")
        self.service_progress(vm)
        vm.alloc_cores = cores
        self._reschedule(vm)

    def set_ram(self, vm: VmState, ram: int) -> None:
        if ram < vm.ram_used:
            raise ValueError(f"{vm.name} uses {vm.ram_used} bytes; cannot shrink to {ram}")
        others = sum(v.alloc_ram for v in self.vms.values() if v.host == vm.host and v is not vm)
        if others + ram > vm.server.ram:
            raise ValueError(f"server {vm.host} has {vm.server.ram} bytes RAM; {others} already allocated")
        vm.alloc_ram = ram
