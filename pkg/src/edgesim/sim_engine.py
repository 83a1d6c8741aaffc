"""Deterministic discrete-event core.

One single-threaded event loop per run: frame arrivals from end-device
streams, per-instance service on the hosting node, periodic health
epochs driving the offload loop, fault windows, and metrics capture.
Runs are bit-reproducible for a fixed (scenario, seed): random streams
are split per purpose (one per link) from the master seed, so changes in
one component never perturb another's draws.
"""

from __future__ import annotations

import hashlib
import heapq
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import discovery
from .device_model import (
    InferenceTask,
    NodeRuntime,
    admit_task,
    preload_model,
    remove_task,
    service_request,
)
from .errors import AssignmentUnavailableError, ConfigurationError
from .net_model import Nlm
from .orchestrator import (
    POLICY_WEIGHTED,
    TRIGGER_APP,
    TRIGGER_SYSTEM,
    MigrationRecord,
    NodeStatus,
    assign_node,
    assign_weighted,
    decision_digest,
    migration_cost_ms,
    pick_victim,
    select_offload_target,
)
from .profiler_health import (
    CRITICAL,
    PASS,
    HealthState,
    ProfilerState,
    classify,
    evaluate_health,
    merge_since,
)
from .scenario import EndDevice, Scenario, validate

__all__ = [
    "Event",
    "EndDevice",
    "FrameRecord",
    "MetricsReport",
    "Simulation",
    "run",
    "schedule_health_epochs",
    "substream",
]

EVENT_FRAME_ARRIVAL = "frame-arrival"
EVENT_PROCESSING_COMPLETE = "processing-complete"
EVENT_HEALTH_EPOCH = "health-epoch"
EVENT_MIGRATION_COMPLETE = "migration-complete"
EVENT_NODE_FAULT = "node-fault"
EVENT_RUN_END = "run-end"

_TIME_EPS = 1e-9


@dataclass(frozen=True)
class Event:
    """Queue entry; pops in (time, sequence) order, sequence is unique."""

    time: float
    sequence: int
    kind: str
    payload: dict


def substream(master_seed: int, label: str) -> np.random.Generator:
    """Independent generator for one purpose, derived from the master seed."""
    digest = hashlib.sha256(label.encode()).digest()
    words = [int.from_bytes(digest[i : i + 8], "little") for i in range(0, 32, 8)]
    seq = np.random.SeedSequence([master_seed & (2**64 - 1), *words])
    return np.random.Generator(np.random.PCG64(seq))


def schedule_health_epochs(interval_s: float, duration_s: float) -> list[float]:
    """Epoch instants k * interval for k >= 1 up to and including duration."""
    if interval_s <= 0:
        raise ConfigurationError(f"health epoch interval must be > 0, got {interval_s}")
    times = []
    k = 1
    while k * interval_s <= duration_s + _TIME_EPS:
        times.append(k * interval_s)
        k += 1
    return times


@dataclass
class _Frame:
    frame_id: int
    task_id: str
    end_device_id: str
    frame_size_px: int
    qos_ms: float
    emitted_at: float
    dispatched_at: float | None = None
    dispatched_to: str | None = None
    arrived_at: float | None = None
    node: str | None = None
    engine_wait_ms: float = 0.0
    queue_node_ms: float = 0.0
    net_out_ms: float = 0.0
    net_back_ms: float = 0.0
    deferred: bool = False
    outcome: object = None


@dataclass
class _TaskState:
    task: InferenceTask
    device: EndDevice
    queue: deque = field(default_factory=deque)
    busy_frame: _Frame | None = None
    migration: MigrationRecord | None = None


@dataclass(frozen=True)
class FrameRecord:
    """One completed frame, all durations in ms."""

    frame_id: int
    task_id: str
    end_device: str
    node: str
    dispatched_to: str
    frame_size_px: int
    n_instances: int
    qos_ms: float
    emitted_at: float
    dispatched_at: float
    completed_at: float
    net_out_ms: float
    queueing_ms: float
    cpu_ms: float
    accel_ms: float
    model_load_ms: float
    processing_ms: float
    net_back_ms: float
    e2e_ms: float
    state: str

    def to_dict(self) -> dict:
        return {
            "frame_id": self.frame_id,
            "task_id": self.task_id,
            "end_device": self.end_device,
            "node": self.node,
            "dispatched_to": self.dispatched_to,
            "frame_size_px": self.frame_size_px,
            "n_instances": self.n_instances,
            "qos_ms": self.qos_ms,
            "emitted_at": self.emitted_at,
            "dispatched_at": self.dispatched_at,
            "completed_at": self.completed_at,
            "net_out_ms": self.net_out_ms,
            "queueing_ms": self.queueing_ms,
            "cpu_ms": self.cpu_ms,
            "accel_ms": self.accel_ms,
            "model_load_ms": self.model_load_ms,
            "processing_ms": self.processing_ms,
            "net_back_ms": self.net_back_ms,
            "e2e_ms": self.e2e_ms,
            "state": self.state,
        }


@dataclass
class MetricsReport:
    """Everything a run emits; serializable and deterministic."""

    seed: int
    policy: str
    offloading_enabled: bool
    duration_s: float
    frames: list[FrameRecord]
    migrations: list[MigrationRecord]
    counters: dict
    instance_series: dict[str, list[tuple[float, int]]]
    utilization: dict[str, float]
    breakdown: list[dict]
    health_transitions: list[dict]
    node_events: list[dict]
    decision_log: list[dict]
    nlm_snapshot: dict
    registry_dump: list[dict]
    gossip_kbps_per_node: float

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "policy": self.policy,
            "offloading_enabled": self.offloading_enabled,
            "duration_s": self.duration_s,
            "counters": dict(sorted(self.counters.items())),
            "gossip_kbps_per_node": self.gossip_kbps_per_node,
            "frames": [f.to_dict() for f in self.frames],
            "migrations": [
                {
                    "task_id": m.task_id,
                    "from_node": m.from_node,
                    "to_node": m.to_node,
                    "trigger": m.trigger,
                    "metadata_transfer_ms": m.metadata_transfer_ms,
                    "decided_at": m.decided_at,
                    "completed_at": m.completed_at,
                    "retried": m.retried,
                    "abandoned": m.abandoned,
                }
                for m in self.migrations
            ],
            "instance_series": {k: [list(p) for p in v] for k, v in sorted(self.instance_series.items())},
            "utilization": dict(sorted(self.utilization.items())),
            "breakdown": self.breakdown,
            "health_transitions": self.health_transitions,
            "node_events": self.node_events,
            "decision_log": self.decision_log,
            "nlm": self.nlm_snapshot,
            "registry": self.registry_dump,
        }


class Simulation:
    """One deterministic run of a scenario."""

    def __init__(self, scenario: Scenario, seed: int | None = None):
        errors = validate(scenario)
        if errors:
            raise ConfigurationError("invalid scenario:\n  " + "\n  ".join(errors))
        self.scenario = scenario
        self.seed = scenario.sim.seed if seed is None else seed
        self.now = 0.0
        self._sequence = 0
        self._queue: list[tuple[float, int, Event]] = []
        self._streams: dict[str, np.random.Generator] = {}

        orch = scenario.orchestrator
        self.policy = orch.policy
        self.offloading = orch.offloading_enabled
        self.warn_fraction = orch.warn_fraction
        self.critical_fraction = orch.critical_fraction

        self.nodes: dict[str, NodeRuntime] = {}
        self.profilers: dict[str, ProfilerState] = {}
        self.health: dict[str, HealthState] = {}
        self._ok_since: dict[str, float | None] = {}
        self.tasks: dict[str, _TaskState] = {}
        # at most one undispatched frame per task: a live stream's stale
        # frames are superseded by newer ones, never replayed as a burst
        self.pending: dict[str, _Frame] = {}
        self.records: list[FrameRecord] = []
        self.migrations: list[MigrationRecord] = []
        self.decision_log: list[dict] = []
        self.health_transitions: list[dict] = []
        self.node_events: list[dict] = []
        self.instance_series: dict[str, list[tuple[float, int]]] = {}
        self.busy_ms: dict[str, float] = {}
        self.counters = {
            "frames_generated": 0,
            "frames_completed": 0,
            "qos_violations": 0,
            "migrations": 0,
            "assignment_failures": 0,
            "failed_offloads": 0,
            "deferred_frames": 0,
            "frames_dispatched_to_unavailable": 0,
        }
        self._finished = False

        self.services = sorted({d.service for d in scenario.end_devices})
        self.nlm = Nlm(weights=scenario.network.ema_weights)
        self.registry = discovery.ServiceRegistry()
        self._setup()

    # -- construction -------------------------------------------------

    def _setup(self) -> None:
        scenario = self.scenario
        for profile in sorted(scenario.devices, key=lambda p: p.name):
            self.nodes[profile.name] = NodeRuntime(profile=profile)
            self.profilers[profile.name] = ProfilerState(window=scenario.sim.profiler_window)
            self.health[profile.name] = HealthState(app_states={}, system_state=PASS)
            self._ok_since[profile.name] = 0.0
            self.instance_series[profile.name] = [(0.0, 0)]
            self.busy_ms[profile.name] = 0.0
            for service in self.services:
                self.registry.register(service, profile.name)
                if scenario.sim.preload_models:
                    preload_model(self.nodes[profile.name], service)

        node_names = sorted(self.nodes)
        net = scenario.network
        for i, a in enumerate(node_names):
            for b in node_names[i + 1 :]:
                self.nlm.add_link(a, b, net.edge_edge, floor_ms=net.floor_ms, budget_ms=net.link_budget_ms)
        for device in sorted(scenario.end_devices, key=lambda d: d.id):
            for name in node_names:
                self.nlm.add_link(name, device.id, net.edge_device, floor_ms=net.floor_ms, budget_ms=net.link_budget_ms)

        # prime every link with one probe so the matrix is total from t=0
        for a, b in self.nlm.pairs():
            self.nlm.sample_and_observe(a, b, self._link_stream(a, b), 0.0)

        for device in sorted(scenario.end_devices, key=lambda d: d.id):
            task = InferenceTask(
                task_id=f"task-{device.id}",
                end_device_id=device.id,
                frame_size_px=device.frame_size_px,
                qos_ms=device.qos_ms,
                service=device.service,
                created_at=device.start_s,
            )
            self.tasks[task.task_id] = _TaskState(task=task, device=device)

        # fault transitions first: at a shared instant the unavailability
        # window [at, at + duration) must already be in force for emissions
        # and epochs
        for fault in sorted(scenario.faults, key=lambda f: (f.at_s, f.node_id)):
            self.inject_fault(fault.node_id, fault.at_s, fault.duration_s)

        emissions: list[tuple[float, str]] = []
        for device in scenario.end_devices:
            k = 0
            while device.start_s + k / device.fps < scenario.sim.duration_s - _TIME_EPS:
                emissions.append((device.start_s + k / device.fps, device.id))
                k += 1
        emissions.sort()
        for frame_id, (t, device_id) in enumerate(emissions):
            ts = self.tasks[f"task-{device_id}"]
            frame = _Frame(
                frame_id=frame_id,
                task_id=ts.task.task_id,
                end_device_id=device_id,
                frame_size_px=ts.task.frame_size_px,
                qos_ms=ts.task.qos_ms,
                emitted_at=t,
            )
            self._schedule(t, EVENT_FRAME_ARRIVAL, {"phase": "emit", "frame": frame})
        self.counters["frames_generated"] = len(emissions)

        for t in schedule_health_epochs(scenario.sim.health_epoch_interval_s, scenario.sim.duration_s):
            self._schedule(t, EVENT_HEALTH_EPOCH, {})
        self._schedule(scenario.sim.duration_s, EVENT_RUN_END, {})

    def inject_fault(self, node_id: str, at_s: float, duration_s: float) -> None:
        """Make a node unreachable during [at, at + duration)."""
        if node_id not in self.nodes:
            raise ConfigurationError(f"cannot fault unknown node {node_id!r}")
        if duration_s <= 0:
            return
        self._schedule(at_s, EVENT_NODE_FAULT, {"node": node_id, "action": "start"})
        self._schedule(at_s + duration_s, EVENT_NODE_FAULT, {"node": node_id, "action": "end"})

    def _schedule(self, time: float, kind: str, payload: dict) -> None:
        event = Event(time=time, sequence=self._sequence, kind=kind, payload=payload)
        self._sequence += 1
        heapq.heappush(self._queue, (event.time, event.sequence, event))

    def _link_stream(self, a: str, b: str) -> np.random.Generator:
        lo, hi = sorted((a, b))
        key = f"link:{lo}:{hi}"
        if key not in self._streams:
            self._streams[key] = substream(self.seed, key)
        return self._streams[key]

    # -- status helpers -----------------------------------------------

    def _statuses(self) -> dict[str, NodeStatus]:
        return {
            name: NodeStatus(node.reachable, self.health[name].system_state)
            for name, node in self.nodes.items()
        }

    def _dispatchable(self, name: str) -> bool:
        """Per-frame gate: managed clusters hold traffic from critical
        nodes; the unmanaged baseline only stops at hard faults."""
        if not self.nodes[name].reachable:
            return False
        return not self.offloading or self.health[name].system_state != CRITICAL

    def _log(self, kind: str, decision: str, reason: str, inputs: dict) -> None:
        self.decision_log.append(
            {
                "t": self.now,
                "kind": kind,
                "digest": decision_digest(inputs),
                "decision": decision,
                "reason": reason,
            }
        )

    # -- event loop ----------------------------------------------------

    def run(self) -> MetricsReport:
        while self._queue and not self._finished:
            time, _, event = heapq.heappop(self._queue)
            if time < self.now - _TIME_EPS:
                raise AssertionError(f"event at t={time} precedes clock t={self.now}")
            self.now = max(self.now, time)
            self._handle(event)
        return self._report()

    def _handle(self, event: Event) -> None:
        if event.kind == EVENT_FRAME_ARRIVAL:
            if event.payload["phase"] == "emit":
                self._on_emit(event.payload["frame"])
            else:
                self._on_at_node(event.payload["frame"])
        elif event.kind == EVENT_PROCESSING_COMPLETE:
            self._on_processing_complete(event.payload["frame"])
        elif event.kind == EVENT_HEALTH_EPOCH:
            self._on_health_epoch()
        elif event.kind == EVENT_MIGRATION_COMPLETE:
            self._on_migration_complete(event.payload["record"])
        elif event.kind == EVENT_NODE_FAULT:
            self._on_fault(event.payload["node"], event.payload["action"])
        elif event.kind == EVENT_RUN_END:
            self._finished = True
        else:
            raise AssertionError(f"unknown event kind {event.kind!r}")

    # -- frame path ----------------------------------------------------

    def _on_emit(self, frame: _Frame) -> None:
        ts = self.tasks[frame.task_id]
        if ts.task.host_node is None and ts.migration is None:
            self._try_assign(ts)
        self._dispatch_or_defer(frame)

    def _try_assign(self, ts: _TaskState) -> str | None:
        """Session establishment: resolve the service, pick a node, admit."""
        statuses = self._statuses()
        reachable = {name: s.reachable for name, s in statuses.items()}
        candidates = discovery.resolve(
            self.registry, ts.task.service, ts.device.id, self.nlm, reachable, self.now
        )
        restricted = {n: statuses[n] for n in candidates}
        try:
            if self.policy == POLICY_WEIGHTED:
                chosen = assign_weighted(
                    self.nodes,
                    restricted,
                    ts.task.frame_size_px,
                    ts.device.id,
                    self.nlm,
                    self.scenario.orchestrator.allocation_weights,
                )
            else:
                chosen = assign_node(restricted, ts.device.id, self.nlm)
        except AssignmentUnavailableError:
            return None
        admit_task(self.nodes[chosen], ts.task)
        self.profilers[chosen].register_task(ts.task.task_id, ts.task.qos_ms)
        self._record_instances(chosen)
        self._log(
            "assign",
            chosen,
            "initial-provisioning",
            {"task": ts.task.task_id, "candidates": candidates, "policy": self.policy},
        )
        return chosen

    def _dispatch_or_defer(self, frame: _Frame) -> None:
        ts = self.tasks[frame.task_id]
        host = ts.task.host_node
        if ts.migration is None and host is not None and self._dispatchable(host):
            self._dispatch(frame)
            return
        frame.deferred = True
        self.counters["deferred_frames"] += 1
        superseded = self.pending.get(frame.task_id)
        if superseded is not None:
            self._fail_frame(superseded, "superseded-by-newer-frame")
        self.pending[frame.task_id] = frame

    def _dispatch(self, frame: _Frame) -> None:
        ts = self.tasks[frame.task_id]
        host = ts.task.host_node
        if not self._dispatchable(host):
            # engine invariant: never dispatch to an unavailable node
            self.counters["frames_dispatched_to_unavailable"] += 1
            raise AssertionError(f"dispatch of frame {frame.frame_id} to unavailable node {host!r}")
        frame.dispatched_at = self.now
        frame.dispatched_to = host
        frame.engine_wait_ms = (self.now - frame.emitted_at) * 1000.0
        frame.net_out_ms = self.nlm.sample_and_observe(
            host, frame.end_device_id, self._link_stream(host, frame.end_device_id), self.now
        )
        self._schedule(
            self.now + frame.net_out_ms / 1000.0,
            EVENT_FRAME_ARRIVAL,
            {"phase": "at-node", "frame": frame},
        )

    def _on_at_node(self, frame: _Frame) -> None:
        ts = self.tasks[frame.task_id]
        frame.arrived_at = self.now
        ts.queue.append(frame)
        self._try_start(ts)

    def _try_start(self, ts: _TaskState) -> None:
        if (
            ts.busy_frame is not None
            or ts.migration is not None
            or ts.task.host_node is None
            or not ts.queue
        ):
            return
        node = self.nodes[ts.task.host_node]
        frame = ts.queue.popleft()
        outcome = service_request(node, ts.task, self.now)
        ts.busy_frame = frame
        frame.queue_node_ms = (self.now - frame.arrived_at) * 1000.0
        frame.node = node.name
        frame.outcome = outcome
        self.busy_ms[node.name] += outcome.total_processing_ms
        self._schedule(
            self.now + outcome.total_processing_ms / 1000.0,
            EVENT_PROCESSING_COMPLETE,
            {"frame": frame},
        )

    def _on_processing_complete(self, frame: _Frame) -> None:
        ts = self.tasks[frame.task_id]
        if ts.busy_frame is frame:
            ts.busy_frame = None
        elif ts.busy_frame is not None:
            # stray completion from before a migration; the instance is
            # already serving at the new host
            pass
        outcome = frame.outcome
        frame.net_back_ms = self.nlm.sample_and_observe(
            frame.node, frame.end_device_id, self._link_stream(frame.node, frame.end_device_id), self.now
        )
        queueing = frame.engine_wait_ms + frame.queue_node_ms
        e2e = frame.net_out_ms + queueing + outcome.total_processing_ms + frame.net_back_ms
        state = classify(e2e, frame.qos_ms, self.warn_fraction, self.critical_fraction)
        completed_at = self.now + frame.net_back_ms / 1000.0
        self.records.append(
            FrameRecord(
                frame_id=frame.frame_id,
                task_id=frame.task_id,
                end_device=frame.end_device_id,
                node=frame.node,
                dispatched_to=frame.dispatched_to,
                frame_size_px=frame.frame_size_px,
                n_instances=outcome.n_instances,
                qos_ms=frame.qos_ms,
                emitted_at=frame.emitted_at,
                dispatched_at=frame.dispatched_at,
                completed_at=completed_at,
                net_out_ms=frame.net_out_ms,
                queueing_ms=queueing,
                cpu_ms=outcome.cpu_ms,
                accel_ms=outcome.accel_ms,
                model_load_ms=outcome.model_load_ms,
                processing_ms=outcome.total_processing_ms,
                net_back_ms=frame.net_back_ms,
                e2e_ms=e2e,
                state=state,
            )
        )
        self.counters["frames_completed"] += 1
        if e2e > frame.qos_ms:
            self.counters["qos_violations"] += 1
        # The profiler's latency signal covers everything the node and the
        # network did to this frame: transfer legs, waiting at the node,
        # and processing. Pre-dispatch engine wait stays in the
        # user-perceived e2e (and the violation counter) but not in the
        # health signal: it measures the outage the orchestrator is
        # already reacting to, not the node receiving the retried frame.
        if frame.task_id in self.nodes[frame.node].active_tasks:
            service_latency = e2e - frame.engine_wait_ms
            self.profilers[frame.node].record_inference(frame.task_id, service_latency, self.now)
        self._try_start(ts)

    # -- health epochs and the offload loop -----------------------------

    def _on_health_epoch(self) -> None:
        for a, b in self.nlm.pairs():
            self.nlm.sample_and_observe(a, b, self._link_stream(a, b), self.now)

        for name in sorted(self.nodes):
            new = evaluate_health(self.profilers[name], self.warn_fraction, self.critical_fraction)
            prev = self.health.get(name)
            self._log_transitions(name, prev, new)
            self.health[name] = merge_since(prev, new, self.now)
            healthy = new.system_state != CRITICAL
            for service in self.services:
                self.registry.set_health(service, name, healthy, self.now)

        if self.offloading:
            self._manage_quarantine()
            self._offload_pass()
        self._drain_pending()

    def _log_transitions(self, name: str, prev: HealthState | None, new: HealthState) -> None:
        prev_sys = prev.system_state if prev else PASS
        if new.system_state != prev_sys:
            self.health_transitions.append(
                {"t": self.now, "node": name, "scope": "system", "from": prev_sys, "to": new.system_state}
            )
        prev_apps = prev.app_states if prev else {}
        for tid in sorted(new.app_states):
            before = prev_apps.get(tid, PASS)
            if new.app_states[tid] != before:
                self.health_transitions.append(
                    {"t": self.now, "node": name, "scope": tid, "from": before, "to": new.app_states[tid]}
                )

    def _manage_quarantine(self) -> None:
        cool_down = self.scenario.orchestrator.cool_down_s
        for name in sorted(self.nodes):
            node = self.nodes[name]
            state = self.health[name].system_state
            if state == CRITICAL:
                self._ok_since[name] = None
                if not node.quarantined and not node.faulted:
                    node.quarantined = True
                    self.node_events.append({"t": self.now, "node": name, "event": "quarantine"})
                    self._log("quarantine", name, "system-critical", {"node": name, "t": self.now})
            else:
                if self._ok_since[name] is None:
                    self._ok_since[name] = self.now
                if (
                    node.quarantined
                    and self.now - self._ok_since[name] >= cool_down - _TIME_EPS
                ):
                    node.quarantined = False
                    self.node_events.append({"t": self.now, "node": name, "event": "release"})
                    self._log("release", name, "cool-down-elapsed", {"node": name, "t": self.now})

    def _offload_pass(self) -> None:
        for name in sorted(self.nodes):
            node = self.nodes[name]
            if node.faulted and node.active_tasks:
                # a dead node loses all its instances at once
                for tid in sorted(node.active_tasks):
                    ts = self.tasks[tid]
                    if ts.migration is not None:
                        continue
                    self._migrate_or_count(ts, name, TRIGGER_SYSTEM)
            elif self.health[name].system_state == CRITICAL and not node.faulted:
                victim = pick_victim(self.profilers[name])
                if victim is not None and self.tasks[victim].migration is None:
                    self._migrate_or_count(self.tasks[victim], name, TRIGGER_SYSTEM)
        for name in sorted(self.nodes):
            node = self.nodes[name]
            if node.faulted or self.health[name].system_state == CRITICAL:
                continue
            for tid in sorted(self.health[name].app_states):
                if (
                    self.health[name].app_states[tid] == CRITICAL
                    and tid in node.active_tasks
                    and self.tasks[tid].migration is None
                ):
                    self._migrate_or_count(self.tasks[tid], name, TRIGGER_APP)

    def _select_target(
        self, ts: _TaskState, source: str, exclude: tuple[str, ...] = ()
    ) -> str | None:
        statuses = self._statuses()
        if self.policy == POLICY_WEIGHTED:
            try:
                return assign_weighted(
                    self.nodes,
                    statuses,
                    ts.task.frame_size_px,
                    ts.device.id,
                    self.nlm,
                    self.scenario.orchestrator.allocation_weights,
                    exclude=(source, *exclude),
                )
            except AssignmentUnavailableError:
                return None
        return select_offload_target(statuses, ts.device.id, source, self.nlm, exclude=exclude)

    def _migrate_or_count(self, ts: _TaskState, source: str, trigger: str) -> None:
        target = self._select_target(ts, source)
        if target is None:
            self.counters["failed_offloads"] += 1
            self._log(
                "offload-failed",
                ts.task.task_id,
                f"{trigger}: no healthy target",
                {"task": ts.task.task_id, "source": source},
            )
            return
        cost = migration_cost_ms(
            self.nlm,
            self._link_stream(source, target),
            source,
            target,
            self.scenario.orchestrator.handover_overhead_ms,
            self.now,
        )
        record = MigrationRecord(
            task_id=ts.task.task_id,
            from_node=source,
            to_node=target,
            trigger=trigger,
            metadata_transfer_ms=cost,
            decided_at=self.now,
        )
        record.validate()
        remove_task(self.nodes[source], ts.task.task_id)
        self.profilers[source].forget_task(ts.task.task_id)
        ts.task.host_node = None
        ts.migration = record
        self._record_instances(source)
        self._schedule(self.now + cost / 1000.0, EVENT_MIGRATION_COMPLETE, {"record": record})
        self._log(
            "migrate",
            f"{source}->{target}",
            trigger,
            {"task": ts.task.task_id, "source": source, "target": target, "cost_ms": cost},
        )

    def _on_migration_complete(self, record: MigrationRecord) -> None:
        ts = self.tasks[record.task_id]
        target = record.to_node
        node = self.nodes[target]
        if node.reachable and self.health[target].system_state != CRITICAL:
            admit_task(node, ts.task)
            self.profilers[target].register_task(ts.task.task_id, ts.task.qos_ms)
            ts.migration = None
            record.completed_at = self.now
            self.migrations.append(record)
            self.counters["migrations"] += 1
            self._record_instances(target)
            self._rebase_queue(ts)
            # frames still processing at the source finish there; the
            # instance at the new host starts fresh
            ts.busy_frame = None
            self._log(
                "migration-complete",
                target,
                record.trigger,
                {"task": record.task_id, "target": target},
            )
            self._drain_pending()
            self._try_start(ts)
            return
        if not record.retried:
            record.retried = True
            fallback = self._select_target(ts, record.from_node, exclude=(target,))
            if fallback is not None:
                extra = migration_cost_ms(
                    self.nlm,
                    self._link_stream(record.from_node, fallback),
                    record.from_node,
                    fallback,
                    self.scenario.orchestrator.handover_overhead_ms,
                    self.now,
                )
                record.to_node = fallback
                record.metadata_transfer_ms += extra
                self._schedule(self.now + extra / 1000.0, EVENT_MIGRATION_COMPLETE, {"record": record})
                self._log(
                    "migration-retry",
                    f"{record.from_node}->{fallback}",
                    "target-became-unavailable",
                    {"task": record.task_id, "failed_target": target, "fallback": fallback},
                )
                return
        # no target left: the instance returns to where it was
        record.abandoned = True
        self.migrations.append(record)
        self.counters["failed_offloads"] += 1
        source = self.nodes[record.from_node]
        source.active_tasks[record.task_id] = ts.task
        ts.task.host_node = record.from_node
        self.profilers[record.from_node].register_task(ts.task.task_id, ts.task.qos_ms)
        ts.migration = None
        self._record_instances(record.from_node)
        self._rebase_queue(ts)
        self._log(
            "migration-abandoned",
            record.from_node,
            "no-healthy-target-on-retry",
            {"task": record.task_id},
        )
        self._try_start(ts)

    def _rebase_queue(self, ts: _TaskState) -> None:
        """Re-admission resets queued frames' waiting clocks: time spent in
        the handover is attributed to the outage, not to the new host."""
        for frame in ts.queue:
            frame.engine_wait_ms += (self.now - frame.arrived_at) * 1000.0
            frame.arrived_at = self.now

    def _on_fault(self, name: str, action: str) -> None:
        node = self.nodes[name]
        if action == "start":
            node.faulted = True
            self.node_events.append({"t": self.now, "node": name, "event": "fault-start"})
            self._log("fault", name, "fault-start", {"node": name, "t": self.now})
        else:
            node.faulted = False
            self.node_events.append({"t": self.now, "node": name, "event": "fault-end"})
            self._log("fault", name, "fault-end", {"node": name, "t": self.now})

    # -- deferred frames -------------------------------------------------

    def _drain_pending(self) -> None:
        if not self.pending:
            return
        statuses = self._statuses()
        healthy_exists = any(s.assignable for s in statuses.values())
        for task_id in sorted(self.pending):
            frame = self.pending[task_id]
            ts = self.tasks[task_id]
            if ts.migration is not None:
                continue
            host = ts.task.host_node
            if host is None:
                del self.pending[task_id]
                if self._try_assign(ts) is not None:
                    self._dispatch(frame)
                else:
                    self._fail_frame(frame, "no-healthy-node")
            elif self._dispatchable(host):
                del self.pending[task_id]
                self._dispatch(frame)
            elif not healthy_exists:
                del self.pending[task_id]
                self._fail_frame(frame, "no-healthy-node")

    def _fail_frame(self, frame: _Frame, reason: str) -> None:
        self.counters["assignment_failures"] += 1
        self._log(
            "assign-failed",
            f"frame-{frame.frame_id}",
            reason,
            {"frame": frame.frame_id, "task": frame.task_id},
        )

    # -- bookkeeping -----------------------------------------------------

    def _record_instances(self, name: str) -> None:
        self.instance_series[name].append((self.now, self.nodes[name].n_instances))

    def _report(self) -> MetricsReport:
        frames = sorted(self.records, key=lambda r: (r.completed_at, r.frame_id))
        in_flight = (
            self.counters["frames_generated"]
            - self.counters["frames_completed"]
            - self.counters["assignment_failures"]
        )
        self.counters["frames_in_flight_at_end"] = in_flight
        breakdown_map: dict[tuple[str, int, int], dict] = {}
        for record in frames:
            key = (record.node, record.frame_size_px, record.n_instances)
            agg = breakdown_map.setdefault(
                key,
                {"node": key[0], "frame_size_px": key[1], "n_instances": key[2],
                 "count": 0, "cpu_ms_total": 0.0, "accel_ms_total": 0.0, "e2e_ms_total": 0.0},
            )
            agg["count"] += 1
            agg["cpu_ms_total"] += record.cpu_ms
            agg["accel_ms_total"] += record.accel_ms
            agg["e2e_ms_total"] += record.e2e_ms
        breakdown = []
        for key in sorted(breakdown_map):
            agg = breakdown_map[key]
            count = agg["count"]
            breakdown.append(
                {
                    "node": agg["node"],
                    "frame_size_px": agg["frame_size_px"],
                    "n_instances": agg["n_instances"],
                    "count": count,
                    "mean_cpu_ms": agg["cpu_ms_total"] / count,
                    "mean_accel_ms": agg["accel_ms_total"] / count,
                    "mean_e2e_ms": agg["e2e_ms_total"] / count,
                }
            )
        duration_ms = self.scenario.sim.duration_s * 1000.0
        utilization = {name: self.busy_ms[name] / duration_ms for name in sorted(self.nodes)}
        gossip = self.scenario.network.gossip
        return MetricsReport(
            seed=self.seed,
            policy=self.policy,
            offloading_enabled=self.offloading,
            duration_s=self.scenario.sim.duration_s,
            frames=frames,
            migrations=self.migrations,
            counters=self.counters,
            instance_series=self.instance_series,
            utilization=utilization,
            breakdown=breakdown,
            health_transitions=self.health_transitions,
            node_events=self.node_events,
            decision_log=self.decision_log,
            nlm_snapshot=self.nlm.snapshot(),
            registry_dump=self.registry.dump(self.now),
            gossip_kbps_per_node=discovery.gossip_bandwidth(gossip.message_bytes, gossip.interval_s),
        )


def run(scenario: Scenario, seed: int | None = None) -> MetricsReport:
    """Simulate one scenario; fully deterministic for fixed inputs."""
    return Simulation(scenario, seed=seed).run()
