"""Provisioning and offload decisions.

Two placement policies are provided: the min-latency rule (healthy node
with the best composite link score to the requesting device) and the
weighted rule combining normalized CPU, accelerator, and network-latency
fitness. Victim selection on an overloaded node takes the instance with
the highest latest latency. All functions here are pure over snapshots;
the simulation engine owns the mutation and scheduling around them.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .device_model import NodeRuntime, predict_components
from .errors import AssignmentUnavailableError, ConfigurationError
from .net_model import Nlm, sample_stable
from .profiler_health import CRITICAL, ProfilerState

DEFAULT_COOL_DOWN_S = 5.0
DEFAULT_HANDOVER_OVERHEAD_MS = 50.0

POLICY_MIN_LATENCY = "min-latency"
POLICY_WEIGHTED = "weighted"
POLICIES = (POLICY_MIN_LATENCY, POLICY_WEIGHTED)

TRIGGER_SYSTEM = "system-critical"
TRIGGER_APP = "app-critical"


@dataclass(frozen=True)
class AllocationWeights:
    """Factors for the CPU, accelerator, and network fitness terms."""

    alpha: float = 0.3
    beta: float = 0.4
    gamma: float = 0.3

    def validate(self) -> None:
        ws = (self.alpha, self.beta, self.gamma)
        if any(w < 0 for w in ws):
            raise ConfigurationError(f"allocation weights must be >= 0, got {ws}")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise ConfigurationError(f"allocation weights must sum to 1, got {sum(ws)}")


@dataclass(frozen=True)
class NodeWeight:
    """Normalized fitness of one candidate node for a pending request."""

    node_id: str
    w_cpu: float
    w_ai: float
    w_nl: float
    w_combined: float


@dataclass
class MigrationRecord:
    """One instance move between nodes, including its transfer cost."""

    task_id: str
    from_node: str
    to_node: str
    trigger: str
    metadata_transfer_ms: float
    decided_at: float
    completed_at: float | None = None
    retried: bool = False
    abandoned: bool = False

    def validate(self) -> None:
        if self.from_node == self.to_node:
            raise ConfigurationError(
                f"migration of {self.task_id!r} must change nodes, got {self.from_node!r} twice"
            )


@dataclass(frozen=True)
class NodeStatus:
    """Decision-time view of a node's availability."""

    reachable: bool
    system_state: str

    @property
    def assignable(self) -> bool:
        return self.reachable and self.system_state != CRITICAL


def _eligible(statuses: dict[str, NodeStatus], exclude: tuple[str, ...] = ()) -> list[str]:
    return sorted(
        node_id
        for node_id, status in statuses.items()
        if status.assignable and node_id not in exclude
    )


def assign_node(statuses: dict[str, NodeStatus], end_device_id: str, nlm: Nlm) -> str:
    """Healthy, reachable node with the lowest link score to the device.

    Ties break lexicographically by node id. Links with no samples yet
    rank last (score +inf) but remain eligible.
    """
    candidates = _eligible(statuses)
    if not candidates:
        raise AssignmentUnavailableError(
            f"no healthy reachable node available for device {end_device_id!r}"
        )
    return min(candidates, key=lambda n: (_score(nlm, n, end_device_id), n))


def _score(nlm: Nlm, a: str, b: str) -> float:
    return nlm.score(a, b) if nlm.has_link(a, b) else math.inf


def select_offload_target(
    statuses: dict[str, NodeStatus],
    end_device_id: str,
    source_node: str,
    nlm: Nlm,
    exclude: tuple[str, ...] = (),
) -> str | None:
    """Best relocation target for an instance leaving ``source_node``.

    Ranks candidates by the sum of the candidate<->device and the
    candidate<->source link scores: the first leg carries the ongoing
    stream, the second the metadata handover. Returns None when no
    healthy node remains.
    """
    candidates = _eligible(statuses, exclude=(source_node, *exclude))
    if not candidates:
        return None
    return min(
        candidates,
        key=lambda n: (_score(nlm, n, end_device_id) + _score(nlm, n, source_node), n),
    )


def pick_victim(profiler: ProfilerState) -> str | None:
    """Instance with the highest latest latency; ties take the smaller id."""
    best: tuple[float, str] | None = None
    for task_id in profiler.task_ids():
        latest = profiler.latest(task_id)
        if latest is None:
            continue
        if best is None or latest > best[0] or (latest == best[0] and task_id < best[1]):
            best = (latest, task_id)
    return best[1] if best else None


def node_weights(
    nodes: dict[str, NodeRuntime],
    candidates: list[str],
    frame_size: int,
    end_device_id: str,
    nlm: Nlm,
    coeffs: AllocationWeights,
) -> dict[str, NodeWeight]:
    """Normalized fitness of each candidate for one pending request.

    Raw factors are inverse predicted CPU and accelerator latency at the
    post-admission instance count, and the inverse link score to the
    requesting device; each factor is divided by its maximum over the
    candidate set, so a common scaling of the raw inputs cancels.
    """
    coeffs.validate()
    if not candidates:
        raise AssignmentUnavailableError("no candidate nodes for weighting")
    raw: dict[str, tuple[float, float, float]] = {}
    for node_id in candidates:
        node = nodes[node_id]
        cpu_ms, accel_ms = predict_components(node.profile, frame_size, node.n_instances + 1)
        score = max(_score(nlm, node_id, end_device_id), 1e-9)
        raw[node_id] = (1.0 / cpu_ms, 1.0 / accel_ms, 0.0 if math.isinf(score) else 1.0 / score)
    maxima = [max(r[i] for r in raw.values()) for i in range(3)]
    out: dict[str, NodeWeight] = {}
    for node_id in candidates:
        normed = [
            (raw[node_id][i] / maxima[i]) if maxima[i] > 0 else 1.0 for i in range(3)
        ]
        combined = coeffs.alpha * normed[0] + coeffs.beta * normed[1] + coeffs.gamma * normed[2]
        out[node_id] = NodeWeight(node_id, normed[0], normed[1], normed[2], combined)
    return out


def assign_weighted(
    nodes: dict[str, NodeRuntime],
    statuses: dict[str, NodeStatus],
    frame_size: int,
    end_device_id: str,
    nlm: Nlm,
    coeffs: AllocationWeights,
    exclude: tuple[str, ...] = (),
) -> str:
    """Healthy node with the highest combined weight; ties lexicographic."""
    candidates = _eligible(statuses, exclude=exclude)
    if not candidates:
        raise AssignmentUnavailableError(
            f"no healthy reachable node available for device {end_device_id!r}"
        )
    weights = node_weights(nodes, candidates, frame_size, end_device_id, nlm, coeffs)
    return max(candidates, key=lambda n: (weights[n].w_combined, _neg_lex(n)))


def _neg_lex(node_id: str) -> tuple[int, ...]:
    # max() with lexicographic ties needs an inverted key
    return tuple(-ord(c) for c in node_id)


def migration_cost_ms(
    nlm: Nlm,
    rng: np.random.Generator,
    source: str,
    target: str,
    handover_overhead_ms: float = DEFAULT_HANDOVER_OVERHEAD_MS,
    now_s: float = 0.0,
) -> float:
    """Metadata transfer cost: one inter-node link draw plus fixed overhead."""
    link = nlm.link(source, target)
    sample = sample_stable(link.params, rng, floor_ms=link.floor_ms)
    nlm.observe(source, target, sample, now_s)
    return sample + handover_overhead_ms


def decision_digest(payload: dict) -> str:
    """Short stable digest of a decision's inputs, for the decision log."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]
