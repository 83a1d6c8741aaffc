"""Simulated service networking: registry, name lookups, gossip accounting.

The registry is a single authoritative map standing in for a full
control plane; consensus and membership gossip are abstracted to a
bandwidth accounting formula plus an optional propagation delay between
a health transition and its visibility to queries.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ConfigurationError, LookupParseError
from .net_model import Nlm

LOOKUP_SUFFIX = ("inference", "service", "consul")
_LABEL_RE = re.compile(r"^[a-z0-9-]+$")

HEALTHY = "healthy"
UNHEALTHY = "unhealthy"


@dataclass(frozen=True)
class LookupName:
    """Parsed service lookup of the form ``<service>.inference.service.consul``."""

    service: str
    labels: tuple[str, ...] = LOOKUP_SUFFIX

    def format(self) -> str:
        return ".".join((self.service,) + self.labels)


def parse_lookup(name: str) -> LookupName:
    """Parse a DNS-style lookup name.

    The grammar is exact and case-sensitive: a lowercase alphanumeric
    (plus hyphen) service label followed by ``inference.service.consul``.
    """
    labels = name.split(".")
    if len(labels) != 1 + len(LOOKUP_SUFFIX):
        raise LookupParseError(
            f"expected 4 labels <service>.{'.'.join(LOOKUP_SUFFIX)}, got {len(labels)} in {name!r}"
        )
    for label in labels:
        if not label:
            raise LookupParseError(f"empty label in {name!r}", label=label)
        if not _LABEL_RE.match(label):
            raise LookupParseError(
                f"label {label!r} must be lowercase alphanumeric or hyphen", label=label
            )
    service, *suffix = labels
    if tuple(suffix) != LOOKUP_SUFFIX:
        bad = next(s for s, want in zip(suffix, LOOKUP_SUFFIX) if s != want)
        raise LookupParseError(
            f"label {bad!r} does not match required suffix {'.'.join(LOOKUP_SUFFIX)!r}",
            label=bad,
        )
    return LookupName(service=service)


@dataclass
class ServiceRecord:
    """One (service, node) advertisement with its visible health."""

    service_name: str
    node_id: str
    status: str = HEALTHY
    pending_status: str | None = None
    pending_at: float = 0.0


class ServiceRegistry:
    """Authoritative map of advertised services, keyed (service, node).

    Health transitions become visible ``propagation_delay_s`` after they
    are reported, modeling control-plane dissemination lag (0 by default).
    """

    def __init__(self, propagation_delay_s: float = 0.0):
        if propagation_delay_s < 0:
            raise ConfigurationError("propagation delay must be >= 0")
        self.propagation_delay_s = propagation_delay_s
        self._records: dict[tuple[str, str], ServiceRecord] = {}

    def register(self, service_name: str, node_id: str) -> None:
        key = (service_name, node_id)
        if key not in self._records:
            self._records[key] = ServiceRecord(service_name, node_id)

    def set_health(self, service_name: str, node_id: str, healthy: bool, now_s: float) -> None:
        record = self._records.get((service_name, node_id))
        if record is None:
            raise ConfigurationError(
                f"service {service_name!r} is not registered on node {node_id!r}"
            )
        status = HEALTHY if healthy else UNHEALTHY
        if self.propagation_delay_s == 0.0:
            record.status = status
            record.pending_status = None
        elif status != self._visible_status(record, now_s):
            record.pending_status = status
            record.pending_at = now_s + self.propagation_delay_s

    def _visible_status(self, record: ServiceRecord, now_s: float) -> str:
        if record.pending_status is not None and now_s >= record.pending_at:
            record.status = record.pending_status
            record.pending_status = None
        return record.status

    def nodes_for(self, service_name: str, now_s: float = 0.0) -> list[tuple[str, str]]:
        """All (node_id, visible status) pairs advertising a service."""
        out = []
        for (svc, node_id), record in sorted(self._records.items()):
            if svc == service_name:
                out.append((node_id, self._visible_status(record, now_s)))
        return out

    def dump(self, now_s: float = 0.0) -> list[dict]:
        return [
            {
                "service": svc,
                "node": node,
                "status": self._visible_status(record, now_s),
            }
            for (svc, node), record in sorted(self._records.items())
        ]


def resolve(
    registry: ServiceRegistry,
    service_name: str,
    querying_id: str,
    nlm: Nlm,
    reachable: dict[str, bool],
    now_s: float = 0.0,
) -> list[str]:
    """Healthy, reachable providers of a service, best link first.

    Ordering is ascending composite link score from the querying device,
    ties broken by node id, so results are a stable total order for equal
    state. Unknown services resolve to an empty list.
    """
    candidates = []
    for node_id, status in registry.nodes_for(service_name, now_s):
        if status != HEALTHY or not reachable.get(node_id, False):
            continue
        score = nlm.score(node_id, querying_id) if nlm.has_link(node_id, querying_id) else float("inf")
        candidates.append((score, node_id))
    candidates.sort(key=lambda c: (c[0], c[1]))
    return [node_id for _, node_id in candidates]


def gossip_bandwidth(message_bytes: float, interval_s: float) -> float:
    """Control-plane bandwidth in kbps for one message per interval."""
    if interval_s <= 0:
        raise ConfigurationError(f"gossip interval must be > 0, got {interval_s}")
    if message_bytes < 0:
        raise ConfigurationError(f"message size must be >= 0, got {message_bytes}")
    return message_bytes * 8.0 / interval_s / 1000.0
