"""Link latency modeling: heavy-tailed samplers, multi-horizon EMAs, and
the cluster-wide network latency matrix (NLM).

Latency draws come from an alpha-stable law fitted offline to 5G
measurements. Each link keeps load-average style EMAs over 1/5/15 minute
horizons; their weighted sum is the composite score used to rank links.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NotReadyError, TimeRegressionError

PASS = "pass"
WARNING = "warning"
CRITICAL = "critical"

#: EMA horizons in seconds (1, 5, 15 minutes).
EMA_HORIZONS_S = (60.0, 300.0, 900.0)

DEFAULT_FLOOR_MS = 0.1
DEFAULT_LINK_BUDGET_MS = 50.0


@dataclass(frozen=True)
class StableParams:
    """Parameters of an alpha-stable law, S1 parameterization.

    ``location`` is the mean when ``alpha > 1`` and ``beta == 0``.
    """

    alpha: float
    beta: float = 0.0
    scale: float = 1.0
    location: float = 0.0

    def validate(self) -> None:
        if not (0.0 < self.alpha <= 2.0):
            raise ConfigurationError(f"alpha must be in (0, 2], got {self.alpha}")
        if not (-1.0 <= self.beta <= 1.0):
            raise ConfigurationError(f"beta must be in [-1, 1], got {self.beta}")
        if not (self.scale > 0.0):
            raise ConfigurationError(f"scale must be > 0, got {self.scale}")


def _cms_standard(alpha: float, beta: float, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Chambers-Mallows-Stuck transform of (uniform, exponential) pairs.

    ``u`` is uniform on (-pi/2, pi/2), ``w`` exponential(1). Returns draws
    from the standard stable law (scale 1, location 0) in S1 form.
    """
    if alpha == 2.0:
        return 2.0 * np.sin(u) * np.sqrt(w)
    if alpha == 1.0:
        if beta == 0.0:
            return np.tan(u)
        bu = math.pi / 2.0 + beta * u
        return (2.0 / math.pi) * (
            bu * np.tan(u) - beta * np.log((math.pi / 2.0) * w * np.cos(u) / bu)
        )
    if beta == 0.0:
        return (
            np.sin(alpha * u)
            / np.cos(u) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)
        )
    theta0 = math.atan(beta * math.tan(math.pi * alpha / 2.0)) / alpha
    factor = (1.0 + beta**2 * math.tan(math.pi * alpha / 2.0) ** 2) ** (1.0 / (2.0 * alpha))
    return (
        factor
        * np.sin(alpha * (u + theta0))
        / np.cos(u) ** (1.0 / alpha)
        * (np.cos(u - alpha * (u + theta0)) / w) ** ((1.0 - alpha) / alpha)
    )


def sample_stable_many(
    params: StableParams,
    rng: np.random.Generator,
    n: int,
    floor_ms: float = DEFAULT_FLOOR_MS,
) -> np.ndarray:
    """Draw ``n`` latencies in ms, clamped below at ``floor_ms``.

    Consumes exactly 2n uniforms from ``rng`` in (u, w) pair order, so a
    vectorized call matches n successive scalar calls on the same stream.
    Clamping (rather than resampling) keeps the draw count deterministic.
    """
    params.validate()
    draws = rng.random((n, 2))
    u = math.pi * (draws[:, 0] - 0.5)
    # tiny floor keeps the w=0 corner (probability 2^-53) off the division path
    w = np.maximum(-np.log(1.0 - draws[:, 1]), 1e-300)
    x = _cms_standard(params.alpha, params.beta, u, w)
    if params.alpha == 1.0 and params.beta != 0.0:
        shift = params.location + (2.0 / math.pi) * params.beta * params.scale * math.log(params.scale)
    else:
        shift = params.location
    out = params.scale * x + shift
    return np.maximum(out, floor_ms)


def sample_stable(
    params: StableParams,
    rng: np.random.Generator,
    floor_ms: float = DEFAULT_FLOOR_MS,
) -> float:
    """Draw a single latency in ms from the stable law."""
    return float(sample_stable_many(params, rng, 1, floor_ms=floor_ms)[0])


@dataclass(frozen=True)
class EmaState:
    """Smoothed latency over the three horizons, in ms."""

    ema_1m: float = 0.0
    ema_5m: float = 0.0
    ema_15m: float = 0.0
    last_update: float = 0.0
    initialized: bool = False


def ema_update(state: EmaState, sample_ms: float, now_s: float) -> EmaState:
    """Fold one latency sample into the EMAs using continuous-time decay.

    Each horizon h decays as ``ema <- sample + (ema - sample) * exp(-dt/h)``,
    which makes the result independent of tick granularity for a constant
    sample stream.
    """
    if not state.initialized:
        return EmaState(sample_ms, sample_ms, sample_ms, now_s, True)
    if now_s < state.last_update:
        raise TimeRegressionError(
            f"update at t={now_s} precedes last update t={state.last_update}"
        )
    dt = now_s - state.last_update
    emas = []
    for ema, h in zip((state.ema_1m, state.ema_5m, state.ema_15m), EMA_HORIZONS_S):
        emas.append(sample_ms + (ema - sample_ms) * math.exp(-dt / h))
    return EmaState(emas[0], emas[1], emas[2], now_s, True)


@dataclass(frozen=True)
class EmaWeights:
    """Horizon weights for the composite score; longer horizons weigh more."""

    w_1m: float = 0.2
    w_5m: float = 0.3
    w_15m: float = 0.5

    def validate(self) -> None:
        ws = (self.w_1m, self.w_5m, self.w_15m)
        if any(w < 0 for w in ws):
            raise ConfigurationError(f"EMA weights must be >= 0, got {ws}")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise ConfigurationError(f"EMA weights must sum to 1, got {sum(ws)}")
        if not (self.w_1m <= self.w_5m <= self.w_15m):
            raise ConfigurationError(
                f"EMA weights must be non-decreasing with horizon, got {ws}"
            )


def composite_score(state: EmaState, weights: EmaWeights) -> float:
    """Weighted sum of the three EMAs; lower is a better link."""
    if not state.initialized:
        raise NotReadyError("composite score requested before any sample")
    return (
        weights.w_1m * state.ema_1m
        + weights.w_5m * state.ema_5m
        + weights.w_15m * state.ema_15m
    )


def classify_link(
    score_ms: float,
    budget_ms: float,
    warn_fraction: float = 0.75,
    critical_fraction: float = 0.90,
) -> str:
    """Rank a link score against its latency budget.

    Reuses the QoS fractions: below 75% of budget is pass, above 90% is
    critical, boundaries fall into warning.
    """
    if budget_ms <= 0:
        raise ConfigurationError(f"link budget must be > 0, got {budget_ms}")
    if score_ms < warn_fraction * budget_ms:
        return PASS
    if score_ms > critical_fraction * budget_ms:
        return CRITICAL
    return WARNING


@dataclass
class LinkState:
    """Mutable bookkeeping for one (bidirectional) link."""

    params: StableParams
    floor_ms: float = DEFAULT_FLOOR_MS
    budget_ms: float = DEFAULT_LINK_BUDGET_MS
    ema: EmaState = field(default_factory=EmaState)
    latest_ms: float | None = None
    status: str = PASS


class Nlm:
    """Network latency matrix over all edge<->edge and edge<->device pairs.

    Both orders of a pair are registered and alias the same underlying
    state, so coverage is symmetric by construction. Owned by the event
    loop; queries are pure reads.
    """

    def __init__(self, weights: EmaWeights | None = None):
        self.weights = weights or EmaWeights()
        self.weights.validate()
        self._links: dict[tuple[str, str], LinkState] = {}

    def add_link(
        self,
        a: str,
        b: str,
        params: StableParams,
        floor_ms: float = DEFAULT_FLOOR_MS,
        budget_ms: float = DEFAULT_LINK_BUDGET_MS,
    ) -> None:
        if a == b:
            raise ConfigurationError(f"link endpoints must differ, got {a!r} twice")
        params.validate()
        state = LinkState(params=params, floor_ms=floor_ms, budget_ms=budget_ms)
        self._links[(a, b)] = state
        self._links[(b, a)] = state

    def has_link(self, a: str, b: str) -> bool:
        return (a, b) in self._links

    def link(self, a: str, b: str) -> LinkState:
        try:
            return self._links[(a, b)]
        except KeyError:
            raise ConfigurationError(f"no link registered between {a!r} and {b!r}") from None

    def pairs(self) -> list[tuple[str, str]]:
        """Canonical (sorted) endpoint pairs, one per physical link."""
        return sorted({tuple(sorted(k)) for k in self._links})

    def observe(self, a: str, b: str, sample_ms: float, now_s: float) -> None:
        """Record a measured latency on a link and refresh its status."""
        state = self.link(a, b)
        state.ema = ema_update(state.ema, sample_ms, now_s)
        state.latest_ms = sample_ms
        state.status = classify_link(composite_score(state.ema, self.weights), state.budget_ms)

    def sample_and_observe(
        self, a: str, b: str, rng: np.random.Generator, now_s: float
    ) -> float:
        """Draw one latency for a link and fold it into the EMAs."""
        state = self.link(a, b)
        sample = sample_stable(state.params, rng, floor_ms=state.floor_ms)
        self.observe(a, b, sample, now_s)
        return sample

    def score(self, a: str, b: str) -> float:
        """Composite score of the link, or +inf while uninitialized."""
        state = self.link(a, b)
        if not state.ema.initialized:
            return math.inf
        return composite_score(state.ema, self.weights)

    def status(self, a: str, b: str) -> str:
        return self.link(a, b).status

    def snapshot(self) -> dict[str, dict]:
        """Serializable view of every canonical link, sorted by endpoints."""
        out = {}
        for a, b in self.pairs():
            state = self._links[(a, b)]
            out[f"{a}|{b}"] = {
                "score_ms": None if not state.ema.initialized else composite_score(state.ema, self.weights),
                "latest_ms": state.latest_ms,
                "status": state.status,
                "budget_ms": state.budget_ms,
            }
        return out
