"""Gated coincidence selection and the joint correlation it induces.

The selection rule keeps exactly the cross-port pairs that share a
polarization basis at opposite frequency branches; bunched (same-port) and
cross-polarization outcomes are discarded.  Behind both analyzers the two
surviving product terms add coherently, which turns two independent local
angles into the joint fringe cos^2(xi + theta) with the detuning phase
cancelled.

The Monte Carlo side assigns each generated pair an outcome class whose
probabilities come from squaring the summed route amplitudes; the test
suite pins these constants against an independent brute-force enumeration
of the routing tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .interferometer import EraserSetting, PairSetting
from .optics import FieldState, ModeLabel, Path, Port
from .source import PairBatch, PairEvent


@dataclass(frozen=True)
class SelectionRule:
    """Acceptance predicate over the two detected mode tags.

    The first tag is the port A (D1) component, the second the port B (D2)
    component; being called on a cross-port pair is implicit in the
    signature.
    """

    name: str
    predicate: Callable[[ModeLabel, ModeLabel], bool]

    def accepts(self, tag_a: ModeLabel, tag_b: ModeLabel) -> bool:
        return self.predicate(tag_a, tag_b)

    @staticmethod
    def heterodyne() -> "SelectionRule":
        """Same polarization, opposite branch, opposite arm of origin."""

        def accept(a: ModeLabel, b: ModeLabel) -> bool:
            return a.pol is b.pol and a.detune is not b.detune and a.path is not b.path

        return SelectionRule("heterodyne", accept)

    @staticmethod
    def inverted() -> "SelectionRule":
        """Complement of the heterodyne rule (diagnostics only)."""
        base = SelectionRule.heterodyne()
        return SelectionRule("inverted", lambda a, b: not base.accepts(a, b))

    @staticmethod
    def cross_port_only() -> "SelectionRule":
        """Keep every cross-port pair; disables the heterodyne gating."""
        return SelectionRule("cross-port-only", lambda a, b: True)


@dataclass(frozen=True, slots=True)
class CoincidenceSetting:
    """Electronic side of the coincidence measurement.

    tau_si is the fixed delay between the two detector pulses, tau_c the
    ensemble coherence time (the inverse modulation bandwidth by default)
    and gate_window the matcher acceptance window.  The detector resolving
    time must stay below the gate window for the gating to mean anything.
    """

    tau_si: float = 0.0
    tau_c: float = 1.0e-6
    gate_window: float = 1.0e-9
    resolving_time: float = 1.0e-10

    def __post_init__(self):
        if not math.isfinite(self.tau_si) or self.tau_si < 0:
            raise ValueError("tau_si must be finite and non-negative")
        if not math.isfinite(self.tau_c) or self.tau_c <= 0:
            raise ValueError("tau_c must be positive")
        if not math.isfinite(self.gate_window) or self.gate_window <= 0:
            raise ValueError("gate window must be positive")
        if not math.isfinite(self.resolving_time) or self.resolving_time <= 0:
            raise ValueError("resolving time must be positive")
        if self.resolving_time >= self.gate_window:
            raise ValueError("detector resolving time must be shorter than the gate window")

    @classmethod
    def for_bandwidth(cls, delta_big: float, **kwargs) -> "CoincidenceSetting":
        return cls(tau_c=1.0 / delta_big, **kwargs)


@dataclass(frozen=True, slots=True)
class CorrelationEstimate:
    """Normalized coincidence rate with counting statistics.

    ``stat_error`` is one standard deviation; the consistency check against
    the physical range [0, 1] uses a six sigma band so that legitimate
    statistical excursions above 1 at the fringe peak do not raise.
    """

    r_normalized: float
    n_generated: int
    n_accepted: int
    stat_error: float

    def __post_init__(self):
        if self.n_accepted > self.n_generated:
            raise ValueError("accepted count cannot exceed generated count")
        if self.r_normalized < 0 or not math.isfinite(self.r_normalized):
            raise ValueError("normalized rate must be finite and non-negative")
        if self.stat_error < 0 or not math.isfinite(self.stat_error):
            raise ValueError("statistical error must be finite and non-negative")
        if self.r_normalized - 6.0 * self.stat_error > 1.0:
            raise ValueError("normalized rate is inconsistent with the range [0, 1]")


def heterodyne_product(e_s: FieldState, e_i: FieldState, rule: SelectionRule | None = None) -> complex:
    """Coherent sum of the rule-accepted terms of the two-port product.

    For the network fields this equals (i/4) e^{i s phi} cos(xi + theta):
    both surviving terms carry the same detuning phase, so the modulus is
    detuning-free.
    """
    if not isinstance(e_s, FieldState) or not isinstance(e_i, FieldState):
        raise TypeError("heterodyne_product needs FieldState term lists carrying mode tags")
    rule = rule or SelectionRule.heterodyne()
    total = 0j
    for tag_a, amp_a in e_s.terms():
        for tag_b, amp_b in e_i.terms():
            if rule.accepts(tag_a, tag_b):
                total += amp_a * amp_b
    return total


def correlation_r(setting: PairSetting, eraser: EraserSetting, coincidence: CoincidenceSetting) -> float:
    """Normalized joint correlation: exp(-2 tau_si / tau_c) cos^2(xi + theta).

    Normalized so the zero-delay, aligned-analyzer value is 1; independent
    of the pair's detuning and orientation (the branch phase is a common
    factor of the surviving terms and cancels in the modulus).
    """
    del setting  # detuning independence is the point; the signature keeps the knob visible
    envelope = math.exp(-2.0 * coincidence.tau_si / coincidence.tau_c)
    return envelope * math.cos(eraser.xi + eraser.theta) ** 2


class Outcome(Enum):
    """Joint detection outcome classes of one generated pair."""

    COINCIDENCE = "coincidence"                # one click each detector, rule-accepted
    REJECTED_COINCIDENCE = "rejected-coincidence"  # one click each detector, rule-rejected
    ONLY_D1 = "only-d1"
    ONLY_D2 = "only-d2"
    SAME_PORT_A = "same-port-a"
    SAME_PORT_B = "same-port-b"
    NO_CLICKS = "no-clicks"


def _cross_path_distribution(eraser: EraserSetting | None) -> dict[Outcome, float]:
    if eraser is None:
        return {
            Outcome.COINCIDENCE: 0.5,
            Outcome.REJECTED_COINCIDENCE: 0.0,
            Outcome.ONLY_D1: 0.0,
            Outcome.ONLY_D2: 0.0,
            Outcome.SAME_PORT_A: 0.25,
            Outcome.SAME_PORT_B: 0.25,
            Outcome.NO_CLICKS: 0.0,
        }
    # The two cross-port routes land in the same final mode pair and add
    # coherently; squaring the summed route amplitudes yields this split.
    c2 = math.cos(eraser.xi + eraser.theta) ** 2
    s2 = 1.0 - c2
    return {
        Outcome.COINCIDENCE: 0.25 * c2,
        Outcome.REJECTED_COINCIDENCE: 0.0,
        Outcome.ONLY_D1: 0.25 * s2,
        Outcome.ONLY_D2: 0.25 * s2,
        Outcome.SAME_PORT_A: 0.25,
        Outcome.SAME_PORT_B: 0.25,
        Outcome.NO_CLICKS: 0.25 * c2,
    }


def _same_path_distribution(path: Path, eraser: EraserSetting | None) -> dict[Outcome, float]:
    if eraser is None:
        return {
            Outcome.COINCIDENCE: 0.0,
            Outcome.REJECTED_COINCIDENCE: 0.5,
            Outcome.ONLY_D1: 0.0,
            Outcome.ONLY_D2: 0.0,
            Outcome.SAME_PORT_A: 0.25,
            Outcome.SAME_PORT_B: 0.25,
            Outcome.NO_CLICKS: 0.0,
        }
    if path is Path.PATH1:
        t_a = math.sin(eraser.xi) ** 2
        t_b = math.cos(eraser.theta) ** 2
    else:
        t_a = math.cos(eraser.xi) ** 2
        t_b = math.sin(eraser.theta) ** 2
    p_rej = 0.5 * t_a * t_b
    p_d1 = 0.5 * t_a * (1.0 - t_b)
    p_d2 = 0.5 * (1.0 - t_a) * t_b
    # complement keeps the class weights summing to exactly 1
    p_none = max(0.5 - p_rej - p_d1 - p_d2, 0.0)
    return {
        Outcome.COINCIDENCE: 0.0,
        Outcome.REJECTED_COINCIDENCE: p_rej,
        Outcome.ONLY_D1: p_d1,
        Outcome.ONLY_D2: p_d2,
        Outcome.SAME_PORT_A: 0.25,
        Outcome.SAME_PORT_B: 0.25,
        Outcome.NO_CLICKS: p_none,
    }


def outcome_distribution(event: PairEvent, eraser: EraserSetting | None) -> dict[Outcome, float]:
    """Probabilities of the joint detection outcome classes for one pair.

    Same-path pairs never produce an accepted cross-detector coincidence;
    cross-path pairs reach the accepted class with probability
    cos^2(xi + theta) / 4 behind analyzers and 1/2 without them. The
    weights sum to one exactly.
    """
    if event.cross_path:
        return _cross_path_distribution(eraser)
    return _same_path_distribution(event.shared_path, eraser)


def accepted_route_split(eraser: EraserSetting) -> float:
    """P(the arm-1 photon sits at port A | accepted coincidence)."""
    w1 = (math.sin(eraser.xi) * math.sin(eraser.theta)) ** 2
    w2 = (math.cos(eraser.xi) * math.cos(eraser.theta)) ** 2
    return 0.5 if w1 + w2 == 0 else w1 / (w1 + w2)


def lone_click_route_split(eraser: EraserSetting, port: Port) -> float:
    """P(the arm-1 photon sits at port A | exactly one cross-port click)."""
    if port is Port.A:
        w1 = (math.sin(eraser.xi) * math.cos(eraser.theta)) ** 2
        w2 = (math.cos(eraser.xi) * math.sin(eraser.theta)) ** 2
    else:
        w1 = (math.cos(eraser.xi) * math.sin(eraser.theta)) ** 2
        w2 = (math.sin(eraser.xi) * math.cos(eraser.theta)) ** 2
    return 0.5 if w1 + w2 == 0 else w1 / (w1 + w2)


EventsLike = Union[PairBatch, Iterable[PairEvent]]


def selection_efficiency(events: EventsLike, rule: SelectionRule | None = None) -> float:
    """Fraction of generated pairs in the rule-accepted class, before any
    analyzer.  With the heterodyne rule the expectation is 1/4: half of
    the pairs split across the arms and half of those exit distinct ports.
    """
    rule = rule or SelectionRule.heterodyne()
    if isinstance(events, PairBatch):
        n = len(events)
        if n == 0:
            raise ValueError("selection efficiency is undefined for an empty stream")
        cross_port = events.port1 != events.port2
        if rule.name == "heterodyne":
            accepted = int(np.count_nonzero(events.cross_mask & cross_port))
        elif rule.name == "cross-port-only":
            accepted = int(np.count_nonzero(cross_port))
        else:
            accepted = sum(1 for ev in events if _event_accepted(ev, rule))
        return accepted / n
    event_list = list(events)
    if not event_list:
        raise ValueError("selection efficiency is undefined for an empty stream")
    accepted = sum(1 for ev in event_list if _event_accepted(ev, rule))
    return accepted / len(event_list)


def _event_accepted(event: PairEvent, rule: SelectionRule) -> bool:
    if event.port1 is event.port2:
        return False
    from .source import pol_at  # local import avoids a cycle at module load

    def tag(route, port):
        return ModeLabel(route, pol_at(route, port), event.orientation.arm_detune(route))

    if event.port1 is Port.A:
        tag_a, tag_b = tag(event.route1, Port.A), tag(event.route2, Port.B)
    else:
        tag_a, tag_b = tag(event.route2, Port.A), tag(event.route1, Port.B)
    return rule.accepts(tag_a, tag_b)


def sample_coincidence_counts(
    n_pairs: int, eraser: EraserSetting | None, rng: np.random.Generator
) -> tuple[int, int]:
    """Event-level draw of (cross-path count, accepted-coincidence count)
    for ``n_pairs`` generated pairs."""
    route1 = rng.integers(0, 2, n_pairs)
    route2 = rng.integers(0, 2, n_pairs)
    n_cross = int(np.count_nonzero(route1 != route2))
    p_accept = _cross_path_distribution(eraser)[Outcome.COINCIDENCE]
    hits = rng.random(n_cross) < p_accept
    return n_cross, int(np.count_nonzero(hits))


def visibility(series: Sequence) -> float:
    """Fringe contrast (max - min) / (max + min) of a sampled series.

    Accepts (setting, value) pairs or bare values; needs at least two
    samples and a nonzero extremal sum.
    """
    values = []
    for item in series:
        if isinstance(item, (tuple, list)) and len(item) == 2:
            values.append(float(item[1]))
        else:
            values.append(float(item))
    if len(values) < 2:
        raise ValueError("visibility needs at least two samples")
    hi, lo = max(values), min(values)
    if hi + lo == 0:
        raise ValueError("visibility is undefined for an all-zero series")
    return (hi - lo) / (hi + lo)
