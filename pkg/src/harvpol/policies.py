"""Stationary policy classes mapping slot state to (d, ts, tt) actions.

Writing E~ for the energy buffer after this slot's arrival, E for the
arrival itself, and clamp0(x) = max(x, 0):

* ``DoPolicy``        ts = clamp0(min[(1-a)E~ - eps, Ts^q]),
                      tt = clamp0(min[a E~ - eps, Tt^h]), d = D^q.
                      Separation: ts adapts only to q, tt only to h.
* ``GreedyPolicy``    spends the arrival as it lands: ts = a^{q,h} E,
                      tt = (1 - a^{q,h}) E, d = D^{q,h}.
* ``GreedyFixedPolicy``  greedy with a single shared split a.
* ``Hybrid1Policy``   greedy source side, buffered channel side (no eps).
* ``Hybrid2Policy``   buffered source side, greedy channel side.
* ``AnalogPolicy``    no compression; tt = clamp0(min[E~ - eps, Tt^{q,h}]).
* ``AnalogGreedyPolicy``  no compression; tt = E.

Here a is the channel share for DoPolicy/Hybrid1Policy/Hybrid2Policy but the
source share for the greedy classes, matching each class's defining
equations; the synthesizers in `feasibility` keep the conventions straight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

from .errors import DomainError, MissingState


@dataclass(frozen=True)
class Action:
    """One slot's decision. d is None when the class never compresses."""

    d: Optional[float]
    ts: float
    tt: float


def _lookup(table: Mapping, key, label: str):
    try:
        return table[key]
    except KeyError:
        raise MissingState(f"{label} has no entry for state {key!r}") from None


@dataclass(frozen=True)
class DoPolicy:
    d_per_q: Mapping[float, float]
    ts_per_q: Mapping[float, float]
    tt_per_h: Mapping[float, float]
    alpha: float
    epsilon: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise DomainError("alpha must lie in (0, 1)")
        if self.epsilon < 0.0:
            raise DomainError("epsilon must be nonnegative")


@dataclass(frozen=True)
class GreedyPolicy:
    d_per_qh: Mapping[tuple, float]
    alpha_per_qh: Mapping[tuple, float]

    def __post_init__(self):
        if any(not (0.0 <= a <= 1.0) for a in self.alpha_per_qh.values()):
            raise DomainError("every alpha^{q,h} must lie in [0, 1]")


@dataclass(frozen=True)
class GreedyFixedPolicy:
    d_per_qh: Mapping[tuple, float]
    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise DomainError("alpha must lie in [0, 1]")


@dataclass(frozen=True)
class Hybrid1Policy:
    d_per_q: Mapping[float, float]
    tt_per_h: Mapping[float, float]
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise DomainError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class Hybrid2Policy:
    d_per_q: Mapping[float, float]
    ts_per_q: Mapping[float, float]
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise DomainError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class AnalogPolicy:
    tt_per_qh: Mapping[tuple, float]
    epsilon: float

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise DomainError("epsilon must be nonnegative")


@dataclass(frozen=True)
class AnalogGreedyPolicy:
    pass


PolicyParams = Union[
    DoPolicy,
    GreedyPolicy,
    GreedyFixedPolicy,
    Hybrid1Policy,
    Hybrid2Policy,
    AnalogPolicy,
    AnalogGreedyPolicy,
]

DIGITAL_CLASSES = (DoPolicy, GreedyPolicy, GreedyFixedPolicy, Hybrid1Policy, Hybrid2Policy)
ANALOG_CLASSES = (AnalogPolicy, AnalogGreedyPolicy)


def policy_kind(params: PolicyParams) -> str:
    """Short class tag used in reports and config files."""
    return {
        DoPolicy: "do",
        GreedyPolicy: "greedy",
        GreedyFixedPolicy: "greedy_fixed",
        Hybrid1Policy: "hybrid1",
        Hybrid2Policy: "hybrid2",
        AnalogPolicy: "analog",
        AnalogGreedyPolicy: "analog_greedy",
    }[type(params)]


def decide(params: PolicyParams, state, arrival_energy: float) -> Action:
    """Map (policy, slot state, this slot's arrival) to an Action.

    `state` carries .energy (buffer after the arrival), .q and .h. Every
    class guarantees ts + tt <= state.energy given arrival_energy <=
    state.energy, which holds because arrivals enter the buffer first.
    """
    e_buf = state.energy
    q, h = state.q, state.h
    if isinstance(params, DoPolicy):
        ts = min((1.0 - params.alpha) * e_buf - params.epsilon,
                 _lookup(params.ts_per_q, q, "ts_per_q"))
        tt = min(params.alpha * e_buf - params.epsilon,
                 _lookup(params.tt_per_h, h, "tt_per_h"))
        return Action(_lookup(params.d_per_q, q, "d_per_q"),
                      max(ts, 0.0), max(tt, 0.0))
    if isinstance(params, GreedyPolicy):
        a = _lookup(params.alpha_per_qh, (q, h), "alpha_per_qh")
        return Action(_lookup(params.d_per_qh, (q, h), "d_per_qh"),
                      a * arrival_energy, (1.0 - a) * arrival_energy)
    if isinstance(params, GreedyFixedPolicy):
        a = params.alpha
        return Action(_lookup(params.d_per_qh, (q, h), "d_per_qh"),
                      a * arrival_energy, (1.0 - a) * arrival_energy)
    if isinstance(params, Hybrid1Policy):
        tt = min(params.alpha * e_buf, _lookup(params.tt_per_h, h, "tt_per_h"))
        return Action(_lookup(params.d_per_q, q, "d_per_q"),
                      (1.0 - params.alpha) * arrival_energy, max(tt, 0.0))
    if isinstance(params, Hybrid2Policy):
        ts = min((1.0 - params.alpha) * e_buf,
                 _lookup(params.ts_per_q, q, "ts_per_q"))
        return Action(_lookup(params.d_per_q, q, "d_per_q"),
                      max(ts, 0.0), params.alpha * arrival_energy)
    if isinstance(params, AnalogPolicy):
        tt = min(e_buf - params.epsilon, _lookup(params.tt_per_qh, (q, h), "tt_per_qh"))
        return Action(None, 0.0, max(tt, 0.0))
    if isinstance(params, AnalogGreedyPolicy):
        return Action(None, 0.0, arrival_energy)
    raise DomainError(f"unknown policy class {type(params)!r}")
