"""Source, channel, and environment models for an energy-harvesting sensor.

A sensor operates in slots of N channel uses during which it observes M
source samples (bandwidth ratio b = N/M), compresses them at an
energy-dependent rate, and transmits the queued bits over an AWGN channel.
All energies are Joule per channel use, all rates bits per slot, all
logarithms base 2.

Two acquisition/compression models are provided:

* ``GaussianIidSourceModel``: i.i.d. Gaussian samples observed through
  sensing noise whose variance scales inversely with the per-sample sensing
  energy. The per-bit acquisition cost follows a power law with exponent
  1/eta and saturates at inefficiency zeta once the per-sample energy
  reaches ts_max.
* ``GaussMarkovSourceModel``: a Gauss-Markov sequence with correlation
  coefficient q, acquired losslessly above a fixed overhead of nu/b Joule
  per channel use and encoded predictively.

The analog path bypasses compression and maps samples directly onto channel
symbols; ``analog_mmse`` gives its end-to-end distortion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import DomainError, RateInfinite

_REL_TOL = 1e-12


@dataclass(frozen=True)
class SlotGeometry:
    """Per-slot counts: N channel uses, M source samples, b = N/M.

    ``bandwidth_ratio`` may be omitted, in which case it is computed; when
    given it must match N/M to relative 1e-12.
    """

    channel_uses: int
    source_samples: int
    bandwidth_ratio: float = 0.0

    def __post_init__(self):
        if self.channel_uses <= 0 or self.source_samples <= 0:
            raise DomainError("channel_uses and source_samples must be positive")
        exact = self.channel_uses / self.source_samples
        if self.bandwidth_ratio == 0.0:
            object.__setattr__(self, "bandwidth_ratio", exact)
        elif not math.isclose(self.bandwidth_ratio, exact, rel_tol=_REL_TOL):
            raise DomainError(
                f"bandwidth_ratio {self.bandwidth_ratio} != N/M = {exact}"
            )


@dataclass(frozen=True)
class GaussianIidSourceModel:
    """I.i.d. Gaussian source observed through energy-dependent sensing noise.

    d_max:  prior variance of each sample (distortion when nothing is sent).
    ts_max: per-sample sensing energy at which compression efficiency
            saturates.
    zeta:   compression inefficiency at saturation, >= 1.
    eta:    power-law exponent of the energy/efficiency trade, in [1, 3].
    """

    d_max: float
    ts_max: float
    zeta: float = 1.0
    eta: float = 1.5

    def __post_init__(self):
        if not (self.d_max > 0.0 and self.ts_max > 0.0):
            raise DomainError("d_max and ts_max must be positive")
        if self.zeta < 1.0:
            raise DomainError("zeta must be >= 1")
        if not (1.0 <= self.eta <= 3.0):
            raise DomainError("eta must lie in [1, 3]")


@dataclass(frozen=True)
class GaussMarkovSourceModel:
    """Gauss-Markov source with acquisition overhead nu (Joule per sample).

    The per-slot correlation coefficient is the environment state q in
    [0, 1). Compression is predictive: beyond the overhead, longer sensing
    shifts rate from description to prediction.
    """

    d_max: float
    nu: float
    zeta: float = 1.0

    def __post_init__(self):
        if self.d_max <= 0.0:
            raise DomainError("d_max must be positive")
        if self.nu < 0.0:
            raise DomainError("nu must be nonnegative")
        if self.zeta < 1.0:
            raise DomainError("zeta must be >= 1")


SourceModel = Union[GaussianIidSourceModel, GaussMarkovSourceModel]


@dataclass(frozen=True)
class AwgnChannelModel:
    """Block-fading AWGN channel; the state h is the SNR per unit energy."""


@dataclass(frozen=True)
class UniformContinuous:
    """Uniform energy-arrival law on [lo, hi] Joule per channel use."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi):
            raise DomainError("need 0 <= lo < hi")


@dataclass(frozen=True)
class DiscretePmf:
    """Finite-support pmf. Probabilities must sum to 1 within 1e-12."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.values) != len(self.probs) or not self.values:
            raise DomainError("values and probs must be equal-length and nonempty")
        if any(p < 0.0 for p in self.probs):
            raise DomainError("probabilities must be nonnegative")
        if abs(math.fsum(self.probs) - 1.0) > _REL_TOL:
            raise DomainError("probabilities must sum to 1")
        if any(v < 0.0 for v in self.values):
            raise DomainError("support values must be nonnegative")


EnergyDistribution = Union[UniformContinuous, DiscretePmf]


@dataclass(frozen=True)
class Environment:
    """Joint i.i.d. law of the per-slot draws (Q_k, H_k, E_k), independent."""

    q_support: tuple
    q_pmf: tuple
    h_support: tuple
    h_pmf: tuple
    energy: EnergyDistribution

    def __post_init__(self):
        for name in ("q_support", "q_pmf", "h_support", "h_pmf"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        for sup, pmf, label in (
            (self.q_support, self.q_pmf, "q"),
            (self.h_support, self.h_pmf, "h"),
        ):
            if len(sup) != len(pmf) or not sup:
                raise DomainError(f"{label} support/pmf must be equal-length, nonempty")
            if any(p < 0.0 for p in pmf):
                raise DomainError(f"{label} pmf must be nonnegative")
            if abs(math.fsum(pmf) - 1.0) > _REL_TOL:
                raise DomainError(f"{label} pmf must sum to 1")
            if any(v < 0.0 for v in sup):
                raise DomainError(f"{label} support must be nonnegative")


@dataclass(frozen=True)
class SensorSpec:
    """Full static description of one sensor."""

    source: SourceModel
    channel: AwgnChannelModel
    geometry: SlotGeometry
    environment: Environment


# ---------------------------------------------------------------------------
# rate and distortion operations


def d_mmse_gaussian_iid(model: GaussianIidSourceModel, q: float) -> float:
    """Estimation floor (1/d_max + q)^-1: best distortion before compression."""
    if q < 0.0:
        raise DomainError("q must be nonnegative")
    return 1.0 / (1.0 / model.d_max + q)


def source_rate_gaussian_iid(
    model: GaussianIidSourceModel, geom: SlotGeometry, d: float, ts: float, q: float
) -> float:
    """Bits per slot to reach distortion d with sensing energy ts per channel use.

    Raises RateInfinite at ts == 0 (the acquisition power law diverges) and
    DomainError when d lies outside (d_mmse(q), d_max] or ts < 0.
    """
    if ts < 0.0:
        raise DomainError("ts must be nonnegative")
    m = d_mmse_gaussian_iid(model, q)
    if not (m < d <= model.d_max):
        raise DomainError(f"d={d} outside ({m}, {model.d_max}]")
    if ts == 0.0:
        raise RateInfinite("zero sensing energy")
    b = geom.bandwidth_ratio
    f1 = max(math.log2((model.d_max - m) / (d - m)), 0.0)
    f2 = model.zeta * max((b * ts / model.ts_max) ** (-1.0 / model.eta), 1.0)
    return (geom.channel_uses / b) * f1 * f2


def gauss_markov_distortion_ceiling(
    model: GaussMarkovSourceModel, geom: SlotGeometry, q: float, ts: float
) -> float:
    """Largest distortion with positive rate: zeta*d_max*(1-q^2)^((ts-nu/b)/ts)."""
    b = geom.bandwidth_ratio
    overhead = model.nu / b
    if ts <= overhead:
        raise DomainError(f"ts must exceed the acquisition overhead {overhead}")
    if not (0.0 <= q < 1.0):
        raise DomainError("q must lie in [0, 1)")
    expo = (ts - overhead) / ts
    return model.zeta * model.d_max * (1.0 - q * q) ** expo


def source_rate_gauss_markov(
    model: GaussMarkovSourceModel, geom: SlotGeometry, d: float, ts: float, q: float
) -> float:
    """Bits per slot for the predictive encoder; clamped at zero rate.

    Distortions above the positivity ceiling are not errors: the predictor
    alone achieves them, so the rate is 0 bits.
    """
    if d <= 0.0:
        raise DomainError("d must be positive")
    # log2(zeta*d_max/d) + log2(1-q^2)*(ts-nu/b)/ts, folded into one log so the
    # clamp hits exact zero at the positivity ceiling.
    ceiling = gauss_markov_distortion_ceiling(model, geom, q, ts)
    b = geom.bandwidth_ratio
    return (geom.channel_uses / b) * max(math.log2(ceiling / d), 0.0)


def source_rate(model: SourceModel, geom: SlotGeometry, d, ts, q) -> float:
    """Dispatch to the bits-per-slot formula of the given source model."""
    if isinstance(model, GaussianIidSourceModel):
        return source_rate_gaussian_iid(model, geom, d, ts, q)
    if isinstance(model, GaussMarkovSourceModel):
        return source_rate_gauss_markov(model, geom, d, ts, q)
    raise DomainError(f"unknown source model {type(model)!r}")


def channel_rate_awgn(geom: SlotGeometry, h: float, tt: float) -> float:
    """Shannon rate of the slot: N * log2(1 + h*tt) bits."""
    if h < 0.0 or tt < 0.0:
        raise DomainError("h and tt must be nonnegative")
    return geom.channel_uses * math.log2(1.0 + h * tt)


def analog_mmse(
    geom: SlotGeometry, tt: float, q: float, h: float, d_max: float
) -> float:
    """End-to-end distortion of uncoded analog transmission.

    For b >= 1 every sample rides b channel uses, so the per-sample energy
    is b*tt. For b < 1 only a fraction b of samples is transmitted and the
    remainder accrues the full prior variance d_max.
    """
    if tt < 0.0 or h < 0.0:
        raise DomainError("tt and h must be nonnegative")
    if q <= 0.0:
        raise DomainError("analog estimation needs q > 0")
    if d_max <= 0.0:
        raise DomainError("d_max must be positive")
    b = geom.bandwidth_ratio
    if b >= 1.0:
        snr = b * tt * q * h / (b * tt * q + q + 1.0)
        return 1.0 / (snr + 1.0 / d_max)
    snr = tt * q * h / (tt * q + q + 1.0)
    return b / (snr + 1.0 / d_max) + (1.0 - b) * d_max


def distortion_bounds(
    model: SourceModel, geom: SlotGeometry, q: float, ts: float
) -> tuple:
    """Range (lo, hi] of distortions with a defined, finite rate at (q, ts)."""
    if isinstance(model, GaussianIidSourceModel):
        if ts <= 0.0:
            raise DomainError("sensing energy must be positive")
        m = d_mmse_gaussian_iid(model, q)
        if m >= model.d_max:
            raise DomainError("empty distortion range (q == 0)")
        return (m, model.d_max)
    if isinstance(model, GaussMarkovSourceModel):
        return (0.0, gauss_markov_distortion_ceiling(model, geom, q, ts))
    raise DomainError(f"unknown source model {type(model)!r}")


def effective_source_output(
    model: SourceModel, geom: SlotGeometry, d, ts: float, q: float
) -> tuple:
    """Totalized compression outcome: (bits, distortion, skipped).

    Operating points where the rate formula is undefined or divergent map to
    the skip action: acquire nothing, enqueue nothing, accrue the prior
    variance d_max as the slot's distortion. This is the semantics shared by
    the simulator and the feasibility checkers.
    """
    if d is None:
        return 0.0, model.d_max, True
    try:
        bits = source_rate(model, geom, d, ts, q)
    except (DomainError, RateInfinite):
        return 0.0, model.d_max, True
    return bits, float(d), False


# ---------------------------------------------------------------------------
# energy-arrival helpers


def mean_energy(dist) -> float:
    """Mean arrival of an energy distribution (or of an Environment's)."""
    if isinstance(dist, Environment):
        dist = dist.energy
    if isinstance(dist, UniformContinuous):
        return 0.5 * (dist.lo + dist.hi)
    if isinstance(dist, DiscretePmf):
        return float(math.fsum(v * p for v, p in zip(dist.values, dist.probs)))
    raise DomainError(f"unknown energy distribution {type(dist)!r}")


def energy_range(dist: EnergyDistribution) -> tuple:
    if isinstance(dist, UniformContinuous):
        return (dist.lo, dist.hi)
    if isinstance(dist, DiscretePmf):
        return (min(dist.values), max(dist.values))
    raise DomainError(f"unknown energy distribution {type(dist)!r}")


def expect_over_energy(
    fn: Callable[[float], float],
    dist: EnergyDistribution,
    nodes: int = 64,
    breakpoints: tuple = (),
) -> float:
    """E[fn(E)] by exact summation (discrete) or panel Gauss-Legendre (uniform).

    ``breakpoints`` lists interior kink locations of fn; each panel between
    consecutive kinks gets its own `nodes`-point rule, so piecewise-smooth
    integrands stay accurate.
    """
    if isinstance(dist, DiscretePmf):
        return float(math.fsum(p * fn(v) for v, p in zip(dist.values, dist.probs)))
    if not isinstance(dist, UniformContinuous):
        raise DomainError(f"unknown energy distribution {type(dist)!r}")
    lo, hi = dist.lo, dist.hi
    cuts = sorted({lo, hi, *(float(c) for c in breakpoints if lo < c < hi)})
    x, w = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for a, c in zip(cuts[:-1], cuts[1:]):
        mid, half = 0.5 * (a + c), 0.5 * (c - a)
        total += half * math.fsum(wi * fn(mid + half * xi) for xi, wi in zip(x, w))
    return total / (hi - lo)
