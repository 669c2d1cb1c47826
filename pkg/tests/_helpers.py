"""Shared builders for the test suite."""

from harvpol import models

# two-state setup used across the probability-region tests: worst state first
PROB_Q_SUPPORT = (10 ** -0.2, 1.0)
PROB_H_SUPPORT = (3.5, 7.0)


def gauss_source(d_max=1.0, ts_max=1.0, zeta=1.0, eta=1.5):
    return models.GaussianIidSourceModel(d_max=d_max, ts_max=ts_max, zeta=zeta, eta=eta)


def gm_source(d_max=1.0, nu=0.1, zeta=1.0):
    return models.GaussMarkovSourceModel(d_max=d_max, nu=nu, zeta=zeta)


def geometry(channel_uses=100, source_samples=100):
    return models.SlotGeometry(channel_uses, source_samples)


def point_spec(q, h, *, source=None, geom=None, energy=None):
    """Single-state sensor; defaults match the unit-variance Gaussian setup."""
    env = models.Environment(
        (q,), (1.0,), (h,), (1.0,), energy or models.UniformContinuous(0.0, 2.0))
    return models.SensorSpec(
        source or gauss_source(), models.AwgnChannelModel(),
        geom or geometry(), env)


def prob_spec(p_q, p_h, *, q_support=PROB_Q_SUPPORT, h_support=PROB_H_SUPPORT,
              source=None, geom=None, energy=None):
    """Two-state sensor parametrized by the worst-state probabilities."""
    env = models.Environment(
        q_support, (p_q, 1.0 - p_q), h_support, (p_h, 1.0 - p_h),
        energy or models.UniformContinuous(0.0, 2.0))
    return models.SensorSpec(
        source or gauss_source(), models.AwgnChannelModel(),
        geom or geometry(), env)
