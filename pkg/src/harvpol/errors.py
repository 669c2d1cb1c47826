"""Exception types shared across the toolkit."""


class HarvpolError(Exception):
    """Base class for all toolkit errors."""


class DomainError(HarvpolError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class RateInfinite(HarvpolError, ArithmeticError):
    """The requested operating point has unbounded rate (zero sensing energy
    in the power-law acquisition model). Deliberately not a DomainError so
    callers can tell 'invalid input' from 'diverging but well-posed limit'."""


class MissingState(HarvpolError, KeyError):
    """A policy parameter map does not cover a state drawn by the environment."""


class EnergyViolation(HarvpolError, RuntimeError):
    """An action tried to spend more energy than the buffer holds."""


class TooShortError(HarvpolError, ValueError):
    """A trace is too short for the requested statistical estimate."""


class SpecError(HarvpolError, ValueError):
    """A discrete problem specification is malformed or inconsistent."""


class ConfigError(HarvpolError, ValueError):
    """An experiment configuration file is malformed."""


class InvariantViolation(HarvpolError, AssertionError):
    """An internal consistency check failed. Indicates a bug, not bad input."""
