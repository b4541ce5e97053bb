"""Closed-form short-circuit current models and uniform sampling utilities.

Two current models are provided: the decaying-DC "textbook" fault current
(amplitude, inception angle, DC time constant) and the four-parameter
cosine-plus-exponential model used by the compensator. Both are pure
functions; sampled records are immutable once constructed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

#: Default system frequency [Hz].
DEFAULT_FREQUENCY = 50.0

#: Default sampling rate [Hz]; 80 points per cycle at 50 Hz so that the
#: shortest 10 ms analysis window still holds 40 samples.
DEFAULT_SAMPLE_RATE = 4000.0


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class FaultScenario:
    """Primary-side fault description.

    amplitude_im: peak steady-state fault current [A], primary-referred.
    fault_angle_theta: inception angle [rad]; stored normalized to [0, 2*pi).
    time_constant_t1: DC decay time constant [s].
    frequency_f: system frequency [Hz].
    onset_time: fault inception relative to record start [s], >= 0.
    """

    amplitude_im: float
    fault_angle_theta: float
    time_constant_t1: float
    frequency_f: float = DEFAULT_FREQUENCY
    onset_time: float = 0.0

    def __post_init__(self) -> None:
        for name in ("amplitude_im", "fault_angle_theta", "time_constant_t1",
                     "frequency_f", "onset_time"):
            _require_finite(name, getattr(self, name))
        if self.amplitude_im <= 0:
            raise ValueError(f"amplitude_im must be > 0, got {self.amplitude_im}")
        if self.time_constant_t1 <= 0:
            raise ValueError(f"time_constant_t1 must be > 0, got {self.time_constant_t1}")
        if self.frequency_f <= 0:
            raise ValueError(f"frequency_f must be > 0, got {self.frequency_f}")
        if self.onset_time < 0:
            raise ValueError(f"onset_time must be >= 0, got {self.onset_time}")
        object.__setattr__(self, "fault_angle_theta", self.fault_angle_theta % TWO_PI)

    @property
    def omega(self) -> float:
        """Angular frequency [rad/s]."""
        return TWO_PI * self.frequency_f


@dataclass(frozen=True)
class ShortCircuitParams:
    """Parameters of the cosine-plus-decaying-DC current model.

    amp_a: cosine amplitude [A].
    phase_theta: cosine phase [rad].
    dc_b: DC-offset amplitude [A].
    decay_lambda: DC exponent rate [1/s]; negative for a physical decay.
    """

    amp_a: float
    phase_theta: float
    dc_b: float
    decay_lambda: float

    def __post_init__(self) -> None:
        for name in ("amp_a", "phase_theta", "dc_b", "decay_lambda"):
            _require_finite(name, getattr(self, name))

    def canonical(self) -> "ShortCircuitParams":
        """Resolve the (A, theta) <-> (-A, theta + pi) reflection: A >= 0, theta in [0, 2*pi)."""
        a, theta = self.amp_a, self.phase_theta
        if a < 0:
            a, theta = -a, theta + math.pi
        return ShortCircuitParams(a, theta % TWO_PI, self.dc_b, self.decay_lambda)

    def as_array(self) -> np.ndarray:
        return np.array([self.amp_a, self.phase_theta, self.dc_b, self.decay_lambda])

    @classmethod
    def from_array(cls, x) -> "ShortCircuitParams":
        a, theta, b, lam = (float(v) for v in x)
        return cls(a, theta, b, lam)


@dataclass(frozen=True)
class SampledWaveform:
    """Uniformly sampled current record. Values are read-only after construction."""

    sample_rate_fs: float
    values: np.ndarray
    start_time: float = 0.0

    def __post_init__(self) -> None:
        if self.sample_rate_fs <= 0 or not math.isfinite(self.sample_rate_fs):
            raise ValueError(f"sample_rate_fs must be > 0, got {self.sample_rate_fs}")
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("values must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must not contain NaN or Inf")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def times(self) -> np.ndarray:
        """Sample timestamps [s]."""
        return self.start_time + np.arange(self.values.size) / self.sample_rate_fs

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate_fs

    def with_values(self, values: np.ndarray) -> "SampledWaveform":
        """Copy of this record with the samples replaced."""
        return SampledWaveform(self.sample_rate_fs, values, self.start_time)


def eval_textbook_fault(scenario: FaultScenario, t: float) -> float:
    """Fault current at time t >= 0 after inception: Im*(cos(theta)*exp(-t/T1) - cos(w*t + theta))."""
    if t < 0:
        raise ValueError(f"t must be >= 0 (time from fault onset), got {t}")
    theta = scenario.fault_angle_theta
    return scenario.amplitude_im * (
        math.cos(theta) * math.exp(-t / scenario.time_constant_t1)
        - math.cos(scenario.omega * t + theta)
    )


def textbook_fault_derivative(scenario: FaultScenario, t: float) -> float:
    """Analytic d/dt of the textbook fault current, used by the circuit integrator."""
    if t < 0:
        raise ValueError(f"t must be >= 0 (time from fault onset), got {t}")
    theta = scenario.fault_angle_theta
    omega = scenario.omega
    t1 = scenario.time_constant_t1
    return scenario.amplitude_im * (
        -math.cos(theta) * math.exp(-t / t1) / t1 + omega * math.sin(omega * t + theta)
    )


def eval_model(params: ShortCircuitParams, frequency_f: float, t: float) -> float:
    """Model current A*cos(w*t + theta) + B*exp(lambda*t) at time t."""
    omega = TWO_PI * frequency_f
    return (params.amp_a * math.cos(omega * t + params.phase_theta)
            + params.dc_b * math.exp(params.decay_lambda * t))


def eval_model_array(params: ShortCircuitParams, frequency_f: float,
                     t: np.ndarray) -> np.ndarray:
    """Vectorized eval_model over an array of sample times."""
    omega = TWO_PI * frequency_f
    t = np.asarray(t, dtype=float)
    return (params.amp_a * np.cos(omega * t + params.phase_theta)
            + params.dc_b * np.exp(params.decay_lambda * t))


def sample_model(params: ShortCircuitParams, frequency_f: float,
                 fs: float, n: int) -> SampledWaveform:
    """Sample the model at k/fs for k = 0..n-1.

    Each sample goes through the same scalar arithmetic as eval_model so the
    pointwise-equality contract holds exactly.
    """
    if fs <= 0:
        raise ValueError(f"fs must be > 0, got {fs}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    dt = 1.0 / fs
    values = np.array([eval_model(params, frequency_f, k * dt) for k in range(n)])
    return SampledWaveform(fs, values, start_time=0.0)


def textbook_as_model(scenario: FaultScenario) -> ShortCircuitParams:
    """The textbook fault expressed in the four-parameter model:
    A = -Im, B = Im*cos(theta), lambda = -1/T1."""
    theta = scenario.fault_angle_theta
    return ShortCircuitParams(
        amp_a=-scenario.amplitude_im,
        phase_theta=theta,
        dc_b=scenario.amplitude_im * math.cos(theta),
        decay_lambda=-1.0 / scenario.time_constant_t1,
    )
