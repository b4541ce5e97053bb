"""Labeled-sample database: grid traversal, normalization, augmentation, balancing.

A database record pairs the peak-normalized secondary current with its 0/1
saturation mask. Records are produced by traversing the influence-parameter
grid (system time constant, inception angle, fault severity, CT time
constant, remanence), then class-balanced and optionally augmented.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .ctsim import (
    CtParameters,
    SaturationMask,
    SimulationDivergedError,
    scenario_with_t2,
    simulate,
)
from .waveform import DEFAULT_FREQUENCY, DEFAULT_SAMPLE_RATE, FaultScenario, SampledWaveform

log = logging.getLogger(__name__)

#: Analysis window lengths [ms]; the shortest is one half cycle at 50 Hz.
WINDOW_LENGTHS_MS = (10.0, 20.0, 40.0, 60.0)

#: Gaussian noise intensities [dB SNR] used for augmentation.
NOISE_SNR_DB = (40.0, 35.0)

#: Fault-severity multipliers of rated current standing in for the five
#: fault-resistance levels of the traversal table (0, 1, 10, 50, 100 ohm).
SEVERITY_MULTIPLIERS = (20.0, 15.0, 8.0, 3.0, 1.5)

#: Rated primary current [A RMS] of the reference 2000:5 CT.
RATED_PRIMARY_RMS = 2000.0


@dataclass(frozen=True)
class TraversalGrid:
    """Axes of the influence-parameter traversal."""

    t1_values: tuple[float, ...]
    theta_values: tuple[float, ...]
    fault_severity_values: tuple[float, ...]
    t2_values: tuple[float, ...]
    remanence_values: tuple[float, ...]

    def __post_init__(self) -> None:
        for name in ("t1_values", "theta_values", "fault_severity_values",
                     "t2_values", "remanence_values"):
            axis = tuple(float(v) for v in getattr(self, name))
            if not axis:
                raise ValueError(f"{name} must be non-empty")
            object.__setattr__(self, name, axis)

    @property
    def size(self) -> int:
        return (len(self.t1_values) * len(self.theta_values)
                * len(self.fault_severity_values) * len(self.t2_values)
                * len(self.remanence_values))

    def points(self):
        """Iterate (t1, theta, severity, t2, remanence) in deterministic order."""
        return itertools.product(self.t1_values, self.theta_values,
                                 self.fault_severity_values, self.t2_values,
                                 self.remanence_values)

    @classmethod
    def table2(cls) -> "TraversalGrid":
        """The full influence-parameter table: 26 x 23 x 5 x 7 x 7 = 146,510 points."""
        return cls(
            t1_values=tuple(round(0.05 + 0.01 * k, 10) for k in range(26)),
            theta_values=tuple(math.radians(15.0 * k) for k in range(23)),
            fault_severity_values=SEVERITY_MULTIPLIERS,
            t2_values=(0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0),
            remanence_values=(-0.8, -0.4, -0.2, 0.0, 0.2, 0.4, 0.8),
        )

    @classmethod
    def small(cls) -> "TraversalGrid":
        """Desk-scale grid (540 points) for training-sized experiments."""
        return cls(
            t1_values=(0.05, 0.15, 0.3),
            theta_values=tuple(math.radians(d) for d in (0, 45, 90, 150, 210, 270)),
            fault_severity_values=(20.0, 8.0, 1.5),
            t2_values=(0.5, 1.25),
            remanence_values=(-0.8, -0.2, 0.0, 0.4, 0.8),
        )

    @classmethod
    def tiny(cls) -> "TraversalGrid":
        """Smoke-test grid (16 points)."""
        return cls(
            t1_values=(0.06, 0.2),
            theta_values=(0.0, math.radians(90)),
            fault_severity_values=(20.0, 1.5),
            t2_values=(0.5,),
            remanence_values=(0.0, 0.8),
        )

    @classmethod
    def named(cls, name: str) -> "TraversalGrid":
        try:
            return {"table2": cls.table2, "small": cls.small, "tiny": cls.tiny}[name]()
        except KeyError:
            raise ValueError(f"unknown grid {name!r}; expected table2, small or tiny")


@dataclass(frozen=True)
class LabeledSample:
    """Normalized secondary current paired with its 0/1 saturation targets."""

    input: np.ndarray
    target: np.ndarray
    meta: dict

    def __post_init__(self) -> None:
        x = np.asarray(self.input, dtype=float).copy()
        y = np.asarray(self.target, dtype=float).copy()
        if x.ndim != 1 or y.ndim != 1 or x.size != y.size or x.size == 0:
            raise ValueError("input and target must be equal-length 1-D sequences")
        if not np.all(np.isfinite(x)):
            raise ValueError("input contains non-finite values")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError("target must be 0/1 valued")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "input", x)
        object.__setattr__(self, "target", y)

    def __len__(self) -> int:
        return self.input.size

    @property
    def any_saturated(self) -> bool:
        return bool(self.target.any())


@dataclass
class DatabaseBuild:
    """Outcome of a database build: retained samples plus skipped grid points."""

    samples: list[LabeledSample]
    skipped: list[dict]
    grid_size: int
    seed: int


def normalize(secondary: SampledWaveform) -> np.ndarray:
    """Peak-normalize a record to [-1, 1] with at least one endpoint attained."""
    return normalize_values(secondary.values)


def normalize_values(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    peak = float(np.max(np.abs(values)))
    if peak == 0.0:
        raise ValueError("all-zero record: normalizer undefined")
    return values / peak


def _window_samples(window_ms: float, fs: float) -> int:
    return int(round(window_ms * 1e-3 * fs))


def sample_from_simulation(secondary: SampledWaveform, mask: SaturationMask,
                           meta: dict) -> LabeledSample:
    return LabeledSample(normalize(secondary), mask.to01(), meta)


def build_database(grid: TraversalGrid, ct_base: CtParameters,
                   fs: float = DEFAULT_SAMPLE_RATE, *,
                   duration: float = 0.06,
                   frequency_f: float = DEFAULT_FREQUENCY,
                   rated_primary_rms: float = RATED_PRIMARY_RMS,
                   zeta: float = 0.05,
                   balance_ratio: float | None = 1.0,
                   seed: int = 0) -> DatabaseBuild:
    """Simulate every grid point and emit balanced labeled samples.

    One simulation of `duration` seconds runs per grid point, in grid order.
    Diverged simulations are recorded in `skipped` (never silently dropped).
    With `balance_ratio` set, fully-unsaturated records are subsampled to
    roughly `balance_ratio` per saturated record; `None` keeps everything.
    """
    samples: list[LabeledSample] = []
    skipped: list[dict] = []
    for index, (t1, theta, severity, t2, remanence) in enumerate(grid.points()):
        scenario = FaultScenario(
            amplitude_im=severity * math.sqrt(2.0) * rated_primary_rms,
            fault_angle_theta=theta,
            time_constant_t1=t1,
            frequency_f=frequency_f,
        )
        ct = scenario_with_t2(ct_base, t2, remanence)
        meta = {
            "grid_index": index, "t1": t1, "theta": theta,
            "severity": severity, "t2": t2, "remanence": remanence,
            "fs": fs, "window_ms": duration * 1e3, "tags": [],
        }
        try:
            sim = simulate(scenario, ct, fs, duration, zeta=zeta)
        except SimulationDivergedError as exc:
            log.warning("grid point %d diverged: %s", index, exc)
            skipped.append({"grid_index": index, "reason": str(exc), "meta": meta})
            continue
        samples.append(sample_from_simulation(sim.secondary, sim.mask, meta))

    if balance_ratio is not None:
        samples = balance(samples, balance_ratio, np.random.default_rng(seed))
    return DatabaseBuild(samples=samples, skipped=skipped,
                         grid_size=grid.size, seed=seed)


def balance(samples: list[LabeledSample], ratio: float,
            rng: np.random.Generator) -> list[LabeledSample]:
    """Subsample fully-unsaturated records to `ratio` per saturated record.

    Every record containing at least one saturated point is kept. Output
    preserves the original record order regardless of the draw.
    """
    if ratio <= 0:
        raise ValueError(f"ratio must be > 0, got {ratio}")
    saturated = [i for i, s in enumerate(samples) if s.any_saturated]
    unsaturated = [i for i, s in enumerate(samples) if not s.any_saturated]
    n_keep = min(len(unsaturated), int(round(ratio * len(saturated))))
    kept_unsat = set(rng.choice(len(unsaturated), size=n_keep, replace=False).tolist()
                     ) if n_keep else set()
    keep = set(saturated) | {unsaturated[i] for i in kept_unsat}
    return [s for i, s in enumerate(samples) if i in keep]


def augment(sample: LabeledSample, kinds, rng: np.random.Generator, *,
            noise_snr_db=NOISE_SNR_DB,
            window_lengths_ms=WINDOW_LENGTHS_MS) -> list[LabeledSample]:
    """Expand one sample into [original] + one variant per augmentation kind.

    polarity: sign-flip the input, mask unchanged.
    noise:    add Gaussian noise at an SNR drawn from `noise_snr_db`; the
              result is intentionally not re-normalized so the mask stays
              aligned (inputs may slightly exceed [-1, 1]).
    window:   truncate to a prefix of one window length drawn from the
              lengths strictly shorter than the sample; skipped when none fit.
    """
    kinds = set(kinds)
    unknown = kinds - {"polarity", "noise", "window"}
    if unknown:
        raise ValueError(f"unknown augmentation kinds: {sorted(unknown)}")
    out = [sample]
    fs = sample.meta.get("fs", DEFAULT_SAMPLE_RATE)
    if "polarity" in kinds:
        meta = dict(sample.meta, tags=list(sample.meta.get("tags", [])) + ["polarity"])
        out.append(LabeledSample(-sample.input, sample.target, meta))
    if "noise" in kinds:
        snr_db = float(noise_snr_db[rng.integers(len(noise_snr_db))])
        noisy = add_noise(sample.input, snr_db, rng)
        meta = dict(sample.meta,
                    tags=list(sample.meta.get("tags", [])) + [f"noise{snr_db:g}dB"])
        out.append(LabeledSample(noisy, sample.target, meta))
    if "window" in kinds:
        fitting = [w for w in window_lengths_ms if _window_samples(w, fs) < len(sample)]
        if fitting:
            w = float(fitting[rng.integers(len(fitting))])
            k = _window_samples(w, fs)
            meta = dict(sample.meta, window_ms=w,
                        tags=list(sample.meta.get("tags", [])) + [f"window{w:g}ms"])
            out.append(LabeledSample(sample.input[:k], sample.target[:k], meta))
    return out


def add_noise(values: np.ndarray, snr_db: float,
              rng: np.random.Generator) -> np.ndarray:
    """Add white Gaussian noise at the requested signal-to-noise ratio [dB]."""
    power = float(np.mean(np.square(values)))
    if power == 0.0:
        raise ValueError("zero-power signal: SNR undefined")
    sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    return values + rng.normal(0.0, sigma, size=values.shape)


def augment_all(samples: list[LabeledSample], kinds,
                rng: np.random.Generator) -> list[LabeledSample]:
    """Apply `augment` to every sample; with all three kinds this is a x4 expansion
    (provided every record is longer than the shortest window length)."""
    out: list[LabeledSample] = []
    for sample in samples:
        out.extend(augment(sample, kinds, rng))
    return out


def split(samples: list[LabeledSample], ratio: float, seed: int = 0,
          ) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """Deterministic shuffled train/test split; |train| = round(ratio * n)."""
    if not samples:
        raise ValueError("cannot split an empty sample list")
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    order = np.random.default_rng(seed).permutation(len(samples))
    n_train = int(round(ratio * len(samples)))
    train_idx = set(order[:n_train].tolist())
    train = [s for i, s in enumerate(samples) if i in train_idx]
    test = [s for i, s in enumerate(samples) if i not in train_idx]
    return train, test
