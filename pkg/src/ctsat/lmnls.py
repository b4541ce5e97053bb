"""Damped Gauss-Newton (Levenberg-Marquardt) estimation of the short-circuit
current model from unsaturated samples, and waveform reconstruction.

The residual convention is observation minus the full model value,
F_j = i2[k_j] - (A*cos(w*t_j + theta) + B*exp(lambda*t_j)); the Jacobian is
kept consistent with it (verified by finite differences in the test suite,
which is the decisive check).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .ctsim import SaturationMask
from .waveform import (
    DEFAULT_FREQUENCY,
    SampledWaveform,
    ShortCircuitParams,
    TWO_PI,
    eval_model_array,
)

#: Damping escalation limit; beyond this the normal equations are hopeless.
_MU_MAX = 1e32

#: Relative step size below which the iteration is considered stationary.
_STEP_TOL_REL = 1e-14

#: Condition-number threshold for flagging an ill-conditioned fit.
_COND_WARN = 1e12


class InsufficientDataError(ValueError):
    """Not enough unsaturated samples to seed or run a fit."""


@dataclass(frozen=True)
class UnsaturatedIndexSet:
    """Strictly increasing sample indices where the mask is false."""

    indices: np.ndarray

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=int).copy()
        if idx.ndim != 1 or idx.size < 4:
            raise InsufficientDataError(
                f"need at least 4 unsaturated indices, got {idx.size}")
        if np.any(np.diff(idx) <= 0) or idx[0] < 0:
            raise ValueError("indices must be strictly increasing and non-negative")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return self.indices.size

    @classmethod
    def from_mask(cls, mask: SaturationMask) -> "UnsaturatedIndexSet":
        return cls(np.flatnonzero(~mask.flags))


@dataclass(frozen=True)
class LmConfig:
    """Damping bookkeeping for the LM iteration."""

    tau: float = 1e-3
    epsilon_g: float = 1e-15
    max_iters: int = 200
    rho_low: float = 0.25
    rho_high: float = 0.75

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.epsilon_g <= 0:
            raise ValueError(f"epsilon_g must be > 0, got {self.epsilon_g}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0.0 < self.rho_low < self.rho_high < 1.0:
            raise ValueError(
                f"need 0 < rho_low < rho_high < 1, got {self.rho_low}, {self.rho_high}")


@dataclass(frozen=True)
class ModelFit:
    """Fit outcome: canonical parameters plus convergence diagnostics."""

    params: ShortCircuitParams
    residual_norm: float
    iterations: int
    converged: bool
    condition_warning: bool = False

    def to_dict(self) -> dict:
        return {
            "amp_a": self.params.amp_a,
            "phase_theta": self.params.phase_theta,
            "dc_b": self.params.dc_b,
            "decay_lambda": self.params.decay_lambda,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "condition_warning": self.condition_warning,
        }


def _times(indices, fs: float) -> np.ndarray:
    return np.asarray(indices, dtype=float) / fs


def residual(x: ShortCircuitParams, indices, observed, fs: float,
             f: float = DEFAULT_FREQUENCY) -> np.ndarray:
    """Error vector F_j = observed_j - model(t_j)."""
    observed = np.asarray(observed, dtype=float)
    t = _times(indices, fs)
    if observed.shape != t.shape:
        raise ValueError(
            f"observed shape {observed.shape} does not match indices {t.shape}")
    return observed - eval_model_array(x, f, t)


def jacobian(x: ShortCircuitParams, indices, fs: float,
             f: float = DEFAULT_FREQUENCY) -> np.ndarray:
    """N x 4 matrix of dF/d[A, theta, B, lambda] for the residual above."""
    t = _times(indices, fs)
    omega = TWO_PI * f
    phase = omega * t + x.phase_theta
    e = np.exp(x.decay_lambda * t)
    j = np.empty((t.size, 4))
    j[:, 0] = -np.cos(phase)
    j[:, 1] = x.amp_a * np.sin(phase)
    j[:, 2] = -e
    j[:, 3] = -x.dc_b * t * e
    return j


def lm_fit(indices, observed, fs: float, f: float,
           x0: ShortCircuitParams, config: LmConfig = LmConfig()) -> ModelFit:
    """Minimize ||F(x)||^2 by the damped normal equations.

    Per iteration: solve (J'J + mu*I) dx = -J'F; the gain ratio
    rho = (||F||^2 - ||F_new||^2) / (dx'(mu*dx - g)) doubles mu below
    rho_low, halves it above rho_high, and only rho > 0 accepts the step.
    Never raises on numerical failure; returns converged=False with the
    best parameters seen instead.
    """
    idx = UnsaturatedIndexSet(np.asarray(indices)).indices
    observed = np.asarray(observed, dtype=float)
    x = x0.as_array()
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")

    def fvec(xa):
        return residual(ShortCircuitParams.from_array(xa), idx, observed, fs, f)

    def jmat(xa):
        return jacobian(ShortCircuitParams.from_array(xa), idx, fs, f)

    fx = fvec(x)
    jx = jmat(x)
    h = jx.T @ jx
    g = jx.T @ fx
    mu = config.tau * float(np.max(np.diag(h)))
    if mu <= 0.0 or not math.isfinite(mu):
        mu = config.tau

    best_x, best_cost = x.copy(), float(fx @ fx)
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm < config.epsilon_g:
            converged = True
            break
        try:
            dx = scipy.linalg.solve(h + mu * np.eye(4), -g, assume_a="sym")
        except (scipy.linalg.LinAlgError, ValueError):
            dx = None
        if dx is None or not np.all(np.isfinite(dx)):
            mu *= 2.0
            if mu > _MU_MAX:
                break
            continue
        x_new = x + dx
        f_new = fvec(x_new)
        cost = float(fx @ fx)
        cost_new = float(f_new @ f_new)
        predicted = float(dx @ (mu * dx - g))
        rho = (cost - cost_new) / predicted if predicted > 0 else -math.inf
        if rho < config.rho_low:
            mu *= 2.0
        elif rho > config.rho_high:
            mu /= 2.0
        if mu > _MU_MAX:
            break
        if rho > 0:
            step = float(np.linalg.norm(dx))
            x, fx = x_new, f_new
            jx = jmat(x)
            h = jx.T @ jx
            g = jx.T @ fx
            if cost_new < best_cost:
                best_cost, best_x = cost_new, x.copy()
            if step <= _STEP_TOL_REL * (float(np.linalg.norm(x)) + _STEP_TOL_REL):
                converged = True
                break

    final = best_x if not converged else x
    final_f = fvec(final)
    jx = jmat(final)
    cond = float(np.linalg.cond(jx.T @ jx))
    return ModelFit(
        params=ShortCircuitParams.from_array(final).canonical(),
        residual_norm=float(np.linalg.norm(final_f)),
        iterations=iterations,
        converged=converged,
        condition_warning=not math.isfinite(cond) or cond > _COND_WARN,
    )


def _longest_run(idx: np.ndarray) -> np.ndarray:
    """Longest stretch of consecutive indices."""
    breaks = np.flatnonzero(np.diff(idx) != 1)
    starts = np.concatenate(([0], breaks + 1))
    stops = np.concatenate((breaks + 1, [idx.size]))
    lengths = stops - starts
    j = int(np.argmax(lengths))
    return idx[starts[j]:stops[j]]


def initial_guess(indices, observed, fs: float,
                  f: float = DEFAULT_FREQUENCY) -> ShortCircuitParams:
    """Deterministic seed estimate from the largest contiguous unsaturated run.

    Amplitude from the run's peak-to-peak, phase from a two-basis linear fit
    against {cos wt, sin wt}, DC offset from the mean residual over the
    earliest samples, decay rate fixed at the mid-range -1/0.1 s.
    """
    idx = np.asarray(indices, dtype=int)
    observed = np.asarray(observed, dtype=float)
    if idx.size != observed.size:
        raise ValueError("indices and observed must have equal lengths")
    if idx.size < 4:
        raise InsufficientDataError(
            f"need at least 4 unsaturated samples, got {idx.size}")
    run = _longest_run(idx)
    if run.size < 4:
        raise InsufficientDataError(
            f"no contiguous unsaturated run of >= 4 samples (longest is {run.size})")
    pos = np.searchsorted(idx, run)
    obs_run = observed[pos]
    t_run = _times(run, fs)

    a0 = 0.5 * float(obs_run.max() - obs_run.min())
    omega = TWO_PI * f
    basis = np.column_stack((np.cos(omega * t_run), np.sin(omega * t_run)))
    c, s = np.linalg.lstsq(basis, obs_run, rcond=None)[0]
    theta0 = math.atan2(-s, c)
    if a0 == 0.0:
        theta0 = 0.0

    quarter = max(4, int(round(fs / (4.0 * f))))
    head = slice(0, min(quarter, idx.size))
    t_head = _times(idx[head], fs)
    b0 = float(np.mean(observed[head] - a0 * np.cos(omega * t_head + theta0)))
    return ShortCircuitParams(a0, theta0, b0, -1.0 / 0.1).canonical()


def compensate(secondary: SampledWaveform, mask: SaturationMask,
               config: LmConfig = LmConfig(), *,
               f: float = DEFAULT_FREQUENCY,
               x0: ShortCircuitParams | None = None,
               ) -> tuple[SampledWaveform, ModelFit]:
    """Reconstruct the record: measured where unsaturated, fitted model where saturated.

    The model is fitted on every unsaturated index. A non-converged fit is
    returned flagged in the ModelFit, never raised.
    """
    if len(secondary) != len(mask):
        raise ValueError(
            f"length mismatch: waveform {len(secondary)} vs mask {len(mask)}")
    idx = np.flatnonzero(~mask.flags)
    if idx.size < 4:
        raise InsufficientDataError(
            f"need at least 4 unsaturated samples, got {idx.size}")
    observed = secondary.values[idx]
    fs = secondary.sample_rate_fs
    if x0 is None:
        x0 = initial_guess(idx, observed, fs, f)
    fit = lm_fit(idx, observed, fs, f, x0, config)

    values = secondary.values.copy()
    sat = np.flatnonzero(mask.flags)
    if sat.size:
        values[sat] = eval_model_array(fit.params, f, _times(sat, fs))
    return secondary.with_values(values), fit
