"""Ensemble averaging over independent trajectories, and transient rate fits.

Reproducibility contract
------------------------
Trajectory ``i`` of a run with master seed ``s`` draws its noise from the
generator ``default_rng(trajectory_seed(s, i))``; the derivation
``trajectory_seed`` is part of the stable interface.  Together with the
fixed per-trajectory noise blocking (``sme.NOISE_BLOCK``) and the fact that
ensemble statistics are reduced from the per-trajectory series assembled in
index order, results are bit-identical for a given ``(master_seed, n, dt,
config)`` regardless of chunking or worker count.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .controller import ControllerConfig
from .model import BlochVector, PhysicalParams
from .sme import CLIP_WARN_FRACTION, _run_batch

__all__ = [
    "EnsembleStats",
    "ExponentialFit",
    "FitError",
    "run_ensemble",
    "fit_exponential",
    "trajectory_seed",
    "trajectory_rng",
    "DEFAULT_CHUNK",
]

#: Trajectories advanced in lockstep per batch.  Changing it does not change
#: any per-trajectory result (only the memory/throughput trade-off).
DEFAULT_CHUNK = 1024


def trajectory_seed(master_seed, index: int) -> np.random.SeedSequence:
    """Deterministic per-trajectory seed derivation (stable interface).

    ``master_seed`` is an int or a tuple of ints; the trajectory stream is
    ``SeedSequence((*master_seed, index))``.
    """
    if isinstance(master_seed, (tuple, list)):
        entropy = (*[int(v) for v in master_seed], int(index))
    else:
        entropy = (int(master_seed), int(index))
    return np.random.SeedSequence(entropy)


def trajectory_rng(master_seed, index: int) -> np.random.Generator:
    return np.random.default_rng(trajectory_seed(master_seed, index))


@dataclass
class EnsembleStats:
    """Ensemble means of the Bloch components with standard errors."""

    times: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    mean_z: np.ndarray
    sem_x: np.ndarray
    sem_y: np.ndarray
    sem_z: np.ndarray
    n_trajectories: int
    clip_fraction: float

    def mean(self) -> np.ndarray:
        """(n_out, 3) array of component means."""
        return np.stack([self.mean_x, self.mean_y, self.mean_z], axis=1)

    def sem(self) -> np.ndarray:
        return np.stack([self.sem_x, self.sem_y, self.sem_z], axis=1)

    def final(self) -> BlochVector:
        return BlochVector(float(self.mean_x[-1]), float(self.mean_y[-1]),
                           float(self.mean_z[-1]))

    def final_sem(self) -> np.ndarray:
        return np.array([self.sem_x[-1], self.sem_y[-1], self.sem_z[-1]])


def _chunk_task(args):
    (cfg, params, init, duration, dt, master_seed, start, size,
     markovian_limit, stride) = args
    rngs = [trajectory_rng(master_seed, start + j) for j in range(size)]
    res = _run_batch(cfg, params, init=init, duration=duration, dt=dt,
                     rngs=rngs, markovian_limit=markovian_limit,
                     stride=stride, collect_series=True)
    return res.series, res.clip_count, res.steps, res.times


def run_ensemble(cfg: ControllerConfig, params: PhysicalParams, n: int,
                 duration: float, dt: float, master_seed, *,
                 init: BlochVector | None = None,
                 markovian_limit: bool = False,
                 stride: int | None = None,
                 workers: int = 1,
                 chunk: int = DEFAULT_CHUNK) -> EnsembleStats:
    """Run ``n`` independent trajectories and aggregate Bloch means.

    ``init`` defaults to the thermal state of ``params``.  ``stride``
    decimates the stored series (default: only the initial and final
    points).  ``workers > 1`` farms fixed-size chunks out to a process
    pool; the result is bit-identical to a serial run.
    """
    if n < 2:
        raise ValueError("need n >= 2 trajectories for ensemble statistics")
    if init is None:
        init = params.thermal_state()
    init_arr = init.as_array()

    spans = [(s, min(chunk, n - s)) for s in range(0, n, chunk)]
    tasks = [(cfg, params, init_arr, duration, dt, master_seed, start, size,
              markovian_limit, stride) for start, size in spans]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_chunk_task, tasks))
    else:
        results = [_chunk_task(t) for t in tasks]

    # assemble in trajectory order, then reduce once (pairwise summation):
    # the reduction sees the identical array for any chunking/worker layout
    series = np.concatenate([r[0] for r in results], axis=0)  # (n, n_out, 3)
    clip_count = sum(r[1] for r in results)
    steps = results[0][2]
    times = results[0][3]
    mean = series.mean(axis=0)
    sem = series.std(axis=0, ddof=1) / np.sqrt(n)

    clip_fraction = clip_count / (steps * n)
    if clip_fraction > CLIP_WARN_FRACTION:
        warnings.warn(f"ensemble clip fraction {clip_fraction:.2e} exceeds "
                      f"{CLIP_WARN_FRACTION:.0e}: dt too coarse", RuntimeWarning)
    return EnsembleStats(
        times=times,
        mean_x=mean[:, 0], mean_y=mean[:, 1], mean_z=mean[:, 2],
        sem_x=sem[:, 0], sem_y=sem[:, 1], sem_z=sem[:, 2],
        n_trajectories=n, clip_fraction=clip_fraction)


class FitError(RuntimeError):
    """Exponential fit failed to converge; carries residual diagnostics."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class ExponentialFit:
    """Result of fitting f(t) = asymptote - amplitude * exp(-rate * t)."""

    rate: float
    asymptote: float
    amplitude: float
    residual_rms: float
    n_points: int


def fit_exponential(times, series) -> ExponentialFit:
    """Least-squares fit of ``a - b exp(-G t)``; returns rate, asymptote, amplitude.

    Requires at least 10 points; warns if the data window is shorter than
    2/G for the fitted G.  Raises FitError (with residual diagnostics) on
    non-convergence.
    """
    t = np.asarray(times, dtype=float)
    s = np.asarray(series, dtype=float)
    if t.shape != s.shape or t.ndim != 1:
        raise ValueError("times and series must be 1-d arrays of equal length")
    if len(t) < 10:
        raise ValueError(f"need >= 10 points for the fit, got {len(t)}")

    a0 = float(s[-1])
    b0 = a0 - float(s[0])
    span = float(t[-1] - t[0])
    # crude rate guess: first time the residual to the asymptote halves
    resid0 = np.abs(s - a0)
    idx = np.nonzero(resid0 < 0.5 * max(abs(b0), 1e-12))[0]
    t_half = float(t[idx[0]]) if len(idx) and t[idx[0]] > 0 else span / 3.0
    g0 = np.log(2.0) / max(t_half, span / 100.0)

    def f(tt, a, b, g):
        return a - b * np.exp(-g * tt)

    try:
        popt, _ = curve_fit(f, t, s, p0=(a0, b0, g0), maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"exponential fit did not converge: {exc}",
                       residuals=s - f(t, a0, b0, g0)) from exc
    a, b, g = (float(v) for v in popt)
    if g < 0:  # decaying fit written with the opposite sign convention
        raise FitError("fitted rate is negative; series is not a saturating "
                       "exponential", residuals=s - f(t, *popt))
    resid = s - f(t, a, b, g)
    rms = float(np.sqrt(np.mean(resid**2)))
    if span * g < 2.0:
        warnings.warn(f"fit window spans only {span * g:.2f}/rate < 2; "
                      "rate poorly constrained", RuntimeWarning)
    fit = ExponentialFit(rate=g, asymptote=a, amplitude=b,
                         residual_rms=rms, n_points=len(t))
    return fit
