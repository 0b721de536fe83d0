"""Deterministic cross-check of the Monte Carlo engine in the Markovian limit.

For Markovian feedback (instantaneous records driving the controls, no
filter memory, minimal loop delay) the ensemble-mean Bloch vector obeys an
affine equation ``dr/dt = A r + b``.  Rather than transcribing the
feedback-master-equation generator analytically, this module extracts
``(A, b)`` from the step kernel itself by brute force: probe states are
advanced through the actual stepper, the mean one-step increment is
estimated, and an affine map is fitted.  Affinity is the tested theory, so
a large fit residual flags either a non-Markovian configuration or a broken
stepper; the fixed points and spectra of the fitted map then validate the
Monte Carlo steady states independently of ensemble averaging.

Extraction details
------------------
* The loop applies controls with a one-step record lag, so the mean
  increment of the *first* step from a cold (zero-filled) delay buffer
  misses the feedback cross-correlation.  The estimator therefore advances
  two steps and measures the increment of the second one, by which point
  the state carries the back-action its delayed record correlates with.
* The raw increment estimator is dominated by the O(sqrt(dt)) martingale
  part of the noise, which carries no information about the mean.  Each
  noise sequence is paired with its negation (an antithetic pair); the pair
  average cancels every odd-order noise term exactly while leaving the mean
  untouched, reducing the sample count needed for a given precision by
  several orders of magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .controller import ControllerConfig, feedback_law
from .model import BlochVector, PhysicalParams, TargetState, bloch_from_angles, ideal_params
from .sme import _run_batch

__all__ = [
    "AffineGenerator",
    "OracleResidualError",
    "SingularGeneratorError",
    "extract_generator",
    "steady_state",
    "ideal_fixed_point_check",
    "DEFAULT_PROBES",
]

#: Probe states: the six axis poles plus one interior state, giving an
#: over-determined affine fit.
DEFAULT_PROBES = (
    (1.0, 0.0, 0.0), (-1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0), (0.0, -1.0, 0.0),
    (0.0, 0.0, 1.0), (0.0, 0.0, -1.0),
    (0.1, 0.1, 0.1),
)


class OracleResidualError(RuntimeError):
    """Affine fit residual far above its floor: non-Markovian config or broken stepper."""


class SingularGeneratorError(RuntimeError):
    """The fitted generator is (near-)singular; the config is marginally stable."""


@dataclass
class AffineGenerator:
    """Fitted affine generator dr/dt = A r + b of the ensemble mean.

    ``fit_residual`` is the rms misfit over probes and components;
    ``residual_floor`` its expected scale (statistical uncertainty of the
    probe means plus an O(dt) discretization allowance).
    """

    A: np.ndarray                 # (3, 3), 1/s
    b: np.ndarray                 # (3,), 1/s
    fit_residual: float
    residual_floor: float
    probe_states: np.ndarray      # (m, 3)
    probe_rates: np.ndarray       # (m, 3) measured E[dr]/dt
    probe_sems: np.ndarray        # (m, 3)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)


def extract_generator(cfg: ControllerConfig, params: PhysicalParams,
                      dt: float, n_probe: int, seed, *,
                      probes=DEFAULT_PROBES,
                      check_residual: bool = True) -> AffineGenerator:
    """Estimate the Markovian-limit mean generator by brute force.

    ``n_probe`` noise draws per probe state (used as n_probe // 2
    antithetic pairs).  Requires gamma1 * dt < 1e-3 so the one-step
    discretization bias stays below the fit tolerances.
    """
    if params.gamma1 * dt >= 1e-3:
        raise ValueError("extraction requires gamma1 * dt < 1e-3; reduce dt")
    n_pairs = max(1, int(n_probe) // 2)
    rng = np.random.default_rng(seed)
    sqrt_dt = math.sqrt(dt)

    R = np.asarray(probes, dtype=float)
    rates = np.empty((len(R), 3))
    sems = np.empty((len(R), 3))
    for k, r0 in enumerate(R):
        blk = rng.standard_normal((2, 2, n_pairs)) * sqrt_dt
        inc = None
        for sgn in (1.0, -1.0):
            res = _run_batch(cfg, params, init=r0, duration=2 * dt, dt=dt,
                             noise=sgn * blk, markovian_limit=True,
                             stride=1, collect_series=True)
            d = res.series[:, 2, :] - res.series[:, 1, :]   # (n_pairs, 3)
            inc = d if inc is None else (inc + d) * 0.5
        inc /= dt
        rates[k] = inc.mean(axis=0)
        sems[k] = inc.std(axis=0, ddof=1) / math.sqrt(n_pairs)

    # affine least squares: rates = [R 1] @ [A^T; b^T]
    X = np.hstack([R, np.ones((len(R), 1))])
    coef, *_ = np.linalg.lstsq(X, rates, rcond=None)
    A = coef[:3].T
    b = coef[3]
    resid = rates - X @ coef
    fit_residual = float(np.sqrt(np.mean(resid**2)))
    scale = float(np.max(np.abs(rates)))
    floor = float(np.sqrt(np.mean(sems**2))) + 3.0 * scale * scale * dt
    if check_residual and fit_residual > 5.0 * floor:
        raise OracleResidualError(
            f"affine fit residual {fit_residual:.3g} exceeds 5 x floor "
            f"{floor:.3g}; config is non-Markovian or the stepper is broken")
    return AffineGenerator(A=A, b=b, fit_residual=fit_residual,
                           residual_floor=floor, probe_states=R,
                           probe_rates=rates, probe_sems=sems)


def steady_state(g: AffineGenerator, *, norm_tol: float = 0.05) -> BlochVector:
    """Fixed point r* = -A^{-1} b of the fitted generator.

    Rejects near-singular generators (marginally stable configs) and
    unphysical fixed points with |r*| > 1 + norm_tol.
    """
    if np.linalg.cond(g.A) > 1e8:
        raise SingularGeneratorError("generator matrix is near-singular")
    r = -np.linalg.solve(g.A, g.b)
    nrm = float(np.linalg.norm(r))
    if nrm > 1.0 + norm_tol:
        raise SingularGeneratorError(
            f"fitted steady state |r*| = {nrm:.3f} is unphysical")
    return BlochVector.from_array(r)


def ideal_fixed_point_check(target: TargetState, *, dt: float = 2e-9,
                            n_probe: int = 400_000, seed=0) -> float:
    """Distance between the ideal-limit steady state and the target vector.

    Runs the feedback law at unit efficiency with no dephasing in the
    Markovian limit; returns |r* - n(target)|, which must be small (< 1e-2)
    for every target if the controller conventions are correct.
    """
    params = ideal_params()
    cfg = feedback_law(target, params)
    gen = extract_generator(cfg, params, dt, n_probe, seed)
    n = bloch_from_angles(target).as_array()
    r = steady_state(gen)
    return float(np.linalg.norm(r.as_array() - n))
