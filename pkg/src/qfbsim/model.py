"""Domain types and state geometry for the monitored-qubit feedback simulator.

Conventions used throughout the package:

* The qubit state is kept as a Bloch vector ``r = (x, y, z)`` of Pauli
  expectation values, with ``z = +1`` for the excited state ``|e>`` and
  ``z = -1`` for the ground state ``|g>``.  With this sign choice a
  steady-state value ``<sigma_z> = 0.17`` corresponds to 58.5 % excited
  population.
* A target state ``|Psi_(theta, phi)> = cos(theta/2)|e> +
  sin(theta/2) e^(i phi)|g>`` maps to the unit Bloch vector
  ``n = (sin(theta) cos(phi), sin(theta) sin(phi), cos(theta))``, so
  ``theta = 0`` is ``|e>`` and ``theta = pi`` is ``|g>``.
* All rates are angular-free inverse seconds (1/T), all times are seconds,
  all bandwidths are Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "BlochVector",
    "TargetState",
    "PhysicalParams",
    "ControlVector",
    "bloch_from_angles",
    "fidelity",
    "measured_params",
    "ideal_params",
]

#: Norm slack allowed for a Bloch vector after an exact rotation.
NORM_EPS = 1e-9


@dataclass(frozen=True)
class BlochVector:
    """Qubit state as Pauli expectation values (x, y, z).

    Valid states satisfy ``x**2 + y**2 + z**2 <= 1`` (pure states on the
    sphere, mixed states inside).  Instances are immutable and safe to
    share between concurrent workers.
    """

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @staticmethod
    def from_array(r) -> "BlochVector":
        r = np.asarray(r, dtype=float)
        return BlochVector(float(r[0]), float(r[1]), float(r[2]))

    def norm(self) -> float:
        return math.sqrt(self.x**2 + self.y**2 + self.z**2)

    def purity(self) -> float:
        """Purity tr(rho^2) = (1 + |r|^2) / 2."""
        return 0.5 * (1.0 + self.x**2 + self.y**2 + self.z**2)


@dataclass(frozen=True)
class TargetState:
    """Bloch-sphere target, polar angle theta in [0, pi], azimuth phi in [0, 2*pi)."""

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not (0.0 <= self.phi < 2.0 * math.pi):
            raise ValueError(f"phi must lie in [0, 2*pi), got {self.phi}")


@dataclass(frozen=True)
class PhysicalParams:
    """Measured device rates, efficiencies and signal-chain characteristics.

    Defaults are the measured values of the fluorescence-feedback experiment
    this simulator reproduces.  ``f_q``, ``f_c`` and ``delta`` are carried
    for bookkeeping only; the dynamics are integrated in the rotating frame.

    Attributes
    ----------
    gamma1 : float
        Energy relaxation rate (1/s).
    gamma_phi : float
        Pure dephasing rate (1/s).
    eta : float
        Total heterodyne measurement efficiency, in [0, 1].
    B : float
        Detection bandwidth of the feedback chain (Hz), one-pole model.
    B_f : float
        Bandwidth of the frequency-modulation path (Hz), must not exceed B.
    T_d : float
        Loop propagation delay (s).
    gamma_m : float
        Extra measurement-induced dephasing active whenever the FM box
        drives the qubit (1/s).
    f_q, f_c, delta : float
        Qubit frequency, cavity frequency and FM-drive detuning (Hz),
        bookkeeping only.
    thermal_z0 : float
        z component of the thermal-equilibrium initial state.
    """

    gamma1: float = 1.0 / 4.7e-6
    gamma_phi: float = 1.0 / 22e-6
    eta: float = 0.35
    B: float = 3.3e6
    B_f: float = 2.0e6
    T_d: float = 0.12e-6
    gamma_m: float = 1.0 / 84e-6
    f_q: float = 6.27e9
    f_c: float = 7.86e9
    delta: float = 100e6
    thermal_z0: float = -1.0

    def __post_init__(self):
        for name in ("gamma1", "gamma_phi", "gamma_m", "B", "B_f"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.T_d < 0:
            raise ValueError(f"T_d must be >= 0, got {self.T_d}")
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.B_f > self.B:
            raise ValueError(f"B_f ({self.B_f}) must not exceed B ({self.B})")
        if not (-1.0 <= self.thermal_z0 <= 1.0):
            raise ValueError(f"thermal_z0 must lie in [-1, 1], got {self.thermal_z0}")

    def thermal_state(self) -> BlochVector:
        return BlochVector(0.0, 0.0, self.thermal_z0)


@dataclass(frozen=True)
class ControlVector:
    """Instantaneous control amplitudes (u, v, w), rad/s.

    The control Hamiltonian is ``H_c/hbar = u sigma_x + v sigma_y + w sigma_z``;
    the corresponding Bloch-vector motion is ``dr/dt = 2 (u, v, w) x r``.
    The static carrier-induced frequency offset of the FM box is renormalized
    away and never appears in ``w``.
    """

    u: float
    v: float
    w: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v) and math.isfinite(self.w)):
            raise ValueError("control amplitudes must be finite")


def measured_params() -> PhysicalParams:
    """The measured device parameter set (all defaults)."""
    return PhysicalParams()


def ideal_params(eta: float = 1.0) -> PhysicalParams:
    """Idealized parameters: efficiency ``eta``, no dephasing channels.

    Signal-chain fields keep their defaults; runs that want the Markovian
    limit bypass them explicitly.
    """
    return replace(measured_params(), eta=eta, gamma_phi=0.0, gamma_m=0.0)


def bloch_from_angles(target: TargetState) -> BlochVector:
    """Unit Bloch vector of the target state.

    >>> bloch_from_angles(TargetState(0.0, 0.0))
    BlochVector(x=0.0, y=0.0, z=1.0)
    """
    st = math.sin(target.theta)
    return BlochVector(
        st * math.cos(target.phi),
        st * math.sin(target.phi),
        math.cos(target.theta),
    )


def fidelity(r: BlochVector, target: TargetState) -> float:
    """Fidelity F = (1 + r . n) / 2 between a (possibly mixed) state and a pure target.

    Equals 1 iff ``r`` is the target unit vector, and 0.5 for the maximally
    mixed state.  ``|r|`` may not exceed 1 (beyond numerical slack).
    """
    if r.norm() > 1.0 + 1e-6:
        raise ValueError(f"|r| = {r.norm()} exceeds 1; not a physical state")
    n = bloch_from_angles(target)
    return 0.5 * (1.0 + r.x * n.x + r.y * n.y + r.z * n.z)
