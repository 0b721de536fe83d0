"""The three feedback boxes and the stabilizing feedback law.

The controller converts (delayed, filtered) heterodyne record quadratures
``(hI, hQ)`` into the control vector ``(u, v, w)``:

* **Rabi box** - transverse drive proportional to the record rotated by a
  phase ``alpha``: ``(du, dv) = G_R * R(alpha) @ (hI, hQ)``.
* **FM box** - qubit-frequency modulation proportional to the record
  quadrature at phase ``beta``:  ``w = G_FM * (hI cos(beta) + hQ sin(beta))``
  in the linear model, or the full intensity response
  ``w = k |eps0 e^(i beta) + G (hI + i hQ)|^2 - k eps0^2`` of an AC-Stark
  mixer in the ``exact`` model (the static ``k eps0^2`` offset renormalizes
  the qubit frequency and is subtracted).
* **Drift box** - constant pre-compensation drive ``(u_bar, v_bar)``.

Handedness conventions (rotation sense of ``R(alpha)`` and of the Bloch
rotation generated by ``(u, v, w)``) are frozen in ``docs/conventions.md``;
they are fixed jointly by requiring that the feedback law below makes every
target state an attracting fixed point in the ideal, perfect-efficiency
limit (see ``tests/test_oracle.py``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .model import ControlVector, PhysicalParams, TargetState

__all__ = [
    "FmNonlinearity",
    "ControllerConfig",
    "feedback_law",
    "rabi_box",
    "fm_box",
    "total_controls",
    "optimal_rabi_gain",
    "calibrated_fm_nonlinearity",
    "DEFAULT_FM_KG2",
]

#: Default strength k*G^2 of the FM-box quadratic response, calibrated so
#: that with the measured device parameters the optimal FM phase shifts by
#: about -10 degrees relative to the linear model (see demos/03 and the
#: beta-sweep acceptance check).
DEFAULT_FM_KG2 = 2.4e-3

_FM_MODES = ("off", "linear", "exact")


@dataclass(frozen=True)
class FmNonlinearity:
    """Parameters of the exact (quadratic) FM-box response.

    ``k`` is the AC-Stark coefficient (rad/s per squared amplitude unit),
    ``eps0`` the large carrier amplitude, ``G`` the record-path amplitude
    gain.  The small-signal gain is ``2 * k * G * eps0`` and must equal the
    configured ``G_FM``; the nonlinearity strength is set by ``k * G**2``.
    """

    k: float
    eps0: float
    G: float

    def __post_init__(self):
        if self.eps0 <= 0:
            raise ValueError("exact FM mode requires eps0 > 0 (gain constraint unsatisfiable)")
        if self.k < 0 or self.G < 0:
            raise ValueError("FM nonlinearity k and G must be >= 0")

    @property
    def linear_gain(self) -> float:
        return 2.0 * self.k * self.G * self.eps0

    @property
    def static_offset(self) -> float:
        """Carrier-induced frequency offset k*eps0^2 (rad/s), renormalized away."""
        return self.k * self.eps0**2


@dataclass(frozen=True)
class ControllerConfig:
    """Gains, phases and offsets of the Rabi, FM and Drift boxes.

    Gains have units of rad * s^(-1/2) (they multiply record quadratures of
    units s^(-1/2) to produce rad/s control amplitudes); phases are rad;
    drifts are rad/s.
    """

    G_R: float = 0.0
    alpha: float = 0.0
    G_FM: float = 0.0
    beta: float = 0.0
    u_bar: float = 0.0
    v_bar: float = 0.0
    fm_mode: str = "off"
    fm_nl: FmNonlinearity | None = None

    def __post_init__(self):
        if self.G_R < 0 or self.G_FM < 0:
            raise ValueError("gains must be >= 0")
        if self.fm_mode not in _FM_MODES:
            raise ValueError(f"fm_mode must be one of {_FM_MODES}, got {self.fm_mode!r}")
        if self.fm_mode == "exact":
            if self.fm_nl is None:
                raise ValueError("exact FM mode requires fm_nl parameters")
            if not math.isclose(self.fm_nl.linear_gain, self.G_FM,
                                rel_tol=1e-9, abs_tol=1e-9):
                raise ValueError(
                    f"exact FM mode requires 2*k*G*eps0 == G_FM "
                    f"({self.fm_nl.linear_gain} != {self.G_FM})")

    @property
    def fm_active(self) -> bool:
        return self.fm_mode != "off"

    def with_exact_fm(self, kG2: float = DEFAULT_FM_KG2) -> "ControllerConfig":
        """Switch to the exact FM model at the same small-signal gain."""
        return replace(self, fm_mode="exact",
                       fm_nl=calibrated_fm_nonlinearity(self.G_FM, kG2))


def optimal_rabi_gain(params: PhysicalParams) -> float:
    """Rabi gain sqrt(gamma1 / (2 eta)) maximizing the stabilized excitation."""
    if params.eta <= 0:
        raise ValueError("eta must be > 0")
    return math.sqrt(params.gamma1 / (2.0 * params.eta))


def calibrated_fm_nonlinearity(G_FM: float, kG2: float = DEFAULT_FM_KG2) -> FmNonlinearity:
    """Build exact-mode parameters with small-signal gain ``G_FM``.

    The free ratio G/eps0 controls the quadratic-response strength
    ``k * G**2 == kG2``; eps0 is fixed to 1 without loss of generality
    (only k*G*eps0 and k*G^2 enter the dynamics).
    """
    if G_FM <= 0:
        if kG2 != 0.0:
            raise ValueError("cannot calibrate a nonlinearity at zero gain")
        return FmNonlinearity(k=0.0, eps0=1.0, G=0.0)
    kG = G_FM / 2.0           # with eps0 = 1
    G = kG2 / kG
    return FmNonlinearity(k=kG / G if G > 0 else 0.0, eps0=1.0, G=G)


def feedback_law(target: TargetState, params: PhysicalParams) -> ControllerConfig:
    """Stabilizing gains/phases/drifts for a target state (theta, phi).

    With g = sqrt(gamma1 / (8 eta)) and X = (gamma1 / (8 eta)) *
    (cos(theta) - eta) * sin(theta):

    ==========  =============================
    G_R         g * (1 + cos(theta))
    alpha       pi / 2
    G_FM        g * sin(theta)
    beta        phi - pi / 2
    u_bar       -X * sin(phi)
    v_bar       +X * cos(phi)
    ==========  =============================

    In the ideal limit (eta = 1, no dephasing, no delay, infinite
    bandwidth) these parameters stabilize the target exactly.  At theta in
    {0, pi} the FM gain and both drifts vanish and the FM box is switched
    off entirely; at theta = pi every box is off and the qubit relaxes to
    the ground state, which is the target.
    """
    if params.eta <= 0:
        raise ValueError("feedback law requires eta > 0")
    g = math.sqrt(params.gamma1 / (8.0 * params.eta))
    ct, st = math.cos(target.theta), math.sin(target.theta)
    if abs(st) < 1e-12:  # poles: sin(pi) is not an exact float zero
        st = 0.0
    X = (params.gamma1 / (8.0 * params.eta)) * (ct - params.eta) * st
    G_FM = g * st
    fm_on = G_FM > 0.0
    # at singular azimuths (sin(phi) or cos(phi) = 0) the corresponding drift
    # is read off the explicit equality and the other one set to exactly zero
    sp, cp = math.sin(target.phi), math.cos(target.phi)
    if abs(sp) < 1e-12:
        sp = 0.0
    if abs(cp) < 1e-12:
        cp = 0.0
    return ControllerConfig(
        G_R=g * (1.0 + ct),
        alpha=math.pi / 2.0,
        G_FM=G_FM,
        beta=target.phi - math.pi / 2.0,
        u_bar=-X * sp,
        v_bar=X * cp,
        fm_mode="linear" if fm_on else "off",
    )


def rabi_box(hI, hQ, cfg: ControllerConfig):
    """Transverse drive from record quadratures rotated by ``alpha``.

    Returns ``(du, dv) = G_R * R(alpha) @ (hI, hQ)`` where ``R`` rotates the
    record vector clockwise:

        du = G_R * ( cos(alpha) hI + sin(alpha) hQ)
        dv = G_R * (-sin(alpha) hI + cos(alpha) hQ)

    The clockwise sense is the frozen convention (docs/conventions.md);
    together with the Bloch rotation sense it makes alpha = pi/2 stabilize
    the excited state.  Accepts scalars or numpy arrays.
    """
    ca, sa = math.cos(cfg.alpha), math.sin(cfg.alpha)
    du = cfg.G_R * (ca * hI + sa * hQ)
    dv = cfg.G_R * (-sa * hI + ca * hQ)
    return du, dv


def fm_box(hI, hQ, cfg: ControllerConfig):
    """Frequency-modulation control w from the FM-path record quadratures.

    linear mode:  w = G_FM * (hI cos(beta) + hQ sin(beta))
    exact mode:   w = k * [2 G eps0 (hI cos(beta) + hQ sin(beta))
                           + G^2 (hI^2 + hQ^2)]

    i.e. the exact mode is ``k |eps0 e^(i beta) + G (hI + i hQ)|^2`` with the
    static carrier offset ``k eps0^2`` already subtracted; the two modes
    differ exactly by the quadratic term.  Accepts scalars or numpy arrays.
    """
    if not cfg.fm_active:
        raise ValueError("fm_box called with fm_mode='off'")
    cb, sb = math.cos(cfg.beta), math.sin(cfg.beta)
    h_beta = cb * hI + sb * hQ
    if cfg.fm_mode == "linear":
        return cfg.G_FM * h_beta
    nl = cfg.fm_nl
    return nl.k * (2.0 * nl.G * nl.eps0 * h_beta + nl.G**2 * (hI * hI + hQ * hQ))


def total_controls(rabi_out, fm_out, cfg: ControllerConfig) -> ControlVector:
    """Combine box outputs with the static drifts: u = u_bar + du, etc."""
    du, dv = rabi_out
    w = 0.0 if fm_out is None else fm_out
    return ControlVector(cfg.u_bar + float(du), cfg.v_bar + float(dv), float(w))
