"""Ground-truth simulator of the 3-DoF underactuated vessel.

State is eta = [p_x, p_y, psi] in the NED inertial frame plus body-frame
velocities nu = [u, v, r] (surge, sway, yaw rate). The kinetics are

    m u_dot   = X + f_u(x, t)
    m v_dot   = Y + f_v(x, t)
    I_z r_dot = N + f_r(x, t)

where f_* lump drag, optional Coriolis coupling and the exogenous
disturbance. The tracking controller never reads anything defined here
except the measured VesselState.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonFiniteState

TWO_PI = 2.0 * math.pi


def wrap_angle(psi: float) -> float:
    """Wrap to [0, 2*pi)."""
    psi = math.fmod(psi, TWO_PI)
    return psi + TWO_PI if psi < 0.0 else psi


@dataclass(frozen=True)
class VesselState:
    """Full vessel state at simulation time t."""

    p_x: float
    p_y: float
    psi: float
    u: float
    v: float
    r: float
    t: float = 0.0

    def __post_init__(self):
        vals = (self.p_x, self.p_y, self.psi, self.u, self.v, self.r, self.t)
        if not all(math.isfinite(x) for x in vals):
            raise NonFiniteState(f"non-finite vessel state: {vals}")

    @property
    def position(self) -> tuple[float, float]:
        return (self.p_x, self.p_y)

    def speed(self) -> float:
        return math.hypot(self.u, self.v)


@dataclass(frozen=True)
class DragCoeffs:
    """Linear + quadratic drag per axis; force = -(d1*w + d2*w*|w|)."""

    d1_u: float = 50.0
    d2_u: float = 25.0
    d1_v: float = 200.0
    d2_v: float = 250.0
    d1_r: float = 400.0
    d2_r: float = 300.0

    def __post_init__(self):
        for name in ("d1_u", "d2_u", "d1_v", "d2_v", "d1_r", "d2_r"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"drag coefficient {name} must be >= 0")


@dataclass(frozen=True)
class VesselParams:
    """Simulation-truth mass/inertia/actuator geometry.

    Defaults are sized for a ~4 m boat; they are declared simulation fiction,
    freely overridable per scenario, and invisible to the controller.
    """

    m: float = 300.0           # kg
    Iz: float = 400.0          # kg m^2
    Delta_x: float = 1.5       # m, thruster arm aft of CG
    drag: DragCoeffs = field(default_factory=DragCoeffs)
    coriolis_on: bool = False

    def __post_init__(self):
        if self.m <= 0.0 or self.Iz <= 0.0 or self.Delta_x <= 0.0:
            raise ValueError("m, Iz and Delta_x must be positive")


@dataclass(frozen=True)
class AxisDisturbance:
    """One axis of the exogenous disturbance: bias + sinusoid + bounded noise."""

    bias: float = 0.0
    sin_amp: float = 0.0
    sin_freq_hz: float = 0.0
    sin_phase: float = 0.0
    noise_amp: float = 0.0

    @property
    def bound(self) -> float:
        return abs(self.bias) + abs(self.sin_amp) + abs(self.noise_amp)


# Band of the seeded noise sinusoids [Hz].
_NOISE_FREQ_LO = 0.05
_NOISE_FREQ_HI = 0.5
_NOISE_TERMS = 4


class DisturbanceProfile:
    """Deterministic bounded disturbance wrench tau_d(t) = [tau_x, tau_y, tau_psi].

    The "noise" component is a seeded mean of sinusoids so the signal stays
    smooth (RK4-friendly), uniformly bounded by noise_amp, and byte-for-byte
    reproducible given the seed.
    """

    def __init__(self, x: AxisDisturbance | None = None, y: AxisDisturbance | None = None,
                 psi: AxisDisturbance | None = None, seed: int = 0):
        self.x = x or AxisDisturbance()
        self.y = y or AxisDisturbance()
        self.psi = psi or AxisDisturbance()
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        self._noise = []
        for _ in range(3):
            freqs = rng.uniform(_NOISE_FREQ_LO, _NOISE_FREQ_HI, _NOISE_TERMS)
            phases = rng.uniform(0.0, TWO_PI, _NOISE_TERMS)
            self._noise.append((freqs, phases))

    @property
    def axes(self) -> tuple[AxisDisturbance, AxisDisturbance, AxisDisturbance]:
        return (self.x, self.y, self.psi)

    @property
    def bounds(self) -> tuple[float, float, float]:
        """Declared per-axis bounds |tau_d,i(t)| never exceeds."""
        return (self.x.bound, self.y.bound, self.psi.bound)

    def _axis_value(self, idx: int, axis: AxisDisturbance, t: float) -> float:
        val = axis.bias
        if axis.sin_amp != 0.0:
            val += axis.sin_amp * math.sin(TWO_PI * axis.sin_freq_hz * t + axis.sin_phase)
        if axis.noise_amp != 0.0:
            freqs, phases = self._noise[idx]
            s = 0.0
            for k in range(_NOISE_TERMS):
                s += math.sin(TWO_PI * freqs[k] * t + phases[k])
            val += axis.noise_amp * s / _NOISE_TERMS
        return val

    def value(self, t: float) -> tuple[float, float, float]:
        return (
            self._axis_value(0, self.x, t),
            self._axis_value(1, self.y, t),
            self._axis_value(2, self.psi, t),
        )

    def reseeded(self, seed: int) -> "DisturbanceProfile":
        """Same amplitudes/frequencies, fresh noise and sinusoid phases."""
        rng = np.random.default_rng(int(seed))
        shifted = [
            replace(ax, sin_phase=ax.sin_phase + rng.uniform(0.0, TWO_PI))
            for ax in self.axes
        ]
        return DisturbanceProfile(x=shifted[0], y=shifted[1], psi=shifted[2], seed=int(seed))

    @classmethod
    def zero(cls) -> "DisturbanceProfile":
        return cls()


@dataclass(frozen=True)
class ActuatorCommand:
    """Thrust [N] and rudder angle [rad]; thrust is never negative."""

    F_T: float
    alpha_r: float

    def __post_init__(self):
        if not (math.isfinite(self.F_T) and math.isfinite(self.alpha_r)):
            raise ValueError("actuator command must be finite")
        if self.F_T < 0.0:
            raise ValueError(f"thrust must be >= 0, got {self.F_T}")

    @classmethod
    def clamped(cls, u_F: float, u_alpha: float, F_T_max: float, alpha_r_max: float) -> "ActuatorCommand":
        """Construct with bit-exact saturation to [0, F_T_max] x [-alpha_r_max, alpha_r_max]."""
        alpha = min(max(u_alpha, -alpha_r_max), alpha_r_max)
        thrust = min(max(u_F, 0.0), F_T_max)
        return cls(F_T=thrust, alpha_r=alpha)

    def within(self, F_T_max: float, alpha_r_max: float) -> bool:
        return 0.0 <= self.F_T <= F_T_max and abs(self.alpha_r) <= alpha_r_max


def actuator_to_wrench(cmd: ActuatorCommand, params: VesselParams) -> tuple[float, float, float]:
    """Map (thrust, rudder) of the single rear thruster to (X, Y, N).

    The lateral force and yaw torque are rigidly coupled: Y = N / Delta_x.
    """
    X = cmd.F_T * math.cos(cmd.alpha_r)
    Y = cmd.F_T * math.sin(cmd.alpha_r)
    N = params.Delta_x * Y
    return (X, Y, N)


def rotation_matrix(psi: float) -> np.ndarray:
    """R(psi) in SO(3) rotating body-frame [u, v, r] rates into eta_dot."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def lumped_forces(state: VesselState, params: VesselParams, dist: DisturbanceProfile,
                  t: float | None = None) -> tuple[float, float, float]:
    """The unknown-to-the-controller forces (f_u, f_v, f_r) at (state, t)."""
    u, v, r = state.u, state.v, state.r
    d = params.drag
    tau = dist.value(state.t if t is None else t)
    f_u = tau[0] - (d.d1_u * u + d.d2_u * u * abs(u))
    f_v = tau[1] - (d.d1_v * v + d.d2_v * v * abs(v))
    f_r = tau[2] - (d.d1_r * r + d.d2_r * r * abs(r))
    if params.coriolis_on:
        f_u += params.m * v * r
        f_v -= params.m * u * r
    return (f_u, f_v, f_r)


def _derivative(x, t, wrench, params, dist):
    """Right-hand side of the ODE at raw state tuple x = (px, py, psi, u, v, r)."""
    px, py, psi, u, v, r = x
    c, s = math.cos(psi), math.sin(psi)
    d = params.drag
    tau = dist.value(t)
    f_u = tau[0] - (d.d1_u * u + d.d2_u * u * abs(u))
    f_v = tau[1] - (d.d1_v * v + d.d2_v * v * abs(v))
    f_r = tau[2] - (d.d1_r * r + d.d2_r * r * abs(r))
    if params.coriolis_on:
        f_u += params.m * v * r
        f_v -= params.m * u * r
    return (
        u * c - v * s,
        u * s + v * c,
        r,
        (wrench[0] + f_u) / params.m,
        (wrench[1] + f_v) / params.m,
        (wrench[2] + f_r) / params.Iz,
    )


def step(state: VesselState, cmd: ActuatorCommand, params: VesselParams,
         dist: DisturbanceProfile, dt: float) -> VesselState:
    """One fixed-step RK4 integration with the command held over the step."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    wrench = actuator_to_wrench(cmd, params)
    x0 = (state.p_x, state.p_y, state.psi, state.u, state.v, state.r)
    t0 = state.t
    h = dt

    k1 = _derivative(x0, t0, wrench, params, dist)
    x1 = tuple(x0[i] + 0.5 * h * k1[i] for i in range(6))
    k2 = _derivative(x1, t0 + 0.5 * h, wrench, params, dist)
    x2 = tuple(x0[i] + 0.5 * h * k2[i] for i in range(6))
    k3 = _derivative(x2, t0 + 0.5 * h, wrench, params, dist)
    x3 = tuple(x0[i] + h * k3[i] for i in range(6))
    k4 = _derivative(x3, t0 + h, wrench, params, dist)

    out = [x0[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(6)]
    if not all(math.isfinite(x) for x in out):
        raise NonFiniteState(f"RK4 produced non-finite state at t={t0}: {out}")
    return VesselState(
        p_x=out[0], p_y=out[1], psi=wrap_angle(out[2]),
        u=out[3], v=out[4], r=out[5], t=t0 + dt,
    )
