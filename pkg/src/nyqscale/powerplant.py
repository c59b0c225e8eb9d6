"""Concrete actuators and controllers of the frequency-reserve test case:
the FCR design target, hydro turbine + model-matching FCR controller, wind
turbine + FFR controller, and per-bus agent assembly.

Units at every boundary: power MW, frequency Hz, inertia MW*s/Hz
(M = 2*W_kin/f0 with f0 = 50 Hz, so a kinetic energy given in GWs converts
as M = 2*W_GWs*1000/50). Angle signals are in Hz*s; see the README.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AssemblyError,
    InvalidInputError,
    ModelMatchingError,
    PoleHitError,
    PropernessError,
    UnstableTurbineModelError,
)
from .lti import (
    Polynomial,
    TransferFunction,
    mp_mirror,
    pade_delay,
    tf_combine,
)

__all__ = [
    "C_ROTOR_FLOOR_08",
    "Agent",
    "HydroParams",
    "WindParams",
    "FcrDesign",
    "make_fdes",
    "make_hydro_turbine",
    "make_fcr_controller",
    "make_wind_turbine",
    "make_ffr_controller",
    "assemble_agent",
]

# power sensitivity bound when the rotor may slow to 80% of the MPP speed
C_ROTOR_FLOOR_08 = 5.8e-3

_ZERO_TF = TransferFunction(Polynomial([0.0]), Polynomial([1.0]))
_S = Polynomial([0.0, 1.0])


@dataclass(frozen=True)
class HydroParams:
    """Hydro servo/turbine parameters (seconds, per-unit gate).

    ``rate_limit_pu_s`` only matters for time-domain simulation; the linear
    analysis never sees it.
    """

    servo_time_s: float
    water_time_s: float
    initial_gate_pu: float
    rate_limit_pu_s: float = 0.1

    def __post_init__(self):
        if self.servo_time_s <= 0 or self.water_time_s <= 0:
            raise InvalidInputError("servo and water time constants must be > 0")
        if not (0.0 < self.initial_gate_pu <= 1.0):
            raise InvalidInputError("initial gate must be in (0, 1]")
        if self.rate_limit_pu_s <= 0:
            raise InvalidInputError("rate limit must be > 0")

    @property
    def z(self) -> float:
        """Nonminimum-phase zero 1/(g0 * Tw) [rad/s]."""
        return 1.0 / (self.initial_gate_pu * self.water_time_s)


@dataclass(frozen=True)
class WindParams:
    """Wind turbine linearization data.

    ``c_omega`` is the power sensitivity to rotor-speed deviation; the
    conservative bound C_ROTOR_FLOOR_08 applies while the 80% rotor-speed
    floor is enforced. ``k_stab`` defaults to the conservative 2*v*c_omega.
    ``p_nom_mw``/``p_mpp_mw`` are carried for reporting and the energy
    bound-compliance proxy; the linearization itself does not use them.
    """

    wind_speed_m_s: float
    c_omega: float = C_ROTOR_FLOOR_08
    k_stab: float | None = None
    p_nom_mw: float = 0.0
    p_mpp_mw: float = 0.0
    enforce_rotor_floor: bool = True

    def __post_init__(self):
        if self.wind_speed_m_s <= 0:
            raise InvalidInputError("wind speed must be positive")
        if self.c_omega <= 0:
            raise InvalidInputError("c_omega must be positive")
        if self.enforce_rotor_floor and self.c_omega > C_ROTOR_FLOOR_08 * (1 + 1e-12):
            raise InvalidInputError(
                f"c_omega = {self.c_omega} exceeds the 80% rotor-speed bound "
                f"{C_ROTOR_FLOOR_08}"
            )

    @property
    def z(self) -> float:
        return self.wind_speed_m_s * self.c_omega

    @property
    def k_stab_effective(self) -> float:
        return 2.0 * self.z if self.k_stab is None else self.k_stab


def make_fdes(k_mw_per_hz: float) -> TransferFunction:
    """FCR design target k*(6.5s+1)/((2s+1)(17s+1)); positive real on the
    imaginary axis, DC gain k."""
    if k_mw_per_hz <= 0:
        raise InvalidInputError("FCR gain k must be positive")
    num = Polynomial([1.0, 6.5]) * k_mw_per_hz
    den = Polynomial([1.0, 2.0]) * Polynomial([1.0, 17.0])
    return TransferFunction(num, den)


def make_hydro_turbine(p: HydroParams) -> TransferFunction:
    """Linearized hydro servo+turbine 2(z-s)/((s+2z)(s*Ty+1)) with
    z = 1/(g0*Tw): unit DC gain, strictly proper, exactly one RHP zero."""
    z = p.z
    num = Polynomial([2.0 * z, -2.0])
    den = Polynomial([2.0 * z, 1.0]) * Polynomial([1.0, p.servo_time_s])
    return TransferFunction(num, den)


@dataclass(frozen=True)
class FcrDesign:
    """Model-matching FCR result: the feedback controller K, the verified
    composed actuator F = K*H (in its exactly cancelled all-pass form
    c*F_des*(z-s)/(z+s)), and the turbine's NMP zero z."""

    controller: TransferFunction
    actuator: TransferFunction
    z: float


def make_fcr_controller(
    c_share: float,
    f_des: TransferFunction,
    h_hydro: TransferFunction,
) -> FcrDesign:
    """Model matching against a nonminimum-phase hydro turbine:
    K = c * F_des * Hhat^-1 with Hhat the minimum-phase mirror of H.

    The composition K*H must reduce exactly to c*F_des*(z-s)/(z+s); the
    identity is verified by cross-multiplied coefficients (residual 1e-9
    relative) and the cancelled form is what the returned ``actuator``
    carries -- the improper mirror inverse is never exposed on its own.
    """
    if not (0.0 < c_share <= 1.0):
        raise InvalidInputError("FCR share must be in (0, 1]")
    rhp_zeros = [zz for zz in h_hydro.zeros if zz.real > 0]
    if len(rhp_zeros) != 1 or abs(rhp_zeros[0].imag) > 1e-9 * (1 + abs(rhp_zeros[0])):
        raise InvalidInputError(
            "hydro turbine must carry exactly one real RHP zero"
        )
    z = rhp_zeros[0].real
    h_hat = mp_mirror(h_hydro)
    controller = tf_combine("series", c_share * f_des, h_hat.inverse())
    if not controller.is_proper:
        raise PropernessError(
            "model-matching controller came out improper; the design target "
            "must roll off at least as fast as the turbine"
        )
    composed = tf_combine("series", controller, h_hydro)
    target = TransferFunction(
        c_share * f_des.num * Polynomial([z, -1.0]),
        f_des.den * Polynomial([z, 1.0]),
    )
    lhs = (composed.num * target.den).as_array()
    rhs = (target.num * composed.den).as_array()
    m = max(len(lhs), len(rhs))
    lhs = np.pad(lhs, (0, m - len(lhs)))
    rhs = np.pad(rhs, (0, m - len(rhs)))
    scale = max(np.abs(lhs).max(), np.abs(rhs).max(), 1.0)
    residual = np.abs(lhs - rhs).max() / scale
    if residual > 1e-9:
        raise ModelMatchingError(
            f"K*H failed to reproduce c*F_des*(z-s)/(z+s): residual {residual:.3g}"
        )
    return FcrDesign(controller=controller, actuator=target, z=z)


def make_wind_turbine(p: WindParams) -> TransferFunction:
    """Wind turbine linearization (s-z)/(s + k_stab - z), z = v*c_omega.

    With the conservative k_stab = 2*v*c_omega this is the all-pass
    (s-z)/(s+z): DC gain -1, high-frequency gain +1, overestimating the
    negative phase shift.
    """
    z = p.z
    k_stab = p.k_stab_effective
    if k_stab <= z:
        raise UnstableTurbineModelError(
            f"k_stab = {k_stab} must exceed z = {z} for a stable turbine model"
        )
    return TransferFunction(Polynomial([-z, 1.0]), Polynomial([k_stab - z, 1.0]))


def make_ffr_controller(
    c_share: float,
    k_ffr_mw_per_hz: float,
    tau_s: float,
    h_wind: TransferFunction,
) -> TransferFunction:
    """Proportional FFR with washout and actuation delay:
    F = c * k_ffr * (5s e^(-s tau)/(5s+1)) * H_wind.

    The washout (corner 0.2 rad/s) forces zero DC gain, so the turbine is
    never asked for sustained power; the delay rides on the transfer
    function exactly (rationalized only for state-space work).
    """
    if c_share <= 0:
        raise InvalidInputError("FFR share must be positive")
    if tau_s < 0:
        raise InvalidInputError("delay must be nonnegative")
    washout = TransferFunction(
        Polynomial([0.0, 5.0]) * (c_share * k_ffr_mw_per_hz),
        Polynomial([1.0, 5.0]),
        delay_s=tau_s,
    )
    return tf_combine("series", washout, h_wind)


@dataclass(frozen=True)
class Agent:
    """Per-bus swing dynamics d_i -> delta_i:

        g_i(s) = 1 / (s^2 M + s*(sum F_k(s) + D) + R(s)).

    Frequency-actuator parts are kept as separate transfer functions so a
    delayed branch coexists exactly with delay-free ones; frequency-domain
    evaluation uses the exact exponentials, while ``g_rational`` substitutes
    diagonal Pade approximants for realization and pole gates.
    """

    inertia: float
    f_parts: tuple[TransferFunction, ...]
    load_damping: float = 0.0
    angle_actuator: TransferFunction = _ZERO_TF
    f_part_names: tuple[str, ...] = ()
    bus: int | None = None

    def __post_init__(self):
        if self.inertia < 0 or self.load_damping < 0:
            raise InvalidInputError("inertia and load damping must be >= 0")
        if self.f_part_names and len(self.f_part_names) != len(self.f_parts):
            raise InvalidInputError("part names must match parts")
        if not self.f_part_names:
            object.__setattr__(
                self,
                "f_part_names",
                tuple(f"F{k + 1}" for k in range(len(self.f_parts))),
            )
        if self.angle_actuator.delay_s:
            raise InvalidInputError("delayed angle actuators are not supported")

    # -- structure ----------------------------------------------------------
    @property
    def has_delay(self) -> bool:
        return any(f.delay_s > 0 for f in self.f_parts)

    @property
    def freq_actuator(self) -> TransferFunction:
        """Single-TF view of the frequency actuator; only available when all
        parts share one delay (use ``f_parts`` otherwise)."""
        return self.freq_actuator_rational(None)

    def freq_actuator_rational(self, pade_order: int | None = None) -> TransferFunction:
        """Sum of the F parts as one rational function. Delayed parts demand
        a ``pade_order``; with ``None`` only exactly-equal delays combine."""
        if not self.f_parts:
            return _ZERO_TF
        parts = []
        for f in self.f_parts:
            if f.delay_s and pade_order is not None:
                parts.append(
                    tf_combine(
                        "series",
                        TransferFunction(f.num, f.den),
                        pade_delay(f.delay_s, pade_order),
                    )
                )
            else:
                parts.append(f)
        total = parts[0]
        for f in parts[1:]:
            total = tf_combine("parallel", total, f)
        return total

    # -- the agent transfer function -----------------------------------------
    def g_value(self, s):
        """Exact evaluation of g(s); vectorized over s. Delays enter through
        the exact exponential."""
        s_arr = np.asarray(s, dtype=complex)
        total_f = np.zeros_like(s_arr)
        scale = np.zeros(s_arr.shape, dtype=float)
        for f in self.f_parts:
            val = f(s_arr)
            total_f = total_f + val
            scale = scale + np.abs(val)
        chi = s_arr * s_arr * self.inertia + s_arr * (total_f + self.load_damping)
        scale = np.abs(s_arr) ** 2 * self.inertia + np.abs(s_arr) * (
            scale + self.load_damping
        )
        if not self.angle_actuator.num.is_zero:
            rv = self.angle_actuator(s_arr)
            chi = chi + rv
            scale = scale + np.abs(rv)
        hit = np.abs(chi) <= 1e-12 * np.maximum(scale, 1e-300)
        if np.any(hit):
            bad = s_arr[hit] if s_arr.ndim else s_arr
            raise PoleHitError(complex(np.atleast_1d(bad)[0]))
        out = 1.0 / chi
        return out if s_arr.ndim else complex(out)

    def g_rational(self, pade_order: int | None = 3) -> TransferFunction:
        """g as a single rational function (delays Pade-rationalized at the
        given order). Exact whenever the agent carries no delay."""
        F = self.freq_actuator_rational(pade_order if self.has_delay else None)
        if self.load_damping:
            F = tf_combine("parallel", F, TransferFunction.constant(self.load_damping))
        nF, dF = F.num, F.den
        nR, dR = self.angle_actuator.num, self.angle_actuator.den
        den = Polynomial([0.0, 0.0, self.inertia]) * dF * dR + _S * nF * dR + nR * dF
        num = dF * dR
        if den.is_zero:
            raise AssemblyError("agent has no dynamics (algebraic node)")
        return TransferFunction(num, den)

    def rational_poles(self, pade_order: int | None = 3) -> tuple[complex, ...]:
        return self.g_rational(pade_order).poles


def assemble_agent(
    inertia_mw_s_per_hz: float,
    f_parts: Sequence[TransferFunction] = (),
    load_damping_mw_per_hz: float = 0.0,
    angle_actuator: TransferFunction | None = None,
    part_names: Sequence[str] = (),
    bus: int | None = None,
) -> Agent:
    """Validate and build a per-bus agent. An algebraic node (no inertia, no
    actuators, no damping) cannot be an agent -- Kron-reduce it instead."""
    R = angle_actuator if angle_actuator is not None else _ZERO_TF
    parts = tuple(f_parts)
    all_f_zero = all(f.num.is_zero for f in parts)
    if (
        inertia_mw_s_per_hz == 0.0
        and load_damping_mw_per_hz == 0.0
        and all_f_zero
        and R.num.is_zero
    ):
        raise AssemblyError(
            "algebraic node: all of M, F, R, D are zero; remove it by Kron "
            "reduction before assembling agents"
        )
    return Agent(
        inertia=float(inertia_mw_s_per_hz),
        f_parts=parts,
        load_damping=float(load_damping_mw_per_hz),
        angle_actuator=R,
        f_part_names=tuple(part_names),
        bus=bus,
    )
