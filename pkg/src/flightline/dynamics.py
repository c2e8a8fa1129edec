"""Simplified rigid-body fixed-wing flight dynamics.

A deterministic 6-DOF model with a linear aerodynamic coefficient set,
fixed-step RK4 integration, and a damped-Newton trim solver.  Everything in
this module is a pure function of its inputs: identical arguments produce
bit-identical results, which the trajectory replay and the online/offline
equivalence checks rely on.

Conventions
-----------
* Flat-earth NED frame (north, east, down).  Altitude is ``-down``.
* Body frame: x forward, y right, z down.  Euler attitude (roll, pitch, yaw)
  with roll/yaw in (-pi, pi] and pitch in [-pi/2, pi/2].
* Controls are normalized: aileron/elevator/rudder in [-1, 1], throttle in
  [0, 1].  Surface effectiveness is folded into the control derivatives, so
  the coefficient values are "per unit of normalized command".
* No wind, constant gravity, constant sea-level density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import DivergenceError, ModelDomainError, StallFloorError, TrimInfeasibleError

GRAVITY = 9.80665  # m/s^2
AIR_DENSITY = 1.225  # kg/m^3, sea-level, held constant (desk-scale model)

#: Below this airspeed the aerodynamic model is meaningless (alpha/beta are
#: undefined as V -> 0).  Hitting it is an episode-terminating condition.
AIRSPEED_VALIDITY_FLOOR = 1.0  # m/s

#: Angle of attack used to estimate the maximum usable lift coefficient when
#: computing the stall speed of a preset.  The model is linear in alpha, so
#: this caps the pre-stall region the way a lift-curve break would.
STALL_ALPHA = math.radians(15.0)

DT_MIN = 0.01
DT_MAX = 0.5
DEFAULT_DT = 0.1

COEFFICIENT_NAMES = (
    "CL0", "CLa", "CD0", "k", "Cm0", "Cma", "Cmq", "Cmde",
    "Clb", "Clp", "Clda", "Cnb", "Cnr", "Cndr", "CYb",
)


@dataclass(frozen=True)
class AircraftState:
    """Full kinematic/dynamic state of one aircraft.

    position_ned: (north, east, down) in meters; down is negative above the
        ground reference.
    attitude: (roll, pitch, yaw) in radians.
    body_velocity: (u, v, w) in m/s, body frame.
    body_rates: (p, q, r) in rad/s.
    sim_time: seconds since episode start.
    """

    position_ned: tuple[float, float, float]
    attitude: tuple[float, float, float]
    body_velocity: tuple[float, float, float]
    body_rates: tuple[float, float, float]
    sim_time: float = 0.0

    @property
    def altitude(self) -> float:
        return -self.position_ned[2]

    @property
    def airspeed(self) -> float:
        u, v, w = self.body_velocity
        return math.sqrt(u * u + v * v + w * w)

    def is_finite(self) -> bool:
        return all(
            math.isfinite(x)
            for part in (self.position_ned, self.attitude, self.body_velocity, self.body_rates)
            for x in part
        ) and math.isfinite(self.sim_time)

    def as_dict(self) -> dict:
        return {
            "position_ned": list(self.position_ned),
            "attitude": list(self.attitude),
            "body_velocity": list(self.body_velocity),
            "body_rates": list(self.body_rates),
            "sim_time": self.sim_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AircraftState":
        return cls(
            position_ned=tuple(float(x) for x in d["position_ned"]),
            attitude=tuple(float(x) for x in d["attitude"]),
            body_velocity=tuple(float(x) for x in d["body_velocity"]),
            body_rates=tuple(float(x) for x in d["body_rates"]),
            sim_time=float(d["sim_time"]),
        )


@dataclass(frozen=True)
class ControlInputs:
    """Normalized control commands.

    Construction clamps out-of-range values (learning agents emit them
    routinely) and remembers whether clamping happened.
    """

    aileron: float = 0.0
    elevator: float = 0.0
    rudder: float = 0.0
    throttle: float = 0.0
    clamped: bool = False

    def __post_init__(self):
        for name in ("aileron", "elevator", "rudder", "throttle"):
            if not math.isfinite(getattr(self, name)):
                raise ModelDomainError(f"non-finite control input: {name}")
        clamped = False
        for name, lo, hi in (
            ("aileron", -1.0, 1.0),
            ("elevator", -1.0, 1.0),
            ("rudder", -1.0, 1.0),
            ("throttle", 0.0, 1.0),
        ):
            x = getattr(self, name)
            cx = min(hi, max(lo, x))
            if cx != x:
                object.__setattr__(self, name, cx)
                clamped = True
        if clamped:
            object.__setattr__(self, "clamped", True)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.aileron, self.elevator, self.rudder, self.throttle)

    def as_dict(self) -> dict:
        return {
            "aileron": self.aileron,
            "elevator": self.elevator,
            "rudder": self.rudder,
            "throttle": self.throttle,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ControlInputs":
        return cls(
            aileron=float(d["aileron"]),
            elevator=float(d["elevator"]),
            rudder=float(d["rudder"]),
            throttle=float(d["throttle"]),
        )


ZERO_CONTROLS = ControlInputs(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class AircraftParams:
    """Mass/geometry/aero description of one aircraft preset."""

    model_name: str
    mass: float  # kg
    wing_area: float  # m^2
    wing_span: float  # m
    chord: float  # m
    inertia_diag: tuple[float, float, float]  # kg m^2 (Ixx, Iyy, Izz)
    aero_coefficients: dict[str, float]
    max_thrust: float  # N

    def __post_init__(self):
        if self.mass <= 0 or self.wing_area <= 0 or self.max_thrust <= 0:
            raise ModelDomainError("mass, wing_area and max_thrust must be strictly positive")
        if any(i <= 0 for i in self.inertia_diag):
            raise ModelDomainError("inertia diagonal must be strictly positive")
        missing = [n for n in COEFFICIENT_NAMES if n not in self.aero_coefficients]
        if missing:
            raise ModelDomainError(f"missing aero coefficients: {missing}")
        if self.aero_coefficients["CD0"] < 0:
            raise ModelDomainError("CD0 must be >= 0")
        if self.aero_coefficients["CLa"] <= 0:
            raise ModelDomainError("CLa must be > 0")


@dataclass(frozen=True)
class StateDerivative:
    """Time-derivative of AircraftState (sim_time excluded), per-second units."""

    position_ned: tuple[float, float, float]
    attitude: tuple[float, float, float]
    body_velocity: tuple[float, float, float]
    body_rates: tuple[float, float, float]

    def components(self) -> tuple[float, ...]:
        return (*self.position_ned, *self.attitude, *self.body_velocity, *self.body_rates)

    def max_abs(self) -> float:
        return max(abs(c) for c in self.components())


def wrap_pi(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.remainder(angle, math.tau)
    if a <= -math.pi:
        a = math.pi
    return a


def normalize_attitude(roll: float, pitch: float, yaw: float) -> tuple[float, float, float]:
    """Bring Euler angles into roll/yaw in (-pi, pi], pitch in [-pi/2, pi/2].

    Pitch outside +-pi/2 means the aircraft went "over the top": the pitch is
    reflected and roll/yaw flip by pi, which represents the same physical
    orientation.
    """
    pitch = wrap_pi(pitch)
    if pitch > math.pi / 2:
        pitch = math.pi - pitch
        roll = roll + math.pi
        yaw = yaw + math.pi
    elif pitch < -math.pi / 2:
        pitch = -math.pi - pitch
        roll = roll + math.pi
        yaw = yaw + math.pi
    return (wrap_pi(roll), pitch, wrap_pi(yaw))


def derivatives(state: AircraftState, controls: ControlInputs, params: AircraftParams) -> StateDerivative:
    """Rigid-body state derivatives under the linear aero-coefficient model.

    Raises ModelDomainError on non-finite input and StallFloorError when the
    airspeed is below the model validity floor.
    """
    if not state.is_finite():
        raise ModelDomainError("non-finite aircraft state")
    u, v, w = state.body_velocity
    vt = math.sqrt(u * u + v * v + w * w)
    if vt <= AIRSPEED_VALIDITY_FLOOR:
        raise StallFloorError(
            f"airspeed {vt:.3f} m/s below validity floor {AIRSPEED_VALIDITY_FLOOR} m/s"
        )

    roll, pitch, yaw = state.attitude
    p, q, r = state.body_rates
    c = params.aero_coefficients
    m = params.mass
    s_area = params.wing_area
    b = params.wing_span
    cbar = params.chord
    ixx, iyy, izz = params.inertia_diag

    alpha = math.atan2(w, u)
    beta = math.asin(v / vt)
    qbar = 0.5 * AIR_DENSITY * vt * vt
    qs = qbar * s_area

    # Non-dimensional rate terms.
    phat = p * b / (2.0 * vt)
    qhat = q * cbar / (2.0 * vt)
    rhat = r * b / (2.0 * vt)

    cl_lift = c["CL0"] + c["CLa"] * alpha
    cd = c["CD0"] + c["k"] * cl_lift * cl_lift
    cy = c["CYb"] * beta

    lift = qs * cl_lift
    drag = qs * cd
    side = qs * cy

    sa, ca = math.sin(alpha), math.cos(alpha)
    thrust = controls.throttle * params.max_thrust

    # Stability-axis lift/drag rotated into the body frame.
    fx = lift * sa - drag * ca + thrust
    fy = side
    fz = -lift * ca - drag * sa

    sphi, cphi = math.sin(roll), math.cos(roll)
    sth, cth = math.sin(pitch), math.cos(pitch)
    spsi, cpsi = math.sin(yaw), math.cos(yaw)

    # Body-frame accelerations (gravity resolved through the attitude).
    u_dot = r * v - q * w - GRAVITY * sth + fx / m
    v_dot = p * w - r * u + GRAVITY * cth * sphi + fy / m
    w_dot = q * u - p * v + GRAVITY * cth * cphi + fz / m

    # Moments about body axes.
    l_mom = qs * b * (c["Clb"] * beta + c["Clp"] * phat + c["Clda"] * controls.aileron)
    m_mom = qs * cbar * (c["Cm0"] + c["Cma"] * alpha + c["Cmq"] * qhat + c["Cmde"] * controls.elevator)
    n_mom = qs * b * (c["Cnb"] * beta + c["Cnr"] * rhat + c["Cndr"] * controls.rudder)

    p_dot = (l_mom + (iyy - izz) * q * r) / ixx
    q_dot = (m_mom + (izz - ixx) * p * r) / iyy
    r_dot = (n_mom + (ixx - iyy) * p * q) / izz

    # Euler kinematics.
    tth = sth / cth
    roll_dot = p + tth * (q * sphi + r * cphi)
    pitch_dot = q * cphi - r * sphi
    yaw_dot = (q * sphi + r * cphi) / cth

    # Body-to-NED rotation of the velocity.
    north_dot = u * cth * cpsi + v * (sphi * sth * cpsi - cphi * spsi) + w * (cphi * sth * cpsi + sphi * spsi)
    east_dot = u * cth * spsi + v * (sphi * sth * spsi + cphi * cpsi) + w * (cphi * sth * spsi - sphi * cpsi)
    down_dot = -u * sth + v * sphi * cth + w * cphi * cth

    return StateDerivative(
        position_ned=(north_dot, east_dot, down_dot),
        attitude=(roll_dot, pitch_dot, yaw_dot),
        body_velocity=(u_dot, v_dot, w_dot),
        body_rates=(p_dot, q_dot, r_dot),
    )


def _axpy(state: AircraftState, deriv: StateDerivative, h: float) -> AircraftState:
    """state + h * deriv, without attitude normalization (RK4 stage point)."""
    return AircraftState(
        position_ned=tuple(x + h * d for x, d in zip(state.position_ned, deriv.position_ned)),
        attitude=tuple(x + h * d for x, d in zip(state.attitude, deriv.attitude)),
        body_velocity=tuple(x + h * d for x, d in zip(state.body_velocity, deriv.body_velocity)),
        body_rates=tuple(x + h * d for x, d in zip(state.body_rates, deriv.body_rates)),
        sim_time=state.sim_time,
    )


def step(state: AircraftState, controls: ControlInputs, params: AircraftParams, dt: float) -> AircraftState:
    """Advance one fixed RK4 step of length dt (0 < dt <= 0.5 s).

    Attitude is re-normalized after the step and sim_time advances by exactly
    dt.  Bit-deterministic for identical inputs.
    """
    if not (0.0 < dt <= DT_MAX):
        raise ModelDomainError(f"dt must be in (0, {DT_MAX}] s, got {dt}")

    k1 = derivatives(state, controls, params)
    k2 = derivatives(_axpy(state, k1, dt / 2.0), controls, params)
    k3 = derivatives(_axpy(state, k2, dt / 2.0), controls, params)
    k4 = derivatives(_axpy(state, k3, dt), controls, params)

    sixth = dt / 6.0
    new_pos = tuple(
        x + sixth * (a + 2.0 * b + 2.0 * c_ + d)
        for x, a, b, c_, d in zip(state.position_ned, k1.position_ned, k2.position_ned,
                                  k3.position_ned, k4.position_ned)
    )
    new_att = tuple(
        x + sixth * (a + 2.0 * b + 2.0 * c_ + d)
        for x, a, b, c_, d in zip(state.attitude, k1.attitude, k2.attitude,
                                  k3.attitude, k4.attitude)
    )
    new_vel = tuple(
        x + sixth * (a + 2.0 * b + 2.0 * c_ + d)
        for x, a, b, c_, d in zip(state.body_velocity, k1.body_velocity, k2.body_velocity,
                                  k3.body_velocity, k4.body_velocity)
    )
    new_rates = tuple(
        x + sixth * (a + 2.0 * b + 2.0 * c_ + d)
        for x, a, b, c_, d in zip(state.body_rates, k1.body_rates, k2.body_rates,
                                  k3.body_rates, k4.body_rates)
    )

    result = AircraftState(
        position_ned=new_pos,
        attitude=normalize_attitude(*new_att),
        body_velocity=new_vel,
        body_rates=new_rates,
        sim_time=state.sim_time + dt,
    )
    if not result.is_finite():
        raise DivergenceError("integration produced non-finite state")
    return result


def trim_residual(state: AircraftState, controls: ControlInputs, params: AircraftParams) -> float:
    """Max-abs derivative over every component that must vanish in steady flight.

    North/east position rates are excluded: a trimmed aircraft moves over the
    ground by definition.  Vertical rate, attitude rates, body accelerations
    and angular accelerations must all be zero.
    """
    d = derivatives(state, controls, params)
    comps = (d.position_ned[2], *d.attitude, *d.body_velocity, *d.body_rates)
    return max(abs(c) for c in comps)


def stall_speed(params: AircraftParams) -> float:
    """Level-flight stall speed estimate from the linear lift curve."""
    c = params.aero_coefficients
    cl_max = c["CL0"] + c["CLa"] * STALL_ALPHA
    return math.sqrt(2.0 * params.mass * GRAVITY / (AIR_DENSITY * params.wing_area * cl_max))


def max_level_speed(params: AircraftParams) -> float:
    """Fastest speed at which level-flight drag can be balanced by max thrust."""
    c = params.aero_coefficients
    weight = params.mass * GRAVITY

    def required_thrust(vt: float) -> float:
        qs = 0.5 * AIR_DENSITY * vt * vt * params.wing_area
        cl = weight / qs
        return qs * (c["CD0"] + c["k"] * cl * cl)

    lo = stall_speed(params)
    hi = lo
    while required_thrust(hi) < params.max_thrust and hi < 2000.0:
        hi *= 2.0
    if hi >= 2000.0:
        return 2000.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if required_thrust(mid) < params.max_thrust:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def feasible_speed_range(params: AircraftParams) -> tuple[float, float]:
    """Documented trim feasibility window: [1.2 * stall, 0.95 * max level]."""
    return (1.2 * stall_speed(params), 0.95 * max_level_speed(params))


@dataclass(frozen=True)
class _RawControls:
    """Unclamped control carrier for solver internals only."""

    aileron: float
    elevator: float
    rudder: float
    throttle: float


def _trim_point_residual(params: AircraftParams, vt: float, altitude: float,
                         alpha: float, elevator: float, throttle: float) -> tuple[float, float, float]:
    """(u_dot, w_dot, q_dot) of the wings-level candidate point.

    Uses raw (unclamped) controls so the Newton Jacobian stays well defined
    when an iterate wanders past a control limit.
    """
    state = AircraftState(
        position_ned=(0.0, 0.0, -altitude),
        attitude=(0.0, alpha, 0.0),  # level flight: pitch equals alpha
        body_velocity=(vt * math.cos(alpha), 0.0, vt * math.sin(alpha)),
        body_rates=(0.0, 0.0, 0.0),
    )
    d = derivatives(state, _RawControls(0.0, elevator, 0.0, throttle), params)
    return (d.body_velocity[0], d.body_velocity[2], d.body_rates[1])


def trim(params: AircraftParams, target_airspeed: float, target_altitude: float,
         yaw: float = 0.0) -> tuple[AircraftState, ControlInputs]:
    """Solve steady wings-level flight at the given airspeed and altitude.

    Damped Newton iteration over (pitch, elevator, throttle); converged when
    every derivative component is below 1e-6 in magnitude.  Raises
    TrimInfeasibleError when the airspeed is outside the preset's feasibility
    window or the iteration fails to converge.
    """
    lo, hi = feasible_speed_range(params)
    if target_airspeed < lo:
        raise TrimInfeasibleError(
            f"airspeed {target_airspeed:.1f} m/s below feasible minimum {lo:.1f} m/s "
            f"(1.2 x stall speed) for {params.model_name}",
            bound="min_airspeed",
        )
    if target_airspeed > hi:
        raise TrimInfeasibleError(
            f"airspeed {target_airspeed:.1f} m/s above feasible maximum {hi:.1f} m/s "
            f"(0.95 x max level speed) for {params.model_name}",
            bound="max_airspeed",
        )

    x = [0.03, 0.0, 0.5]  # alpha(=pitch), elevator, throttle
    tol = 1e-6

    def residual(xv):
        return _trim_point_residual(params, target_airspeed, target_altitude, xv[0], xv[1], xv[2])

    def norm(rv):
        return max(abs(rc) for rc in rv)

    res = residual(x)
    for _ in range(200):
        if norm(res) < tol:
            break
        # Numerical Jacobian, forward differences.
        h = 1e-7
        jac = [[0.0] * 3 for _ in range(3)]
        for j in range(3):
            xp = list(x)
            xp[j] += h
            rp = residual(xp)
            for i in range(3):
                jac[i][j] = (rp[i] - res[i]) / h
        try:
            dx = _solve3(jac, [-rc for rc in res])
        except ZeroDivisionError:
            raise TrimInfeasibleError(
                f"singular trim Jacobian for {params.model_name} at {target_airspeed} m/s",
                bound="jacobian",
            )
        # Damping: backtrack until the residual norm decreases.
        lam = 1.0
        for _bt in range(30):
            xn = [x[i] + lam * dx[i] for i in range(3)]
            rn = residual(xn)
            if norm(rn) < norm(res):
                x, res = xn, rn
                break
            lam *= 0.5
        else:
            break  # no productive direction left; report non-convergence below

    if norm(res) >= tol:
        raise TrimInfeasibleError(
            f"trim did not converge for {params.model_name} at {target_airspeed:.1f} m/s, "
            f"{target_altitude:.0f} m (residual {norm(res):.2e})",
            bound="convergence",
        )

    alpha, elevator, throttle = x
    if not (0.0 <= throttle <= 1.0):
        raise TrimInfeasibleError(
            f"trim for {params.model_name} at {target_airspeed:.1f} m/s needs throttle "
            f"{throttle:.3f} outside [0, 1]",
            bound="throttle_range",
        )
    if not (-1.0 <= elevator <= 1.0):
        raise TrimInfeasibleError(
            f"trim for {params.model_name} at {target_airspeed:.1f} m/s needs elevator "
            f"{elevator:.3f} outside [-1, 1]",
            bound="elevator_range",
        )
    state = AircraftState(
        position_ned=(0.0, 0.0, -target_altitude),
        attitude=normalize_attitude(0.0, alpha, yaw),
        body_velocity=(target_airspeed * math.cos(alpha), 0.0, target_airspeed * math.sin(alpha)),
        body_rates=(0.0, 0.0, 0.0),
    )
    controls = ControlInputs(0.0, elevator, 0.0, throttle)
    return state, controls


def _solve3(a: list[list[float]], b: list[float]) -> list[float]:
    """Solve a 3x3 linear system by Gaussian elimination with partial pivoting."""
    m = [row[:] + [bv] for row, bv in zip(a, b)]
    n = 3
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(m[r][col]))
        if m[piv][col] == 0.0:
            raise ZeroDivisionError("singular matrix")
        m[col], m[piv] = m[piv], m[col]
        for r in range(col + 1, n):
            f = m[r][col] / m[col][col]
            for cc in range(col, n + 1):
                m[r][cc] -= f * m[col][cc]
    x = [0.0] * n
    for r in range(n - 1, -1, -1):
        x[r] = (m[r][n] - sum(m[r][cc] * x[cc] for cc in range(r + 1, n))) / m[r][r]
    return x


def with_yaw(state: AircraftState, yaw: float) -> AircraftState:
    """Return the state re-pointed at the given heading (trim is yaw-invariant)."""
    roll, pitch, _ = state.attitude
    return replace(state, attitude=normalize_attitude(roll, pitch, yaw))
