"""Physics-based autopilot library.

Six controllers built from PID loops with anti-windup: altitude hold (an
altitude -> pitch -> elevator cascade with airspeed-holding throttle), one
setpoint controller per control surface (roll/aileron, pitch/elevator,
heading/rudder, airspeed/throttle), and level flight.  Each controller is a
pure state-transition function: ``control`` maps (kind, state, dt, memory)
to (ControlInputs, new memory) with no hidden mutation, so runs replay
bit-exactly.

Gains are per (preset, controller) and live in the preset file's
``controllers`` section; the values were tuned until the settling test suite
passed and carry no other meaning.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace

from .dynamics import (
    AircraftParams,
    AircraftState,
    ControlInputs,
    feasible_speed_range,
    stall_speed,
    trim,
    wrap_pi,
)
from .errors import ModelDomainError
from .presets import load_controller_gains
from .team import InitialCondition, TaskSpec

CONTROLLER_KINDS = (
    "altitude_hold",
    "roll_hold",
    "pitch_hold",
    "heading_hold",
    "airspeed_hold",
    "level_flight",
)

#: Documented target envelopes per controller kind.  Static targets are
#: validated against these; dynamic schedules sample inside them.
TARGET_ENVELOPES = {
    "altitude_hold": (300.0, 3000.0),  # m
    "roll_hold": (-math.radians(60.0), math.radians(60.0)),
    "pitch_hold": (-math.radians(15.0), math.radians(15.0)),
    "heading_hold": (-math.pi, math.pi),
    "airspeed_hold": None,  # preset-dependent; checked against the trim window
    "level_flight": None,  # no target
}

#: Dynamic-target tasks re-sample the target this often (simulated seconds).
DYNAMIC_TARGET_PERIOD = 30.0


@dataclass(frozen=True)
class PidState:
    """One PID loop: gains, accumulated integrator, last error, and limits."""

    kp: float
    ki: float = 0.0
    kd: float = 0.0
    integrator: float = 0.0
    prev_error: float = 0.0
    output_limits: tuple[float, float] = (-1.0, 1.0)
    integrator_limits: tuple[float, float] = (-5.0, 5.0)


def pid_step(pid: PidState, error: float, dt: float) -> tuple[float, PidState]:
    """Advance one PID update; returns (command, updated state).

    command = clamp(kp*e + ki*I' + kd*(e - e_prev)/dt) with the integrator
    clamped to its own limits first (anti-windup).
    """
    if not math.isfinite(error):
        raise ModelDomainError(f"non-finite controller error: {error!r}")
    if dt <= 0:
        raise ModelDomainError(f"pid dt must be > 0, got {dt}")
    ilo, ihi = pid.integrator_limits
    integrator = min(ihi, max(ilo, pid.integrator + error * dt))
    raw = pid.kp * error + pid.ki * integrator + pid.kd * (error - pid.prev_error) / dt
    olo, ohi = pid.output_limits
    command = min(ohi, max(olo, raw))
    return command, replace(pid, integrator=integrator, prev_error=error)


def _pid_from_gains(gains: dict, output_limits=(-1.0, 1.0), integrator_limits=(-5.0, 5.0)) -> PidState:
    return PidState(
        kp=float(gains.get("kp", 0.0)),
        ki=float(gains.get("ki", 0.0)),
        kd=float(gains.get("kd", 0.0)),
        output_limits=output_limits,
        integrator_limits=integrator_limits,
    )


@dataclass(frozen=True)
class ControllerKind:
    """Which controller to run, its target, and whether the target is a
    fixed setpoint or a scheduled (dynamic) one."""

    kind: str
    target: float = 0.0
    target_mode: str = "static"

    def __post_init__(self):
        if self.kind not in CONTROLLER_KINDS:
            raise ModelDomainError(f"unknown controller kind {self.kind!r}")
        if self.target_mode not in ("static", "dynamic"):
            raise ModelDomainError(f"target_mode must be static or dynamic, got {self.target_mode!r}")
        env = TARGET_ENVELOPES.get(self.kind)
        if env is not None and self.target_mode == "static":
            lo, hi = env
            if not (lo <= self.target <= hi):
                raise ModelDomainError(
                    f"{self.kind} target {self.target} outside envelope [{lo}, {hi}]"
                )


@dataclass(frozen=True)
class ControllerMemory:
    """Controller loop state between steps, owned by the caller."""

    kind: str
    target: float
    pids: dict[str, PidState]
    gains: dict
    trim_elevator: float
    trim_throttle: float
    trim_airspeed: float
    prev_altitude: float | None = None


def init_controller_memory(kind: ControllerKind, params: AircraftParams,
                           cruise_airspeed: float, cruise_altitude: float = 1000.0) -> ControllerMemory:
    """Build the working memory for a controller: per-kind PID loops seeded
    from the preset's gain table plus the trim feedforward point."""
    gains = load_controller_gains(params.model_name).get(kind.kind)
    if gains is None:
        raise ModelDomainError(
            f"preset {params.model_name!r} has no gain table for {kind.kind!r}"
        )
    _, trim_controls = trim(params, cruise_airspeed, cruise_altitude)

    pids: dict[str, PidState] = {}
    k = kind.kind
    if k == "roll_hold":
        pids["roll"] = _pid_from_gains(gains)
    elif k == "pitch_hold":
        pids["pitch"] = _pid_from_gains(gains)
    elif k == "heading_hold":
        pids["rudder"] = _pid_from_gains(gains.get("rudder", {}))
        pids["roll"] = _pid_from_gains(gains.get("roll", {}))
    elif k == "airspeed_hold":
        pids["speed"] = _pid_from_gains(gains, output_limits=(-1.0, 1.0), integrator_limits=(-20.0, 20.0))
    elif k == "altitude_hold":
        limit = math.radians(float(gains.get("pitch_limit_deg", 12.0)))
        pids["alt"] = _pid_from_gains(gains.get("alt", {}), output_limits=(-limit, limit),
                                      integrator_limits=(-200.0, 200.0))
        pids["pitch"] = _pid_from_gains(gains.get("pitch", {}))
        pids["speed"] = _pid_from_gains(gains.get("speed", {}), integrator_limits=(-20.0, 20.0))
        pids["roll"] = _pid_from_gains(gains.get("roll", {}))
    elif k == "level_flight":
        pids["climb"] = _pid_from_gains(gains.get("climb", {}))
        pids["roll"] = _pid_from_gains(gains.get("roll", {}))
        pids["speed"] = _pid_from_gains(gains.get("speed", {}), integrator_limits=(-20.0, 20.0))

    return ControllerMemory(
        kind=k,
        target=kind.target,
        pids=dict(pids),
        gains=dict(gains) if isinstance(gains, dict) else {},
        trim_elevator=trim_controls.elevator,
        trim_throttle=trim_controls.throttle,
        trim_airspeed=cruise_airspeed,
    )


def retarget(memory: ControllerMemory, target: float) -> ControllerMemory:
    """Memory with a new target (used by dynamic-target schedules)."""
    return replace(memory, target=target)


def control(kind: ControllerKind, state: AircraftState, dt: float,
            memory: ControllerMemory) -> tuple[ControlInputs, ControllerMemory]:
    """Run one controller update; returns the commands and the new memory.

    Controls the kind does not own default to the trim values captured at
    memory initialization.
    """
    k = memory.kind
    pids = dict(memory.pids)
    roll, pitch, yaw = state.attitude
    aileron = 0.0
    elevator = memory.trim_elevator
    rudder = 0.0
    throttle = memory.trim_throttle
    prev_altitude = memory.prev_altitude

    if k == "roll_hold":
        aileron, pids["roll"] = pid_step(pids["roll"], memory.target - roll, dt)

    elif k == "pitch_hold":
        cmd, pids["pitch"] = pid_step(pids["pitch"], memory.target - pitch, dt)
        elevator = memory.trim_elevator + cmd

    elif k == "heading_hold":
        err = wrap_pi(memory.target - yaw)
        rudder, pids["rudder"] = pid_step(pids["rudder"], err, dt)
        bank_limit = math.radians(float(memory.gains.get("bank_limit_deg", 20.0)))
        bank_gain = float(memory.gains.get("bank_gain", 0.5))
        bank_target = min(bank_limit, max(-bank_limit, bank_gain * err))
        aileron, pids["roll"] = pid_step(pids["roll"], bank_target - roll, dt)

    elif k == "airspeed_hold":
        cmd, pids["speed"] = pid_step(pids["speed"], memory.target - state.airspeed, dt)
        throttle = memory.trim_throttle + cmd

    elif k == "altitude_hold":
        pitch_target, pids["alt"] = pid_step(pids["alt"], memory.target - state.altitude, dt)
        cmd, pids["pitch"] = pid_step(pids["pitch"], pitch_target - pitch, dt)
        elevator = memory.trim_elevator + cmd
        thr_cmd, pids["speed"] = pid_step(pids["speed"], memory.trim_airspeed - state.airspeed, dt)
        throttle = memory.trim_throttle + thr_cmd
        aileron, pids["roll"] = pid_step(pids["roll"], 0.0 - roll, dt)

    elif k == "level_flight":
        climb_rate = 0.0 if prev_altitude is None else (state.altitude - prev_altitude) / dt
        cmd, pids["climb"] = pid_step(pids["climb"], 0.0 - climb_rate, dt)
        q_gain = float(memory.gains.get("q_gain", 0.0))
        elevator = memory.trim_elevator + cmd + q_gain * state.body_rates[1]
        aileron, pids["roll"] = pid_step(pids["roll"], 0.0 - roll, dt)
        thr_cmd, pids["speed"] = pid_step(pids["speed"], memory.trim_airspeed - state.airspeed, dt)
        throttle = memory.trim_throttle + thr_cmd
        prev_altitude = state.altitude

    controls = ControlInputs(aileron=aileron, elevator=elevator, rudder=rudder, throttle=throttle)
    new_memory = replace(memory, pids=pids, prev_altitude=prev_altitude)
    return controls, new_memory


# --- Controller tasks --------------------------------------------------------

#: Reward length scales: reward = exp(-|error| / scale), 1.0 exactly on
#: target, smooth and bounded in (0, 1].
REWARD_SCALES = {
    "altitude_hold": 100.0,  # m
    "roll_hold": math.radians(10.0),
    "pitch_hold": math.radians(10.0),
    "heading_hold": math.radians(10.0),
    "airspeed_hold": 5.0,  # m/s
}

#: Terminal conditions for controller tasks: attitude envelope exit.
TERMINAL_MAX_ROLL = math.radians(80.0)
TERMINAL_MAX_PITCH = math.radians(70.0)


def _error_of(kind: str, state: AircraftState, target: float) -> float:
    if kind == "altitude_hold":
        return state.altitude - target
    if kind == "roll_hold":
        return state.attitude[0] - target
    if kind == "pitch_hold":
        return state.attitude[1] - target
    if kind == "heading_hold":
        return wrap_pi(state.attitude[2] - target)
    if kind == "airspeed_hold":
        return state.airspeed - target
    raise ModelDomainError(f"no target error defined for {kind!r}")


def dynamic_target_schedule(kind: str, seed: int, envelope: tuple[float, float]) -> "list[float]":
    """Piecewise-constant target values, one per DYNAMIC_TARGET_PERIOD window,
    enough to cover any episode up to 30 minutes."""
    rng = random.Random(f"{seed}:{kind}:targets")
    count = int(1800.0 / DYNAMIC_TARGET_PERIOD)
    return [rng.uniform(envelope[0], envelope[1]) for _ in range(count)]


def make_task(kind: ControllerKind, params: AircraftParams | None = None,
              airspeed: float | tuple[float, float] = 55.0,
              altitude: float | tuple[float, float] = 1000.0,
              yaw: float | tuple[float, float] = 0.0,
              seed: int = 0) -> TaskSpec:
    """Build the TaskSpec matching a controller kind.

    Static mode rewards closeness to the fixed target; dynamic mode samples a
    new target every 30 simulated seconds from the kind's envelope using the
    episode seed (the environment re-binds the task with its seed at reset).
    Terminal when the aircraft stalls or leaves the attitude envelope.
    """
    k = kind.kind
    floor = stall_speed(params) if params is not None else 0.0

    def terminal(state: AircraftState, sim_time: float) -> bool:
        if state.airspeed < floor:
            return True
        roll, pitch, _ = state.attitude
        return abs(roll) > TERMINAL_MAX_ROLL or abs(pitch) > TERMINAL_MAX_PITCH

    initial = InitialCondition(airspeed=airspeed, altitude=altitude, yaw=yaw)
    task_params = {
        "target": kind.target,
        "target_mode": kind.target_mode,
        "airspeed": list(airspeed) if isinstance(airspeed, tuple) else airspeed,
        "altitude": list(altitude) if isinstance(altitude, tuple) else altitude,
        "yaw": list(yaw) if isinstance(yaw, tuple) else yaw,
    }

    if k == "level_flight":
        # Reward closeness to zero roll and zero climb, via pitch-rate proxy.
        def reward(ps, cs, pa, ca, ts):
            climb = (cs.altitude - ps.altitude) / max(cs.sim_time - ps.sim_time, 1e-9)
            return math.exp(-abs(climb) / 2.0) * math.exp(-abs(cs.attitude[0]) / math.radians(10.0))

        return TaskSpec(
            name="level_flight",
            reward_function=reward,
            terminal_predicate=terminal,
            initial_condition=initial,
            params=task_params,
        )

    scale = REWARD_SCALES[k]

    if kind.target_mode == "static":
        target = kind.target

        def target_signal(sim_time: float) -> float:
            return target

        def reward(ps, cs, pa, ca, ts):
            return math.exp(-abs(_error_of(k, cs, target)) / scale)

        return TaskSpec(
            name=f"{k}_static",
            reward_function=reward,
            terminal_predicate=terminal,
            initial_condition=initial,
            target_signal=target_signal,
            params=task_params,
        )

    # Dynamic mode: schedule from the episode seed.
    envelope = TARGET_ENVELOPES[k]
    if envelope is None:
        if params is None:
            raise ModelDomainError("dynamic airspeed targets need aircraft params")
        lo_v, hi_v = feasible_speed_range(params)
        margin = 0.1 * (hi_v - lo_v)
        envelope = (lo_v + margin, hi_v - margin)
    schedule = dynamic_target_schedule(k, seed, envelope)

    def target_signal(sim_time: float) -> float:
        idx = min(int(sim_time / DYNAMIC_TARGET_PERIOD), len(schedule) - 1)
        return schedule[idx]

    def reward(ps, cs, pa, ca, ts):
        return math.exp(-abs(_error_of(k, cs, target_signal(cs.sim_time))) / scale)

    def seeded(new_seed: int) -> TaskSpec:
        return make_task(kind, params=params, airspeed=airspeed, altitude=altitude,
                         yaw=yaw, seed=new_seed)

    return TaskSpec(
        name=f"{k}_dynamic",
        reward_function=reward,
        terminal_predicate=terminal,
        initial_condition=initial,
        target_signal=target_signal,
        params=task_params,
        seeded=seeded,
    )
