"""Episode recording, replay verification, and imitation-learning export.

A trajectory is the ordered (state, action, reward) sequence of one
aircraft's episode.  On disk it is a ``.traj`` file: one JSON object per
line, a header first, then one row per step.  Line-oriented appends mean a
crash mid-episode leaves a valid (shorter) trajectory prefix.

Row semantics: row 0 holds the initial state with a zero action and zero
reward; row t (t >= 1) holds the state reached after t transitions together
with the action that produced it and the reward received for it.  Replay
therefore re-runs ``dynamics.step`` over rows 1..n from row 0's state and
must reproduce every recorded state bit-exactly.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

from .dynamics import AircraftParams, AircraftState, ControlInputs, ZERO_CONTROLS, step
from .errors import RecordingError
from .team import extract_state

TRAJ_SCHEMA_VERSION = 1


def canonical_json(obj) -> str:
    """Canonical serialization: sorted keys, minimal separators, floats as
    shortest round-trip decimals (Python repr)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass(frozen=True)
class TrajectoryHeader:
    preset: str
    team: str
    callsign: str
    task: str
    dt: float
    seed: int
    created: float = field(default_factory=lambda: time.time())
    schema_version: int = TRAJ_SCHEMA_VERSION
    state_extractor: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "preset": self.preset,
            "team": self.team,
            "callsign": self.callsign,
            "task": self.task,
            "dt": self.dt,
            "seed": self.seed,
            "created": self.created,
            "state_extractor": list(self.state_extractor),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryHeader":
        if d.get("schema_version") != TRAJ_SCHEMA_VERSION:
            raise RecordingError(
                f"unknown trajectory schema_version {d.get('schema_version')!r}"
            )
        return cls(
            preset=d["preset"],
            team=d["team"],
            callsign=d["callsign"],
            task=d["task"],
            dt=float(d["dt"]),
            seed=int(d["seed"]),
            created=float(d["created"]),
            state_extractor=tuple(d.get("state_extractor", ())),
        )


@dataclass(frozen=True)
class TrajectoryStep:
    step_index: int
    state: AircraftState
    action: ControlInputs
    reward: float

    def as_dict(self) -> dict:
        return {
            "step_index": self.step_index,
            "state": self.state.as_dict(),
            "action": self.action.as_dict(),
            "reward": self.reward,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryStep":
        return cls(
            step_index=int(d["step_index"]),
            state=AircraftState.from_dict(d["state"]),
            action=ControlInputs.from_dict(d["action"]),
            reward=float(d["reward"]),
        )


@dataclass(frozen=True)
class TrajectoryRecord:
    header: TrajectoryHeader
    steps: tuple[TrajectoryStep, ...]

    def __post_init__(self):
        for i, s in enumerate(self.steps):
            if s.step_index != i:
                raise RecordingError(
                    f"step indices must be contiguous from 0; row {i} carries "
                    f"index {s.step_index}"
                )


class TrajectoryWriter:
    """Append-ordered writer: header first, then in-order step rows.

    Every row is flushed as written so an interrupted episode still leaves a
    readable prefix on disk.
    """

    def __init__(self, path: str | Path, header: TrajectoryHeader):
        self._path = Path(path)
        self._next_index = 0
        try:
            self._fh: IO[str] = open(self._path, "w")
            self._fh.write(canonical_json(header.as_dict()) + "\n")
            self._fh.flush()
        except OSError as exc:
            raise RecordingError(f"cannot write trajectory {self._path}: {exc}") from exc

    def append(self, step_row: TrajectoryStep) -> None:
        if step_row.step_index != self._next_index:
            raise RecordingError(
                f"out-of-order step {step_row.step_index} appended to {self._path} "
                f"(expected {self._next_index})"
            )
        try:
            self._fh.write(canonical_json(step_row.as_dict()) + "\n")
            self._fh.flush()
        except OSError as exc:
            raise RecordingError(
                f"I/O failure writing step {step_row.step_index} to {self._path}: {exc}"
            ) from exc
        self._next_index += 1

    def close(self) -> None:
        self._fh.flush()
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_record(record: TrajectoryRecord, path: str | Path) -> None:
    with TrajectoryWriter(path, record.header) as w:
        for s in record.steps:
            w.append(s)


def read_record(path: str | Path) -> TrajectoryRecord:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise RecordingError(f"cannot read trajectory {path}: {exc}") from exc
    if not lines:
        raise RecordingError(f"trajectory {path} is empty")
    header = TrajectoryHeader.from_dict(json.loads(lines[0]))
    steps = tuple(TrajectoryStep.from_dict(json.loads(line)) for line in lines[1:] if line)
    return TrajectoryRecord(header=header, steps=steps)


@dataclass(frozen=True)
class ReplayReport:
    """Outcome of re-simulating a recorded episode."""

    exact: bool
    steps_checked: int
    max_divergence: float
    first_divergence_step: int | None

    def summary(self) -> str:
        if self.exact:
            return f"divergence 0 over {self.steps_checked} steps"
        return (
            f"divergence {self.max_divergence:.6e} first at step "
            f"{self.first_divergence_step} ({self.steps_checked} steps checked)"
        )


def _state_fields(state: AircraftState) -> tuple[float, ...]:
    return (*state.position_ned, *state.attitude, *state.body_velocity,
            *state.body_rates, state.sim_time)


def replay(record: TrajectoryRecord, params: AircraftParams) -> ReplayReport:
    """Re-run the dynamics over the recorded actions and compare states.

    Passes iff every re-simulated state matches the recording bit-exactly.
    """
    if params.model_name != record.header.preset:
        raise RecordingError(
            f"preset mismatch: record was flown with {record.header.preset!r}, "
            f"given params for {params.model_name!r}"
        )
    if not record.steps:
        return ReplayReport(exact=True, steps_checked=0, max_divergence=0.0,
                            first_divergence_step=None)
    state = record.steps[0].state
    dt = record.header.dt
    max_div = 0.0
    first_div: int | None = None
    for row in record.steps[1:]:
        state = step(state, row.action, params, dt)
        div = max(abs(a - b) for a, b in zip(_state_fields(state), _state_fields(row.state)))
        if div > 0.0 and first_div is None:
            first_div = row.step_index
        max_div = max(max_div, div)
    return ReplayReport(
        exact=max_div == 0.0,
        steps_checked=len(record.steps),
        max_divergence=max_div,
        first_divergence_step=first_div,
    )


def export_pairs(record: TrajectoryRecord) -> list[tuple[list[float], tuple[float, float, float, float]]]:
    """(extracted observation, action) pairs for imitation learning.

    One pair per transition: the observation the agent saw (row t-1's state
    through the task's extractor) and the action it took (row t's action).
    """
    fields = record.header.state_extractor
    if not fields:
        raise RecordingError(
            f"record for task {record.header.task!r} carries no state extractor"
        )
    pairs = []
    for prev, curr in zip(record.steps, record.steps[1:]):
        pairs.append((extract_state(prev.state, fields), curr.action.as_tuple()))
    return pairs


def record_from_episode(header: TrajectoryHeader,
                        rows: Iterable[tuple[int, AircraftState, ControlInputs, float]]) -> TrajectoryRecord:
    steps = tuple(TrajectoryStep(i, s, a, r) for i, s, a, r in rows)
    return TrajectoryRecord(header=header, steps=steps)


def initial_row(state: AircraftState) -> TrajectoryStep:
    """Row 0: the episode's initial state with the zero action."""
    return TrajectoryStep(0, state, ZERO_CONTROLS, 0.0)
