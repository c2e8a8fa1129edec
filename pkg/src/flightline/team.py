"""Team, roster, and task configuration.

A team is a named group of aircraft, each paired with a task that defines
what the agent observes, how it is rewarded, and when its episode ends.
Validation is two-phase: everything checkable from a single team happens at
construction (:func:`validate_team`); references to aircraft on other teams
are resolved by the environment at reset, once the full simulation roster is
known.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .dynamics import AircraftState, ControlInputs
from .errors import TaskDefinitionError, TeamValidationError

DEFAULT_EPISODE_TIME = 90.0

#: Names an agent may extract from an aircraft state, in canonical order.
#: The first twelve are the raw state variables; airspeed and altitude are
#: derived scalars.
EXTRACTABLE_FIELDS = (
    "north", "east", "down",
    "roll", "pitch", "yaw",
    "u", "v", "w",
    "p", "q", "r",
    "sim_time", "airspeed", "altitude",
)

FULL_STATE_EXTRACTOR = EXTRACTABLE_FIELDS


def extract_state(state: AircraftState, fields: Sequence[str]) -> list[float]:
    """Project an AircraftState onto the named fields, in the given order."""
    values = {
        "north": state.position_ned[0],
        "east": state.position_ned[1],
        "down": state.position_ned[2],
        "roll": state.attitude[0],
        "pitch": state.attitude[1],
        "yaw": state.attitude[2],
        "u": state.body_velocity[0],
        "v": state.body_velocity[1],
        "w": state.body_velocity[2],
        "p": state.body_rates[0],
        "q": state.body_rates[1],
        "r": state.body_rates[2],
        "sim_time": state.sim_time,
        "airspeed": state.airspeed,
        "altitude": state.altitude,
    }
    return [values[f] for f in fields]


@dataclass(frozen=True)
class AircraftId:
    """An aircraft is identified by its preset model and a callsign that is
    unique within its team."""

    model_name: str
    callsign: str


def f15(callsign: str) -> AircraftId:
    return AircraftId("f15", callsign)


def cessna172p(callsign: str) -> AircraftId:
    return AircraftId("cessna172p", callsign)


def a320(callsign: str) -> AircraftId:
    return AircraftId("a320", callsign)


@dataclass(frozen=True)
class InitialCondition:
    """Trim-solver inputs for one aircraft at episode start.

    Each component is either a fixed value or a (low, high) uniform sampling
    interval, drawn with the per-episode seed.
    """

    airspeed: float | tuple[float, float] = 55.0
    altitude: float | tuple[float, float] = 1000.0
    yaw: float | tuple[float, float] = 0.0

    def sample(self, rng: random.Random) -> tuple[float, float, float]:
        def pick(v):
            if isinstance(v, tuple):
                return rng.uniform(v[0], v[1])
            return float(v)

        return (pick(self.airspeed), pick(self.altitude), pick(self.yaw))


RewardFn = Callable[
    [AircraftState, AircraftState, ControlInputs, ControlInputs, Sequence[Sequence[float]]],
    float,
]
TerminalFn = Callable[[AircraftState, float], bool]


@dataclass(frozen=True)
class TaskSpec:
    """Per-aircraft bundle: observation projection, reward, stopping rule,
    and initial conditions.

    ``reward_function(prev_state, curr_state, prev_action, curr_action,
    target_states)`` must be pure; ``target_states`` receives the restricted
    6-vector poses of the aircraft declared in ``reward_function_targets``,
    in declaration order.

    ``target_signal``, when present, maps sim_time to the task's current
    target value; the CLI uses it to drive controllers and the plot command
    renders it as the target column.

    ``seeded``, when present, rebuilds the task for a specific episode seed
    (dynamic-target tasks re-sample their schedule from it).
    """

    name: str
    state_extractor: tuple[str, ...] = FULL_STATE_EXTRACTOR
    reward_function: RewardFn = lambda ps, cs, pa, ca, ts: 0.0
    terminal_predicate: TerminalFn = lambda s, t: False
    initial_condition: InitialCondition = field(default_factory=InitialCondition)
    target_signal: Callable[[float], float] | None = None
    params: dict = field(default_factory=dict)
    seeded: Callable[[int], "TaskSpec"] | None = None
    manual: bool = False

    def __post_init__(self):
        if not self.state_extractor:
            raise TeamValidationError("state_extractor must be non-empty", "empty_state_extractor")
        unknown = [f for f in self.state_extractor if f not in EXTRACTABLE_FIELDS]
        if unknown:
            raise TeamValidationError(
                f"state_extractor references undefined fields: {unknown}",
                "unknown_state_field",
            )

    def for_seed(self, seed: int) -> "TaskSpec":
        """The task instance to use for an episode with the given seed."""
        if self.seeded is None:
            return self
        return self.seeded(seed)


def dummy_task(airspeed: float = 55.0, altitude: float = 1000.0, yaw: float = 0.0) -> TaskSpec:
    """Placeholder task: full-state extractor, zero reward, never terminal,
    fixed cruise-trim initial condition."""
    return TaskSpec(
        name="dummy",
        state_extractor=FULL_STATE_EXTRACTOR,
        reward_function=lambda ps, cs, pa, ca, ts: 0.0,
        terminal_predicate=lambda s, t: False,
        initial_condition=InitialCondition(airspeed=airspeed, altitude=altitude, yaw=yaw),
        params={"airspeed": airspeed, "altitude": altitude, "yaw": yaw},
    )


@dataclass(frozen=True)
class TeamConfig:
    """A named team: ordered roster of (aircraft, task) pairs, the
    reward-target graph, and the episode length in seconds."""

    name: str
    roster: tuple[tuple[AircraftId, TaskSpec], ...]
    reward_function_targets: dict[AircraftId, tuple[AircraftId, ...]]
    episode_time: float = DEFAULT_EPISODE_TIME

    def __init__(self, name, roster, reward_function_targets, episode_time=DEFAULT_EPISODE_TIME):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "roster", tuple((a, t) for a, t in roster))
        object.__setattr__(
            self,
            "reward_function_targets",
            {k: tuple(v) for k, v in reward_function_targets.items()},
        )
        object.__setattr__(self, "episode_time", float(episode_time))

    def aircraft_ids(self) -> list[AircraftId]:
        return [aid for aid, _ in self.roster]

    def callsigns(self) -> list[str]:
        return [aid.callsign for aid, _ in self.roster]


def validate_team(config: TeamConfig) -> TeamConfig:
    """Check every intra-team invariant; return the config or raise
    TeamValidationError naming the first violation found."""
    if not config.name:
        raise TeamValidationError("team name must be non-empty", "empty_team_name")
    if not config.roster:
        raise TeamValidationError(f"team {config.name!r}: roster must be non-empty", "empty_roster")

    seen: set[str] = set()
    for aid, task in config.roster:
        if not aid.callsign:
            raise TeamValidationError(
                f"team {config.name!r}: empty callsign", "empty_callsign"
            )
        if aid.callsign in seen:
            raise TeamValidationError(
                f"team {config.name!r}: duplicate callsign {aid.callsign!r}",
                "duplicate_callsign",
            )
        seen.add(aid.callsign)
        if not isinstance(task, TaskSpec):
            raise TeamValidationError(
                f"team {config.name!r}: aircraft {aid.callsign!r} has no TaskSpec",
                "missing_task",
            )

    roster_ids = set(config.aircraft_ids())
    target_keys = set(config.reward_function_targets.keys())
    for aid in config.aircraft_ids():
        if aid not in target_keys:
            raise TeamValidationError(
                f"team {config.name!r}: aircraft {aid.callsign!r} missing from "
                f"reward_function_targets",
                "missing_reward_target_key",
            )
    for key in config.reward_function_targets:
        if key not in roster_ids:
            raise TeamValidationError(
                f"team {config.name!r}: reward_function_targets key {key.callsign!r} "
                f"is not on the roster",
                "unknown_reward_target_key",
            )
    for key, targets in config.reward_function_targets.items():
        for tgt in targets:
            if tgt == key:
                raise TeamValidationError(
                    f"team {config.name!r}: aircraft {key.callsign!r} targets itself "
                    f"(own state is always passed to the reward implicitly)",
                    "self_referential_target",
                )

    if not (config.episode_time > 0):
        raise TeamValidationError(
            f"team {config.name!r}: episode_time must be > 0, got {config.episode_time}",
            "non_positive_episode_time",
        )
    return config


def episode_step_budget(config: TeamConfig, dt: float) -> int:
    """Number of steps in this team's episode: ceil(episode_time / dt).

    A small epsilon guards against float noise turning exact divisions into
    an extra step.
    """
    if dt <= 0:
        raise TeamValidationError(f"dt must be > 0, got {dt}", "non_positive_dt")
    return math.ceil(config.episode_time / dt - 1e-9)


def compute_reward(
    task: TaskSpec,
    prev_state: AircraftState,
    curr_state: AircraftState,
    prev_action: ControlInputs,
    curr_action: ControlInputs,
    target_states: Sequence[Sequence[float]],
) -> float:
    """Evaluate the task's reward and fail fast on non-finite output."""
    value = task.reward_function(prev_state, curr_state, prev_action, curr_action, target_states)
    if not math.isfinite(value):
        raise TaskDefinitionError(
            f"task {task.name!r} produced non-finite reward {value!r}"
        )
    return float(value)


# --- Team files -------------------------------------------------------------
#
# A team serializes to one declarative JSON document: name, roster entries
# (model_name, callsign, task name + task parameters), the targets map, and
# episode_time.  Building TaskSpecs back from names requires the task
# registry, which lives in flightline.tasks to keep this module free of
# controller imports.


def team_to_doc(config: TeamConfig) -> dict:
    return {
        "name": config.name,
        "episode_time": config.episode_time,
        "roster": [
            {
                "model_name": aid.model_name,
                "callsign": aid.callsign,
                "task": {"name": task.name, "params": dict(task.params), "manual": task.manual},
            }
            for aid, task in config.roster
        ],
        "reward_function_targets": {
            key.callsign: [[t.model_name, t.callsign] for t in targets]
            for key, targets in config.reward_function_targets.items()
        },
    }


def save_team_file(config: TeamConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(team_to_doc(config), indent=2, sort_keys=True) + "\n")


def doc_to_team(doc: dict, task_builder: Callable[[str, dict, bool], TaskSpec]) -> TeamConfig:
    """Rebuild a TeamConfig from its document form.

    ``task_builder(name, params, manual)`` turns a task reference into a
    TaskSpec; the CLI passes the registry-backed builder from
    flightline.tasks.
    """
    try:
        roster = []
        by_callsign: dict[str, AircraftId] = {}
        for entry in doc["roster"]:
            aid = AircraftId(entry["model_name"], entry["callsign"])
            task_doc = entry.get("task", {"name": "dummy", "params": {}})
            task = task_builder(
                task_doc.get("name", "dummy"),
                task_doc.get("params", {}),
                bool(task_doc.get("manual", False)),
            )
            roster.append((aid, task))
            by_callsign[aid.callsign] = aid
        targets = {}
        for callsign, tlist in doc.get("reward_function_targets", {}).items():
            key = by_callsign.get(callsign)
            if key is None:
                raise TeamValidationError(
                    f"reward_function_targets key {callsign!r} is not on the roster",
                    "unknown_reward_target_key",
                )
            targets[key] = tuple(AircraftId(m, c) for m, c in tlist)
        return TeamConfig(
            name=doc["name"],
            roster=roster,
            reward_function_targets=targets,
            episode_time=doc.get("episode_time", DEFAULT_EPISODE_TIME),
        )
    except KeyError as exc:
        raise TeamValidationError(f"team file missing field {exc}", "missing_field") from exc


def load_team_file(path: str | Path, task_builder: Callable[[str, dict, bool], TaskSpec]) -> TeamConfig:
    doc = json.loads(Path(path).read_text())
    return validate_team(doc_to_team(doc, task_builder))
