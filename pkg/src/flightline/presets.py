"""Aircraft preset files.

A preset is one JSON document whose keys match the AircraftParams field
names, plus a ``schema_version`` integer and a ``controllers`` section
holding the gain tables keyed by controller kind.  The three shipped presets
(f15, cessna172p, a320) live in the package ``data/`` directory; user presets
can be loaded from any path.

Coefficient values are implementer-chosen from public flight-mechanics
references; nothing in the package depends on the specific numbers, only on
their internal consistency (trim residual, symmetry, settling behavior).
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .dynamics import AircraftParams
from .errors import ModelDomainError

PRESET_SCHEMA_VERSION = 1
PRESET_NAMES = ("f15", "cessna172p", "a320")


def _params_from_doc(doc: dict, source: str) -> AircraftParams:
    version = doc.get("schema_version")
    if version != PRESET_SCHEMA_VERSION:
        raise ModelDomainError(
            f"unsupported preset schema_version {version!r} in {source} "
            f"(expected {PRESET_SCHEMA_VERSION})"
        )
    try:
        return AircraftParams(
            model_name=doc["model_name"],
            mass=float(doc["mass"]),
            wing_area=float(doc["wing_area"]),
            wing_span=float(doc["wing_span"]),
            chord=float(doc["chord"]),
            inertia_diag=tuple(float(x) for x in doc["inertia_diag"]),
            aero_coefficients={k: float(v) for k, v in doc["aero_coefficients"].items()},
            max_thrust=float(doc["max_thrust"]),
        )
    except KeyError as exc:
        raise ModelDomainError(f"preset {source} missing field {exc}") from exc


def _load_doc(name: str) -> dict:
    if name in PRESET_NAMES:
        text = resources.files("flightline").joinpath(f"data/{name}.json").read_text()
        return json.loads(text)
    path = Path(name)
    if path.is_file():
        return json.loads(path.read_text())
    raise ModelDomainError(f"unknown aircraft preset: {name!r} (shipped presets: {PRESET_NAMES})")


def load_params(name: str) -> AircraftParams:
    """Load AircraftParams for a shipped preset name or a preset file path."""
    return _params_from_doc(_load_doc(name), name)


def load_controller_gains(name: str) -> dict:
    """The preset's controller gain tables, keyed by controller kind."""
    doc = _load_doc(name)
    return doc.get("controllers", {})


def cruise_point(name: str) -> tuple[float, float]:
    """(airspeed m/s, altitude m) reference cruise point stored with the preset."""
    doc = _load_doc(name)
    ref = doc.get("cruise", {})
    return (float(ref.get("airspeed", 60.0)), float(ref.get("altitude", 1000.0)))
