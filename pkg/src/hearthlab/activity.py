"""Activity files: JSON documents describing a scene, its initial state and goal."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

from .goals import Formula, GoalError, GroundedGoal, formula_from_json, formula_to_json, ground_goal
from .world import ActionModel, Atom, ObjectDef, Primitive, Scene, WorldState, validate_scene

log = logging.getLogger(__name__)

CATALOG_DIR = Path(__file__).parent / "catalog"
SUFFIX = ".act"


class ActivityError(ValueError):
    """Activity file could not be parsed or failed validation."""


@dataclass(frozen=True)
class Activity:
    name: str
    alias: str
    scene: Scene
    initial: WorldState
    goal: Formula
    grounded: GroundedGoal
    action_model: ActionModel
    source_only: bool = False
    order: int = 999
    notes: str = ""
    reference_mean: float | None = None

    @property
    def n_objects(self) -> int:
        return len(self.scene)

    def with_action_model(self, model: ActionModel) -> "Activity":
        return replace(self, action_model=model)

    def to_json(self) -> dict:
        model = ActionModel()
        overrides = {
            p.name.lower(): q
            for p, q, d in zip(Primitive, self.action_model.success_prob, model.success_prob)
            if q != d
        }
        return {
            "name": self.name,
            "alias": self.alias,
            "source_only": self.source_only,
            "order": self.order,
            "objects": [
                {"id": o.id, "category": o.category, "properties": sorted(o.properties)}
                for o in self.scene.objects
            ],
            "initial": [[a.kind, *a.args] for a in sorted(self.initial.atoms)],
            "goal": formula_to_json(self.goal),
            "action_model": overrides,
            "notes": self.notes,
            "reference_mean": self.reference_mean,
        }


def parse_activity(doc: dict, origin: str = "<activity>") -> Activity:
    missing = [k for k in ("name", "objects", "initial", "goal") if k not in doc]
    if missing:
        raise ActivityError(f"{origin}: missing key(s) {missing}")
    try:
        objects = tuple(
            ObjectDef(o["id"], o["category"], frozenset(o.get("properties", ())))
            for o in doc["objects"]
        )
    except (KeyError, TypeError) as e:
        raise ActivityError(f"{origin}: malformed object entry ({e})") from None
    scene = Scene(objects)
    atoms = []
    for entry in doc["initial"]:
        try:
            atoms.append(Atom.of(entry[0], *entry[1:]))
        except (ValueError, IndexError, TypeError) as e:
            raise ActivityError(f"{origin}: initial atom {entry!r}: {e}") from None
    initial = WorldState.of(atoms)
    try:
        goal = formula_from_json(doc["goal"])
        model = ActionModel.from_overrides(doc.get("action_model"))
    except (GoalError, ValueError) as e:
        raise ActivityError(f"{origin}: {e}") from None

    violations = validate_scene(scene, initial)
    if violations:
        raise ActivityError(f"{origin}: invalid scene:\n  " + "\n  ".join(violations))
    try:
        grounded = ground_goal(goal, scene)
    except GoalError as e:
        raise ActivityError(f"{origin}: invalid goal: {e}") from None
    name = doc["name"]
    log.info("%s: %d grounding(s)", name, len(grounded))
    return Activity(
        name=name,
        alias=doc.get("alias", name),
        scene=scene,
        initial=initial,
        goal=goal,
        grounded=grounded,
        action_model=model,
        source_only=bool(doc.get("source_only", False)),
        order=int(doc.get("order", 999)),
        notes=doc.get("notes", ""),
        reference_mean=doc.get("reference_mean"),
    )


def load_activity(path) -> Activity:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ActivityError(f"cannot read {path}: {e.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ActivityError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    return parse_activity(doc, str(path))


def load_catalog(directory=None) -> list[Activity]:
    directory = Path(directory or CATALOG_DIR)
    acts = [load_activity(p) for p in sorted(directory.glob(f"*{SUFFIX}"))]
    if not acts:
        raise ActivityError(f"no {SUFFIX} files in {directory}")
    return sorted(acts, key=lambda a: (a.order, a.alias))


def resolve(ref: str, directory=None) -> Activity:
    """Load an activity from a path, a catalog file stem, or an alias."""
    p = Path(ref)
    if p.exists():
        return load_activity(p)
    directory = Path(directory or CATALOG_DIR)
    for cand in (directory / p.name, directory / f"{ref}{SUFFIX}"):
        if cand.is_file():
            return load_activity(cand)
    if directory.is_dir():
        for a in load_catalog(directory):
            if ref in (a.alias, a.name):
                return a
    raise ActivityError(f"no activity file or catalog entry named {ref!r}")
