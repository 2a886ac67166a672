"""Symbolic household world: objects, ground atoms and the seven action primitives."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

UNARY_KINDS = ("dusty", "dirty", "open", "toggled_on", "inreach", "insameroom", "infov", "holding")
BINARY_KINDS = ("inside", "ontop", "under", "nextto")
ATOM_KINDS = UNARY_KINDS + BINARY_KINDS

PROPERTIES = frozenset(
    {"graspable", "openable", "toggleable", "container", "surface", "cleaning_tool", "always_open"}
)


class MalformedActionError(ValueError):
    pass


class Primitive(enum.IntEnum):
    GRASP = 0
    TOGGLE_ON = 1
    TOGGLE_OFF = 2
    OPEN = 3
    CLOSE = 4
    PLACE_INSIDE = 5
    PLACE_ON_TOP = 6


N_PRIMITIVES = len(Primitive)


class Atom(NamedTuple):
    kind: str
    args: tuple

    @classmethod
    def of(cls, kind: str, *args: str) -> "Atom":
        if kind not in ATOM_KINDS:
            raise ValueError(f"unknown predicate kind {kind!r}")
        arity = 1 if kind in UNARY_KINDS else 2
        if len(args) != arity:
            raise ValueError(f"{kind} takes {arity} argument(s), got {len(args)}")
        return cls(kind, tuple(args))


@dataclass(frozen=True)
class ObjectDef:
    id: str
    category: str
    properties: frozenset = frozenset()

    def has(self, prop: str) -> bool:
        return prop in self.properties


@dataclass(frozen=True)
class Scene:
    objects: tuple

    def __post_init__(self):
        object.__setattr__(self, "_index", {o.id: i for i, o in enumerate(self.objects)})

    @property
    def ids(self) -> list[str]:
        return [o.id for o in self.objects]

    def __len__(self):
        return len(self.objects)

    def index(self, obj_id: str) -> int:
        return self._index[obj_id]

    def get(self, obj_id: str) -> ObjectDef | None:
        i = self._index.get(obj_id)
        return None if i is None else self.objects[i]

    def members(self, category: str) -> list[str]:
        return [o.id for o in self.objects if o.category == category]


@dataclass(frozen=True)
class WorldState:
    atoms: frozenset = field(default_factory=frozenset)

    @classmethod
    def of(cls, atoms: Iterable[Atom]) -> "WorldState":
        return cls(frozenset(atoms))

    def __contains__(self, atom) -> bool:
        return atom in self.atoms

    def held(self) -> str | None:
        for a in self.atoms:
            if a.kind == "holding":
                return a.args[0]
        return None


@dataclass(frozen=True)
class Action:
    primitive: Primitive
    object_index: int

    def __str__(self):
        return f"{self.primitive.name}({self.object_index})"


@dataclass(frozen=True)
class ActionModel:
    """Per-primitive success probability of an executable action."""

    success_prob: tuple = (0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.success_prob) != N_PRIMITIVES:
            raise ValueError("need one success probability per primitive")
        for p in self.success_prob:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"success probability {p} outside [0, 1]")

    @classmethod
    def from_overrides(cls, overrides: dict | None) -> "ActionModel":
        probs = list(cls().success_prob)
        for name, p in (overrides or {}).items():
            try:
                probs[Primitive[name.upper()]] = float(p)
            except KeyError:
                raise ValueError(f"unknown primitive {name!r} in action model") from None
        return cls(tuple(probs))

    def prob(self, primitive: Primitive) -> float:
        return self.success_prob[primitive]


def _target(scene: Scene, action: Action) -> ObjectDef:
    if not 0 <= int(action.primitive) < N_PRIMITIVES:
        raise MalformedActionError(f"primitive index {action.primitive} not in [0, {N_PRIMITIVES})")
    if not 0 <= action.object_index < len(scene):
        raise MalformedActionError(f"object index {action.object_index} not in [0, {len(scene)})")
    return scene.objects[action.object_index]


def _is_open(state: WorldState, obj: ObjectDef) -> bool:
    return obj.has("always_open") or Atom("open", (obj.id,)) in state


def executable(state: WorldState, scene: Scene, action: Action) -> bool:
    obj = _target(scene, action)
    prim = Primitive(action.primitive)
    if Atom("inreach", (obj.id,)) not in state:
        return False
    held = state.held()
    if prim == Primitive.GRASP:
        return obj.has("graspable") and held is None
    if prim in (Primitive.OPEN, Primitive.CLOSE):
        if not obj.has("openable"):
            return False
        is_open = Atom("open", (obj.id,)) in state
        return not is_open if prim == Primitive.OPEN else is_open
    if prim in (Primitive.TOGGLE_ON, Primitive.TOGGLE_OFF):
        if not obj.has("toggleable"):
            return False
        on = Atom("toggled_on", (obj.id,)) in state
        return not on if prim == Primitive.TOGGLE_ON else on
    if held is None or held == obj.id:
        return False
    if prim == Primitive.PLACE_INSIDE:
        return obj.has("container") and _is_open(state, obj)
    return obj.has("surface") or obj.has("container")


def _effects(state: WorldState, scene: Scene, prim: Primitive, target: str) -> frozenset:
    atoms = set(state.atoms)
    if prim == Primitive.GRASP:
        atoms = {
            a for a in atoms
            if not (a.kind in ("inside", "ontop", "nextto") and a.args[0] == target)
            and not (a.kind in ("under", "nextto") and a.args[1] == target)
        }
        atoms.add(Atom("holding", (target,)))
    elif prim in (Primitive.OPEN, Primitive.CLOSE):
        atoms.symmetric_difference_update({Atom("open", (target,))})
    elif prim in (Primitive.TOGGLE_ON, Primitive.TOGGLE_OFF):
        atoms.symmetric_difference_update({Atom("toggled_on", (target,))})
    else:
        held = state.held()
        already_inside = [a.args[0] for a in state.atoms if a.kind == "inside" and a.args[1] == target]
        atoms.discard(Atom("holding", (held,)))
        if prim == Primitive.PLACE_INSIDE:
            atoms.add(Atom("inside", (held, target)))
            atoms.update(Atom("nextto", (held, x)) for x in already_inside)
        else:
            atoms.add(Atom("ontop", (held, target)))
            atoms.add(Atom("under", (target, held)))
        if scene.get(held).has("cleaning_tool"):
            atoms.discard(Atom("dusty", (target,)))
            atoms.discard(Atom("dirty", (target,)))
    return frozenset(atoms)


def apply_action(state: WorldState, scene: Scene, action: Action, model: ActionModel, rng) -> tuple[WorldState, bool]:
    """Execute ``action``; returns the next state and whether it was executable.

    Executable actions succeed with the primitive's probability; a failed draw
    leaves the state unchanged but still counts as executed. ``rng`` is only
    consumed when the success probability is strictly below one.
    """
    if not executable(state, scene, action):
        return state, False
    prim = Primitive(action.primitive)
    p = model.prob(prim)
    if p < 1.0 and not rng.random() < p:
        return state, True
    target = scene.objects[action.object_index].id
    return WorldState(_effects(state, scene, prim, target)), True


def validate_scene(scene: Scene, initial: WorldState) -> list[str]:
    violations = []
    seen = set()
    for o in scene.objects:
        if o.id in seen:
            violations.append(f"duplicate object id {o.id!r}")
        seen.add(o.id)
        if not o.category:
            violations.append(f"object {o.id!r} has an empty category")
        unknown = set(o.properties) - PROPERTIES
        if unknown:
            violations.append(f"object {o.id!r} has unknown properties {sorted(unknown)}")
        if o.has("container") and not (o.has("openable") or o.has("always_open")):
            violations.append(f"container {o.id!r} is neither openable nor always_open")

    holding = sorted(a.args[0] for a in initial.atoms if a.kind == "holding")
    if len(holding) > 1:
        violations.append(f"one-gripper rule broken: robot holds {holding}")
    for a in sorted(initial.atoms):
        if a.kind not in ATOM_KINDS:
            violations.append(f"atom {a} has unknown kind")
            continue
        arity = 1 if a.kind in UNARY_KINDS else 2
        if len(a.args) != arity:
            violations.append(f"atom {a} has arity {len(a.args)}, expected {arity}")
            continue
        missing = [x for x in a.args if scene.get(x) is None]
        if missing:
            violations.append(f"atom {a} references unknown object(s) {missing}")
            continue
        if a.kind == "inside" and not scene.get(a.args[1]).has("container"):
            violations.append(f"atom {a}: {a.args[1]!r} is not a container")
        if a.kind == "ontop":
            s = scene.get(a.args[1])
            if not (s.has("surface") or s.has("container")):
                violations.append(f"atom {a}: {a.args[1]!r} is neither surface nor container")
        if a.kind in ("inside", "ontop") and a.args[0] in holding:
            violations.append(f"atom {a}: {a.args[0]!r} is held and placed at once")
    return violations
