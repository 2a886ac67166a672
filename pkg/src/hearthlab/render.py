"""Template rendering of world states and goal formulas into text."""
from __future__ import annotations

import re

from .goals import And, ForAll, ForAtLeastOne, Formula, Lit, Not, UnboundVariableError, strip_var
from .world import Scene, WorldState


class RenderError(ValueError):
    pass


# fixed predicate order within one object's sentences
KIND_ORDER = (
    "dusty", "dirty", "open", "toggled_on",
    "ontop", "inside", "under", "nextto",
    "inreach", "insameroom", "infov", "holding",
)

PHRASES = {
    "dusty": "dusty",
    "dirty": "dirty",
    "open": "open",
    "toggled_on": "toggled on",
    "inside": "inside",
    "ontop": "on top",
    "under": "under",
    "nextto": "next to",
    "inreach": "in reach of robot",
    "insameroom": "in same room as robot",
    "infov": "in field of view of robot",
}


def _sentence(kind: str, args: tuple) -> str:
    if kind == "holding":
        return f"robot is holding {args[0]}."
    if len(args) == 1:
        return f"{args[0]} is {PHRASES[kind]}."
    return f"{args[0]} is {PHRASES[kind]} {args[1]}."


def render_state(state: WorldState, scene: Scene) -> str:
    rank = {k: i for i, k in enumerate(KIND_ORDER)}
    keyed = []
    for a in state.atoms:
        try:
            idx = tuple(scene.index(x) for x in a.args)
        except KeyError:
            raise RenderError(f"atom {a.kind}{a.args} references an unknown object") from None
        keyed.append(((idx[0], rank[a.kind], idx[1:]), a))
    keyed.sort(key=lambda t: t[0])
    return " ".join(_sentence(a.kind, a.args) for _, a in keyed)


def _constant(obj_id: str) -> str:
    # instance suffix is abbreviated in goals: cup_1 -> cup1
    return re.sub(r"_(\d+)$", r"\1", obj_id)


def _term(t: str, env: dict) -> str:
    name = strip_var(t)
    if name in env:
        return f"the {env[name]}"
    if t.startswith("?"):
        raise UnboundVariableError(f"unbound variable {t!r}")
    return _constant(t)


def _render(node: Formula, env: dict) -> str:
    if isinstance(node, ForAll):
        return f"for every {node.category}, " + _render(node.body, {**env, strip_var(node.var): node.category})
    if isinstance(node, ForAtLeastOne):
        return f"for at least one {node.category}, " + _render(node.body, {**env, strip_var(node.var): node.category})
    if isinstance(node, And):
        return ", and ".join(_render(c, env) for c in node.children)
    if isinstance(node, Not):
        return "the following is NOT true: " + _render(node.child, env)
    terms = [_term(t, env) for t in node.args]
    if node.kind == "holding":
        return f"robot is holding {terms[0]}"
    if len(terms) == 1:
        return f"{terms[0]} is {PHRASES[node.kind]}"
    return f"{terms[0]} is {PHRASES[node.kind]} {terms[1]}"


def render_goal(formula: Formula) -> str:
    """Render a goal; each top-level conjunct becomes its own line."""
    parts = formula.children if isinstance(formula, And) else (formula,)
    try:
        lines = [_render(p, {}) for p in parts]
    except UnboundVariableError as e:
        raise RenderError(str(e)) from None
    return "\n".join(line[0].upper() + line[1:] + "." for line in lines)


def render_activity(initial: WorldState, goal: Formula, scene: Scene) -> str:
    return render_state(initial, scene) + "\n" + render_goal(goal)
