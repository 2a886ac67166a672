"""Quantified goal formulas, their groundings into subgoal literal sets, and progress."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Union

from .world import ATOM_KINDS, Atom, Scene, UNARY_KINDS, WorldState


class GoalError(ValueError):
    pass


class UngroundableGoalError(GoalError):
    pass


class UnboundVariableError(GoalError):
    pass


@dataclass(frozen=True)
class Lit:
    kind: str
    args: tuple

    def __post_init__(self):
        if self.kind not in ATOM_KINDS:
            raise GoalError(f"unknown predicate kind {self.kind!r} in goal")
        arity = 1 if self.kind in UNARY_KINDS else 2
        if len(self.args) != arity:
            raise GoalError(f"goal literal {self.kind} takes {arity} argument(s), got {len(self.args)}")


@dataclass(frozen=True)
class Not:
    child: "Formula"

    def __post_init__(self):
        ok = isinstance(self.child, Lit) or (
            isinstance(self.child, And) and all(isinstance(c, Lit) for c in self.child.children)
        )
        if not ok:
            raise GoalError("negation may only wrap a literal or a conjunction of literals")


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class ForAll:
    category: str
    var: str
    body: "Formula"


@dataclass(frozen=True)
class ForAtLeastOne:
    category: str
    var: str
    body: "Formula"


Formula = Union[Lit, Not, And, ForAll, ForAtLeastOne]
Quantifier = (ForAll, ForAtLeastOne)


class GroundLiteral(NamedTuple):
    atom: Atom
    negated: bool = False

    def holds(self, state: WorldState) -> bool:
        return (self.atom in state.atoms) != self.negated

    def __str__(self):
        core = f"{self.atom.kind}({', '.join(self.atom.args)})"
        return f"not {core}" if self.negated else core


@dataclass(frozen=True)
class Grounding:
    literals: tuple
    witness: dict = field(default_factory=dict, compare=False, hash=False)

    def __len__(self):
        return len(self.literals)

    @property
    def literal_set(self) -> frozenset:
        return frozenset(self.literals)


@dataclass(frozen=True)
class GroundedGoal:
    groundings: tuple

    def __post_init__(self):
        if not self.groundings:
            raise UngroundableGoalError("a grounded goal needs at least one grounding")

    def __len__(self):
        return len(self.groundings)


def strip_var(var: str) -> str:
    return var[1:] if var.startswith("?") else var


def check_bound(formula: Formula, scene: Scene | None = None, bound: tuple = ()) -> None:
    """Raise ``UnboundVariableError`` for a term that is neither bound nor a scene object.

    Without a scene only ``?``-prefixed terms can be recognised as variables.
    """
    if isinstance(formula, Quantifier):
        v = strip_var(formula.var)
        if v in bound:
            raise GoalError(f"variable {v!r} is bound twice")
        check_bound(formula.body, scene, bound + (v,))
    elif isinstance(formula, And):
        for c in formula.children:
            check_bound(c, scene, bound)
    elif isinstance(formula, Not):
        check_bound(formula.child, scene, bound)
    else:
        for t in formula.args:
            name = strip_var(t)
            if name in bound:
                continue
            if t.startswith("?") or (scene is not None and scene.get(t) is None):
                raise UnboundVariableError(f"unbound variable {t!r} in literal {formula.kind}")


def _lit(formula: Lit, env: dict, negated: bool) -> GroundLiteral:
    args = tuple(env.get(strip_var(t), t) for t in formula.args)
    return GroundLiteral(Atom(formula.kind, args), negated)


def _expand(formula: Formula, scene: Scene, env: dict, scope: str) -> list:
    """Alternatives for ``formula``: list of (literal tuple, witness dict)."""
    if isinstance(formula, Lit):
        return [((_lit(formula, env, False),), {})]
    if isinstance(formula, Not):
        lits = (formula.child,) if isinstance(formula.child, Lit) else formula.child.children
        # not(a and b) is satisfied by falsifying any one conjunct
        return [((_lit(l, env, True),), {}) for l in lits]
    if isinstance(formula, And):
        parts = [_expand(c, scene, env, scope) for c in formula.children]
        return _product(parts)
    members = scene.members(formula.category)
    var = strip_var(formula.var)
    if isinstance(formula, ForAll):
        if not members:
            warnings.warn(f"no {formula.category!r} objects: 'for every' is vacuously true", stacklevel=2)
        parts = [
            _expand(formula.body, scene, {**env, var: m}, f"{scope}{var}={m};")
            for m in members
        ]
        return _product(parts)
    if not members:
        raise UngroundableGoalError(f"no {formula.category!r} objects to witness 'for at least one'")
    key = f"{var}[{scope.rstrip(';')}]" if scope else var
    out = []
    for m in members:
        for lits, wit in _expand(formula.body, scene, {**env, var: m}, f"{scope}{var}={m};"):
            out.append((lits, {key: m, **wit}))
    return out


def _product(parts: list) -> list:
    out = []
    for combo in itertools.product(*parts):
        lits = tuple(itertools.chain.from_iterable(c[0] for c in combo))
        wit = {}
        for c in combo:
            wit.update(c[1])
        out.append((lits, wit))
    return out


def _dedup(lits: tuple) -> tuple:
    return tuple(dict.fromkeys(lits))


def contradictory(literals) -> bool:
    positive = {l.atom for l in literals if not l.negated}
    return any(l.negated and l.atom in positive for l in literals)


def ground_goal(formula: Formula, scene: Scene) -> GroundedGoal:
    """Expand ``formula`` over ``scene`` into its alternative groundings.

    'For every' becomes a conjunction over the category, each combination of
    'for at least one' witnesses becomes a grounding. Groundings with equal
    literal sets are merged, and groundings that demand a literal together
    with its negation are dropped since no state satisfies them.
    """
    check_bound(formula, scene)
    seen = set()
    groundings = []
    for lits, wit in _expand(formula, scene, {}, ""):
        lits = _dedup(lits)
        key = frozenset(lits)
        if key in seen or contradictory(lits):
            continue
        seen.add(key)
        groundings.append(Grounding(lits, wit))
    if not groundings:
        raise UngroundableGoalError("every grounding of the goal is self-contradictory")
    return GroundedGoal(tuple(groundings))


def count_satisfied(state: WorldState, grounding: Grounding) -> int:
    return sum(1 for l in grounding.literals if l.holds(state))


def progress(state: WorldState, goal: GroundedGoal) -> tuple[Fraction, bool]:
    best = Fraction(0)
    for g in goal.groundings:
        if not g.literals:
            return Fraction(1), True
        best = max(best, Fraction(count_satisfied(state, g), len(g)))
    return best, best == 1


def formula_from_json(node) -> Formula:
    """Build a formula from the nested-array activity file notation.

    ``["forall", cat, var, body]``, ``["exists", cat, var, body]``,
    ``["and", *children]``, ``["not", child]`` and ``[kind, *terms]``.
    """
    if not isinstance(node, list) or not node or not isinstance(node[0], str):
        raise GoalError(f"malformed goal node {node!r}")
    head, rest = node[0].lower(), node[1:]
    if head in ("forall", "exists", "foratleastone"):
        if len(rest) != 3:
            raise GoalError(f"{head} expects [category, variable, body], got {rest!r}")
        cls = ForAll if head == "forall" else ForAtLeastOne
        return cls(rest[0], rest[1], formula_from_json(rest[2]))
    if head == "and":
        return And(tuple(formula_from_json(c) for c in rest))
    if head == "not":
        if len(rest) != 1:
            raise GoalError("not expects exactly one child")
        return Not(formula_from_json(rest[0]))
    if head not in ATOM_KINDS:
        raise GoalError(f"unknown predicate kind {node[0]!r} in goal")
    return Lit(head, tuple(rest))


def formula_to_json(formula: Formula) -> list:
    if isinstance(formula, ForAll):
        return ["forall", formula.category, formula.var, formula_to_json(formula.body)]
    if isinstance(formula, ForAtLeastOne):
        return ["exists", formula.category, formula.var, formula_to_json(formula.body)]
    if isinstance(formula, And):
        return ["and", *(formula_to_json(c) for c in formula.children)]
    if isinstance(formula, Not):
        return ["not", formula_to_json(formula.child)]
    return [formula.kind, *formula.args]
