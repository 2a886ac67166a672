"""MDP wrapper around an activity and the PPO trainer for the actor-critic network."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .activity import Activity
from .embed import hash_keys, ngram_keys, tokenize
from .goals import GroundedGoal, progress
from .nn import (
    Adam, NumericError, PolicyParams, PPOBatch, apply_mask, clip_grad_norm, forward,
    init_params, log_softmax, ppo_loss,
)
from .render import render_goal, render_state
from .world import N_PRIMITIVES, Action, Primitive, WorldState, apply_action, executable

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RewardParams:
    c: float = 200.0
    invalid_penalty: float = -1.0
    max_steps: int = 64

    def __post_init__(self):
        if self.c <= 0 or self.max_steps < 1:
            raise ValueError("need c > 0 and max_steps >= 1")


@dataclass(frozen=True)
class PPOConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    epochs: int = 4
    minibatch: int = 64
    lr: float = 3e-4
    max_grad_norm: float = 0.5
    vf_coef: float = 0.5
    ent_coef: float = 0.01
    n_steps: int = 512


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 512
    feature_dim: int = 512
    hidden: int = 128
    reward: RewardParams = field(default_factory=RewardParams)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    mask_invalid: bool = False


def featurize(state_text: str, goal_text: str, dim: int = 512) -> np.ndarray:
    keys = ngram_keys(tokenize(state_text), "s:") + ngram_keys(tokenize(goal_text), "g:")
    return hash_keys(keys, dim)


def reward(prev: WorldState, executed: bool, next_state: WorldState, goal: GroundedGoal,
           params: RewardParams = RewardParams()) -> float:
    if not executed:
        return params.invalid_penalty
    before, _ = progress(prev, goal)
    after, _ = progress(next_state, goal)
    return float((after - before) * params.c)


class ActivityEnv:
    """Episode dynamics for one activity; featurized observations are memoised per state."""

    def __init__(self, activity: Activity, reward_params: RewardParams = RewardParams(), feature_dim: int = 512):
        self.activity = activity
        self.reward_params = reward_params
        self.feature_dim = feature_dim
        self.goal_text = render_goal(activity.goal)
        self._features = {}
        self._progress = {}

    @property
    def n_objects(self) -> int:
        return self.activity.n_objects

    def reset(self) -> WorldState:
        return self.activity.initial

    def features(self, state: WorldState) -> np.ndarray:
        x = self._features.get(state)
        if x is None:
            x = featurize(render_state(state, self.activity.scene), self.goal_text, self.feature_dim)
            self._features[state] = x
        return x

    def progress(self, state: WorldState):
        p = self._progress.get(state)
        if p is None:
            p = self._progress[state] = progress(state, self.activity.grounded)
        return p

    def masks(self, state: WorldState) -> tuple:
        """Executability masks: primitives with any valid object, objects valid per primitive."""
        scene = self.activity.scene
        table = np.array([
            [executable(state, scene, Action(p, k)) for k in range(len(scene))]
            for p in Primitive
        ])
        return table.any(axis=1), table

    def step(self, state: WorldState, action: Action, rng) -> tuple:
        """Returns (next_state, reward, executed, success)."""
        nxt, executed = apply_action(state, self.activity.scene, action, self.activity.action_model, rng)
        if not executed:
            return nxt, self.reward_params.invalid_penalty, False, False
        before, _ = self.progress(state)
        after, success = self.progress(nxt)
        return nxt, float((after - before) * self.reward_params.c), True, success


def _sample(logits: np.ndarray, rng) -> tuple:
    logp = log_softmax(logits)
    cdf = np.cumsum(np.exp(logp))
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    i = min(i, len(logits) - 1)
    return i, float(logp[i])


def sample_action(prim_logits, obj_logits, rng) -> tuple[Action, float]:
    """Draw primitive and object from independent softmax heads."""
    p, lp = _sample(np.asarray(prim_logits, dtype=float), rng)
    o, lo = _sample(np.asarray(obj_logits, dtype=float), rng)
    return Action(Primitive(p), o), lp + lo


def action_logprob(prim_logits, obj_logits, action: Action) -> float:
    return float(log_softmax(prim_logits)[action.primitive] + log_softmax(obj_logits)[action.object_index])


@dataclass
class Transition:
    features: np.ndarray
    prim: int
    obj: int
    logprob: float
    reward: float
    value: float
    done: bool
    prim_mask: np.ndarray | None = None
    obj_mask: np.ndarray | None = None


class Agent:
    """Acts with a fixed parameter set; optionally masks non-executable actions."""

    def __init__(self, env: ActivityEnv, params: PolicyParams, mask_invalid: bool = False):
        self.env, self.params, self.mask_invalid = env, params, mask_invalid

    def act(self, state: WorldState, rng) -> tuple:
        x = self.env.features(state)
        prim_logits, obj_logits, value = forward(self.params, x)
        prim_mask = obj_mask = None
        if self.mask_invalid:
            prim_mask, table = self.env.masks(state)
            if prim_mask.any():
                prim_logits = apply_mask(prim_logits, prim_mask)
                p, lp = _sample(prim_logits, rng)
                obj_mask = table[p]
                o, lo = _sample(apply_mask(obj_logits, obj_mask), rng)
                return Action(Primitive(p), o), lp + lo, float(value), x, prim_mask, obj_mask
            prim_mask = None
        action, logp = sample_action(prim_logits, obj_logits, rng)
        return action, logp, float(value), x, prim_mask, obj_mask


def run_episode(env: ActivityEnv, params: PolicyParams, rng, policy=None, mask_invalid: bool = False) -> tuple:
    """Roll out one episode; ``policy(state, step)`` overrides the network's choice.

    Returns (trajectory, total reward, success).
    """
    agent = Agent(env, params, mask_invalid)
    state = env.reset()
    traj, total, success = [], 0.0, False
    for t in range(env.reward_params.max_steps):
        action, logp, value, x, pm, om = agent.act(state, rng)
        if policy is not None:
            action = policy(state, t)
            prim_logits, obj_logits, _ = forward(params, x)
            logp = action_logprob(prim_logits, obj_logits, action)
        state, r, _, success = env.step(state, action, rng)
        total += r
        done = success or t == env.reward_params.max_steps - 1
        traj.append(Transition(x, int(action.primitive), action.object_index, logp, r, value, done, pm, om))
        if success:
            break
    return traj, total, success


def compute_gae(rewards, values, dones, last_value: float, gamma: float = 0.99, lam: float = 0.95) -> tuple:
    """Generalised advantage estimates and returns; ``dones[t]`` ends the episode after step t."""
    n = len(rewards)
    adv = np.zeros(n)
    gae = 0.0
    for t in reversed(range(n)):
        nonterminal = 0.0 if dones[t] else 1.0
        next_value = last_value if t == n - 1 else values[t + 1]
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        gae = delta + gamma * lam * nonterminal * gae
        adv[t] = gae
    return adv, adv + np.asarray(values, dtype=float)


def make_batch(transitions: list, adv: np.ndarray, returns: np.ndarray) -> PPOBatch:
    masked = transitions[0].prim_mask is not None
    k = len(transitions[0].features)
    return PPOBatch(
        x=np.stack([t.features for t in transitions]).reshape(-1, k),
        prim=np.array([t.prim for t in transitions]),
        obj=np.array([t.obj for t in transitions]),
        old_logp=np.array([t.logprob for t in transitions]),
        adv=np.asarray(adv, dtype=float),
        returns=np.asarray(returns, dtype=float),
        prim_mask=np.stack([t.prim_mask for t in transitions]) if masked else None,
        obj_mask=np.stack([t.obj_mask for t in transitions]) if masked else None,
    )


def ppo_update(params: PolicyParams, batch: list, hyper: PPOConfig = PPOConfig(), rng=None,
               optimizer: Adam | None = None, last_value: float = 0.0) -> tuple:
    """Several epochs of minibatch Adam steps on the clipped surrogate loss.

    Returns updated parameters (the input is left untouched) and mean stats.
    """
    if not batch:
        raise ValueError("empty batch")
    rng = rng if rng is not None else np.random.default_rng(0)
    optimizer = optimizer or Adam(hyper.lr)
    if any((t.prim_mask is None) != (batch[0].prim_mask is None) for t in batch):
        # mixed masked/unmasked rows: treat missing masks as all-valid
        for t in batch:
            if t.prim_mask is None:
                t.prim_mask = np.ones(N_PRIMITIVES, dtype=bool)
                t.obj_mask = np.ones(params.n_objects, dtype=bool)
    adv, returns = compute_gae(
        [t.reward for t in batch], [t.value for t in batch], [t.done for t in batch],
        last_value, hyper.gamma, hyper.lam,
    )
    if len(adv) > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    data = make_batch(batch, adv, returns)
    params = params.copy()
    history = []
    for _ in range(hyper.epochs):
        order = rng.permutation(len(data))
        for mb, start in enumerate(range(0, len(data), hyper.minibatch)):
            part = data.take(order[start:start + hyper.minibatch])
            try:
                _, grads, stats = ppo_loss(params, part, hyper.clip, hyper.vf_coef, hyper.ent_coef)
            except NumericError as e:
                raise NumericError(f"{e} in minibatch {mb}") from None
            stats["grad_norm"] = clip_grad_norm(grads, hyper.max_grad_norm)
            optimizer.step(params, grads)
            history.append(stats)
    if not params.is_finite():
        raise NumericError("parameters became non-finite")
    return params, {k: float(np.mean([h[k] for h in history])) for k in history[0]}


@dataclass
class LearningCurve:
    activity: str
    seed: int
    totals: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    successes: list = field(default_factory=list)

    def __len__(self):
        return len(self.totals)

    def final_mean(self, window: int = 64) -> float:
        return float(np.mean(self.totals[-window:])) if self.totals else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["episode", "total_reward", "steps", "success"])
        for i, (r, s, ok) in enumerate(zip(self.totals, self.steps, self.successes)):
            w.writerow([i, f"{r:.6f}", s, int(ok)])
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8", newline="")

    @classmethod
    def read(cls, path, activity: str = "", seed: int = -1) -> "LearningCurve":
        curve = cls(activity, seed)
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            if next(reader) != ["episode", "total_reward", "steps", "success"]:
                raise ValueError(f"{path}: unexpected curve header")
            for row in reader:
                curve.totals.append(float(row[1]))
                curve.steps.append(int(row[2]))
                curve.successes.append(row[3] == "1")
        return curve


def train(activity: Activity, config: TrainConfig = TrainConfig(), seed: int = 0,
          init: PolicyParams | None = None) -> tuple[LearningCurve, PolicyParams]:
    """Train from scratch (or from ``init``) for ``config.episodes`` episodes."""
    rng = np.random.default_rng(seed)
    env = ActivityEnv(activity, config.reward, config.feature_dim)
    if init is None:
        params = init_params(config.feature_dim, config.hidden, env.n_objects, rng)
    else:
        if init.n_objects != env.n_objects or init.feature_dim != config.feature_dim:
            raise ValueError("initial parameters do not fit this activity")
        params = init.copy()
    optimizer = Adam(config.ppo.lr)
    curve = LearningCurve(activity.name, seed)
    buffer = []
    state = env.reset()
    ep_total, ep_steps = 0.0, 0
    max_steps = config.reward.max_steps
    agent = Agent(env, params, config.mask_invalid)
    while len(curve) < config.episodes:
        action, logp, value, x, pm, om = agent.act(state, rng)
        state, r, _, success = env.step(state, action, rng)
        ep_total += r
        ep_steps += 1
        done = success or ep_steps >= max_steps
        buffer.append(Transition(x, int(action.primitive), action.object_index, logp, r, value, done, pm, om))
        if done:
            curve.totals.append(ep_total)
            curve.steps.append(ep_steps)
            curve.successes.append(success)
            state, ep_total, ep_steps = env.reset(), 0.0, 0
        if len(buffer) == config.ppo.n_steps and len(curve) < config.episodes:
            last_value = 0.0 if done else float(forward(params, env.features(state))[2])
            params, stats = ppo_update(params, buffer, config.ppo, rng, optimizer, last_value)
            agent.params = params
            log.debug("%s seed %d ep %d: %s", activity.alias, seed, len(curve), stats)
            buffer = []
    return curve, params
