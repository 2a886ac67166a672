"""Actor-critic network: two tanh trunk layers feeding primitive, object and value heads.

Everything is plain numpy with hand-written backprop; ``ppo_loss`` returns the
clipped-surrogate loss together with its exact gradient, which the test suite
checks against central finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .world import N_PRIMITIVES

# stands in for -inf on masked logits; exp underflows to exactly 0
MASKED_LOGIT = -1e30


class NumericError(FloatingPointError):
    pass


@dataclass
class PolicyParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    wp: np.ndarray
    bp: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    wv: np.ndarray
    bv: np.ndarray

    TRUNK = ("w1", "b1", "w2", "b2")
    VALUE = ("wv", "bv")
    PRIM_HEAD = ("wp", "bp")
    OBJ_HEAD = ("wo", "bo")

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    @property
    def feature_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def n_objects(self) -> int:
        return self.wo.shape[1]

    def arrays(self) -> dict:
        return {n: getattr(self, n) for n in self.names()}

    def copy(self) -> "PolicyParams":
        return PolicyParams(**{n: a.copy() for n, a in self.arrays().items()})

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays().values()])

    def with_flat(self, vec: np.ndarray) -> "PolicyParams":
        out, i = {}, 0
        for n, a in self.arrays().items():
            out[n] = vec[i:i + a.size].reshape(a.shape).copy()
            i += a.size
        return PolicyParams(**out)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays().values())

    def save(self, path) -> None:
        np.savez(path, **self.arrays())

    @classmethod
    def load(cls, path) -> "PolicyParams":
        with np.load(path) as data:
            return cls(**{n: data[n] for n in cls.names()})


def orthogonal(shape: tuple, gain: float, rng: np.random.Generator) -> np.ndarray:
    rows, cols = shape
    a = rng.standard_normal((rows, cols) if rows >= cols else (cols, rows))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return gain * (q if rows >= cols else q.T)


def init_head(hidden: int, out: int, rng: np.random.Generator, gain: float = 0.01) -> tuple:
    return orthogonal((hidden, out), gain, rng), np.zeros(out)


def init_params(feature_dim: int, hidden: int, n_objects: int, rng: np.random.Generator) -> PolicyParams:
    w1 = orthogonal((feature_dim, hidden), 1.0, rng)
    w2 = orthogonal((hidden, hidden), 1.0, rng)
    wp, bp = init_head(hidden, N_PRIMITIVES, rng)
    wo, bo = init_head(hidden, n_objects, rng)
    wv, bv = init_head(hidden, 1, rng)
    return PolicyParams(w1, np.zeros(hidden), w2, np.zeros(hidden), wp, bp, wo, bo, wv, bv)


def trunk(params: PolicyParams, x: np.ndarray) -> tuple:
    h1 = np.tanh(x @ params.w1 + params.b1)
    h2 = np.tanh(h1 @ params.w2 + params.b2)
    return h1, h2


def forward(params: PolicyParams, x: np.ndarray) -> tuple:
    """Logits for primitives and objects plus the state value.

    Works on a single feature vector or a batch of row vectors.
    """
    _, h2 = trunk(params, x)
    prim = h2 @ params.wp + params.bp
    obj = h2 @ params.wo + params.bo
    value = (h2 @ params.wv + params.bv)[..., 0]
    if not (np.all(np.isfinite(prim)) and np.all(np.isfinite(obj)) and np.all(np.isfinite(value))):
        raise NumericError("non-finite network output")
    return prim, obj, value


def log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def apply_mask(logits: np.ndarray, mask) -> np.ndarray:
    return logits if mask is None else np.where(mask, logits, MASKED_LOGIT)


@dataclass
class PPOBatch:
    x: np.ndarray
    prim: np.ndarray
    obj: np.ndarray
    old_logp: np.ndarray
    adv: np.ndarray
    returns: np.ndarray
    prim_mask: np.ndarray | None = None
    obj_mask: np.ndarray | None = None

    def __len__(self):
        return len(self.prim)

    def take(self, idx) -> "PPOBatch":
        pick = lambda a: None if a is None else a[idx]
        return PPOBatch(*(pick(getattr(self, f.name)) for f in fields(self)))


def _head_terms(logits, taken):
    logp = log_softmax(logits)
    p = np.exp(logp)
    rows = np.arange(len(taken))
    entropy = -(p * logp).sum(axis=1)
    onehot = np.zeros_like(p)
    onehot[rows, taken] = 1.0
    return logp[rows, taken], p, logp, entropy, onehot


def ppo_loss(params: PolicyParams, batch: PPOBatch, clip: float = 0.2, vf_coef: float = 0.5,
             ent_coef: float = 0.01) -> tuple:
    """Clipped surrogate loss (to minimise), its gradient and diagnostics.

    loss = -mean(min(r A, clip(r) A)) + vf_coef * mean((V - R)^2) - ent_coef * mean(H)
    where H is the summed entropy of the two factored action heads.
    """
    x, n = batch.x, len(batch)
    h1, h2 = trunk(params, x)
    prim_logits = apply_mask(h2 @ params.wp + params.bp, batch.prim_mask)
    obj_logits = apply_mask(h2 @ params.wo + params.bo, batch.obj_mask)
    value = (h2 @ params.wv + params.bv)[:, 0]

    lp_p, p_p, logp_p, ent_p, oh_p = _head_terms(prim_logits, batch.prim)
    lp_o, p_o, logp_o, ent_o, oh_o = _head_terms(obj_logits, batch.obj)
    logp = lp_p + lp_o
    ratio = np.exp(logp - batch.old_logp)
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip)
    s1, s2 = ratio * batch.adv, clipped * batch.adv
    unclipped = s1 <= s2
    surrogate = np.where(unclipped, s1, s2)
    entropy = ent_p + ent_o
    value_loss = np.mean((value - batch.returns) ** 2)
    loss = -surrogate.mean() + vf_coef * value_loss - ent_coef * entropy.mean()
    if not np.isfinite(loss):
        raise NumericError("non-finite PPO loss")

    d_logp = -np.where(unclipped, s1, 0.0) / n
    d_prim = d_logp[:, None] * (oh_p - p_p) + (ent_coef / n) * p_p * (logp_p + ent_p[:, None])
    d_obj = d_logp[:, None] * (oh_o - p_o) + (ent_coef / n) * p_o * (logp_o + ent_o[:, None])
    d_value = vf_coef * 2.0 * (value - batch.returns) / n

    grads = {
        "wp": h2.T @ d_prim, "bp": d_prim.sum(0),
        "wo": h2.T @ d_obj, "bo": d_obj.sum(0),
        "wv": h2.T @ d_value[:, None], "bv": np.array([d_value.sum()]),
    }
    dh2 = d_prim @ params.wp.T + d_obj @ params.wo.T + d_value[:, None] @ params.wv.T
    dz2 = dh2 * (1.0 - h2 ** 2)
    grads["w2"], grads["b2"] = h1.T @ dz2, dz2.sum(0)
    dz1 = (dz2 @ params.w2.T) * (1.0 - h1 ** 2)
    grads["w1"], grads["b1"] = x.T @ dz1, dz1.sum(0)

    stats = {
        "loss": float(loss),
        "surrogate": float(surrogate.mean()),
        "value_loss": float(value_loss),
        "entropy": float(entropy.mean()),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > clip)),
    }
    return float(loss), PolicyParams(**grads), stats


class Adam:
    def __init__(self, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr, self.betas, self.eps = lr, betas, eps
        self.t = 0
        self.m = self.v = None

    def step(self, params: PolicyParams, grads: PolicyParams) -> None:
        """Update ``params`` in place."""
        b1, b2 = self.betas
        if self.m is None:
            self.m = {n: np.zeros_like(a) for n, a in params.arrays().items()}
            self.v = {n: np.zeros_like(a) for n, a in params.arrays().items()}
        self.t += 1
        c1, c2 = 1 - b1 ** self.t, 1 - b2 ** self.t
        for n, g in grads.arrays().items():
            m, v = self.m[n], self.v[n]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            getattr(params, n)[...] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def clip_grad_norm(grads: PolicyParams, max_norm: float) -> float:
    norm = float(np.sqrt(sum(np.sum(g * g) for g in grads.arrays().values())))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        for g in grads.arrays().values():
            g *= scale
    return norm
