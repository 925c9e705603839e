"""Small tanh MLPs with hand-written backprop, used for the actor and critic.

Weights live in one flat float64 vector.  Layer ``l`` stores its weight
matrix (out x in, row-major) followed by its bias vector.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import rng

PARAMS_VERSION = 1
N_INPUTS = 18


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if min((self.input_dim, self.output_dim) + self.hidden) <= 0:
            raise ValueError("layer widths must be positive")
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.input_dim,) + self.hidden + (self.output_dim,)

    @property
    def n_params(self) -> int:
        s = self.sizes
        return sum(s[i + 1] * s[i] + s[i + 1] for i in range(len(s) - 1))

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "hidden": list(self.hidden),
                "output_dim": self.output_dim, "activation": self.activation}


def layers(spec: MlpSpec, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views ``(W, b)`` into ``theta`` for each layer."""
    if theta.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} weights, got {theta.shape}")
    out, off = [], 0
    s = spec.sizes
    for fan_in, fan_out in zip(s[:-1], s[1:]):
        W = theta[off: off + fan_out * fan_in].reshape(fan_out, fan_in)
        off += fan_out * fan_in
        b = theta[off: off + fan_out]
        off += fan_out
        out.append((W, b))
    return out


def init_weights(spec: MlpSpec, seed: int, tag: str) -> np.ndarray:
    """Glorot-uniform weights and zero biases."""
    theta = np.zeros(spec.n_params)
    draw = 0
    for W, _ in layers(spec, theta):
        fan_out, fan_in = W.shape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        u = rng.uniform(seed, tag, 0, np.arange(draw, draw + W.size))
        W[...] = (2.0 * u - 1.0).reshape(W.shape) * limit
        draw += W.size
    return theta


# -- compiled kernels -------------------------------------------------------
# All arithmetic is IEEE-strict with a fixed summation order, so every caller
# (gradient API, trainer, batch evaluation) sees identical bits.

@njit(cache=True)
def _dot(w, h):
    a = 0.0
    for i in range(w.shape[0]):
        a += w[i] * h[i]
    return a


@njit(cache=True)
def _affine(W, b, h, out):
    """``out[o] = b[o] + _dot(W[o], h)``, eight rows at a time (same bits)."""
    fo, fi = W.shape
    o = 0
    while o + 8 <= fo:
        a0 = a1 = a2 = a3 = a4 = a5 = a6 = a7 = 0.0
        for i in range(fi):
            hi = h[i]
            a0 += W[o, i] * hi
            a1 += W[o + 1, i] * hi
            a2 += W[o + 2, i] * hi
            a3 += W[o + 3, i] * hi
            a4 += W[o + 4, i] * hi
            a5 += W[o + 5, i] * hi
            a6 += W[o + 6, i] * hi
            a7 += W[o + 7, i] * hi
        out[o] = b[o] + a0
        out[o + 1] = b[o + 1] + a1
        out[o + 2] = b[o + 2] + a2
        out[o + 3] = b[o + 3] + a3
        out[o + 4] = b[o + 4] + a4
        out[o + 5] = b[o + 5] + a5
        out[o + 6] = b[o + 6] + a6
        out[o + 7] = b[o + 7] + a7
        o += 8
    while o < fo:
        out[o] = b[o] + _dot(W[o], h)
        o += 1


@njit(cache=True)
def _offsets(sizes):
    nl = sizes.shape[0] - 1
    offs = np.empty(nl, np.int64)
    off = 0
    for l in range(nl):
        offs[l] = off
        off += sizes[l] * sizes[l + 1] + sizes[l + 1]
    return offs


@njit(cache=True)
def _layer(theta, sizes, offs, l):
    fi, fo = sizes[l], sizes[l + 1]
    off = offs[l]
    return theta[off: off + fo * fi].reshape((fo, fi)), theta[off + fo * fi: off + fo * fi + fo]


@njit(cache=True)
def _hidden_forward(theta, sizes, offs, x, acts):
    """Fill ``acts[0..nl-1]``: the input and every hidden activation."""
    nl = sizes.shape[0] - 1
    acts[0, :sizes[0]] = x
    for l in range(nl - 1):
        W, b = _layer(theta, sizes, offs, l)
        z = acts[l + 1, :sizes[l + 1]]
        _affine(W, b, acts[l, :sizes[l]], z)
        for o in range(sizes[l + 1]):
            z[o] = np.tanh(z[o])


@njit(cache=True)
def _output_row(theta, sizes, offs, acts, o):
    nl = sizes.shape[0] - 1
    W, b = _layer(theta, sizes, offs, nl - 1)
    return b[o] + _dot(W[o], acts[nl - 1, :sizes[nl - 1]])


@njit(cache=True)
def _output(theta, sizes, offs, acts, out):
    nl = sizes.shape[0] - 1
    W, b = _layer(theta, sizes, offs, nl - 1)
    _affine(W, b, acts[nl - 1, :sizes[nl - 1]], out)


@njit(cache=True)
def _forward(theta, sizes, offs, x, acts, out):
    _hidden_forward(theta, sizes, offs, x, acts)
    _output(theta, sizes, offs, acts, out)


@njit(cache=True)
def _forward_batch(theta, sizes, X, out):
    offs = _offsets(sizes)
    acts = np.zeros((sizes.shape[0] - 1, sizes.max()))
    for r in range(X.shape[0]):
        _forward(theta, sizes, offs, X[r], acts, out[r])


@njit(cache=True)
def _backprop(theta, sizes, offs, acts, dout, coef, target, apply):
    """Reverse pass for the scalar ``dout . output``.

    With ``apply`` false the gradient is written to ``target``; otherwise
    ``target[j] += coef * grad[j]`` in place (``target`` may be ``theta``).
    Each layer's downstream delta is formed before that layer is touched.
    """
    nl = sizes.shape[0] - 1
    width = sizes.max()
    delta = np.empty(width)
    nxt = np.empty(width)
    delta[:sizes[nl]] = dout
    for l in range(nl - 1, -1, -1):
        fi, fo = sizes[l], sizes[l + 1]
        off = offs[l]
        W = theta[off: off + fo * fi].reshape((fo, fi))
        h = acts[l, :fi]
        if l > 0:
            nxt[:fi] = 0.0
            for o in range(fo):
                d = delta[o]
                for i in range(fi):
                    nxt[i] += W[o, i] * d
        T = target[off: off + fo * fi].reshape((fo, fi))
        tb = target[off + fo * fi: off + fo * fi + fo]
        if apply:
            for o in range(fo):
                d = delta[o]
                for i in range(fi):
                    T[o, i] += coef * (d * h[i])
                tb[o] += coef * d
        else:
            for o in range(fo):
                d = delta[o]
                for i in range(fi):
                    T[o, i] = d * h[i]
                tb[o] = d
        if l > 0:
            for i in range(fi):
                a = h[i]
                delta[i] = nxt[i] * (1.0 - a * a)


@njit(cache=True)
def _backprop_head(theta, sizes, offs, acts, head, coef, target, apply):
    """``_backprop`` specialised to ``dout = e_head``; untouched entries stay 0 / unchanged."""
    nl = sizes.shape[0] - 1
    width = sizes.max()
    delta = np.empty(width)
    nxt = np.empty(width)
    for l in range(nl - 1, -1, -1):
        fi, fo = sizes[l], sizes[l + 1]
        off = offs[l]
        W = theta[off: off + fo * fi].reshape((fo, fi))
        T = target[off: off + fo * fi].reshape((fo, fi))
        tb = target[off + fo * fi: off + fo * fi + fo]
        h = acts[l, :fi]
        if l == nl - 1:
            if l > 0:
                for i in range(fi):
                    nxt[i] = W[head, i]
            if apply:
                for i in range(fi):
                    T[head, i] += coef * (1.0 * h[i])
                tb[head] += coef * 1.0
            else:
                T[head, :] = h
                tb[head] = 1.0
        else:
            if l > 0:
                nxt[:fi] = 0.0
                for o in range(fo):
                    d = delta[o]
                    for i in range(fi):
                        nxt[i] += W[o, i] * d
            if apply:
                for o in range(fo):
                    d = delta[o]
                    for i in range(fi):
                        T[o, i] += coef * (d * h[i])
                    tb[o] += coef * d
            else:
                for o in range(fo):
                    d = delta[o]
                    for i in range(fi):
                        T[o, i] = d * h[i]
                    tb[o] = d
        if l > 0:
            for i in range(fi):
                a = h[i]
                delta[i] = nxt[i] * (1.0 - a * a)


@njit(cache=True)
def _log_softmax(logits, out):
    m = logits.max()
    s = 0.0
    for k in range(logits.shape[0]):
        s += np.exp(logits[k] - m)
    lse = np.log(s)
    for k in range(logits.shape[0]):
        out[k] = (logits[k] - m) - lse


@njit(cache=True)
def _sample(probs, u):
    """Inverse-CDF draw; the last index absorbs any rounding shortfall."""
    c = 0.0
    n = probs.shape[0]
    for k in range(n):
        c += probs[k]
        if u <= c:
            return k
    return n - 1


def _sizes(spec: MlpSpec) -> np.ndarray:
    return np.array(spec.sizes, dtype=np.int64)


def forward(spec: MlpSpec, theta: np.ndarray, x: np.ndarray):
    """Returns ``(output, activations)`` for one input, or ``(outputs, None)`` for a batch."""
    sizes = _sizes(spec)
    if theta.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} weights, got {theta.shape}")
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 2:
        out = np.empty((x.shape[0], spec.output_dim))
        _forward_batch(theta, sizes, x, out)
        return out, None
    acts = np.zeros((len(sizes) - 1, sizes.max()))
    out = np.empty(spec.output_dim)
    _forward(theta, sizes, _offsets(sizes), x, acts, out)
    return out, acts


def backward(spec: MlpSpec, theta: np.ndarray, acts, dout: np.ndarray) -> np.ndarray:
    """Gradient of ``dout . output`` w.r.t. the weights, for a single input."""
    sizes = _sizes(spec)
    grad = np.zeros(spec.n_params)
    _backprop(theta, sizes, _offsets(sizes), acts, np.asarray(dout, dtype=np.float64), 0.0, grad, False)
    return grad


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim == 1:
        out = np.empty_like(logits)
        _log_softmax(logits, out)
        return out
    return np.stack([log_softmax(row) for row in logits])


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


@dataclass
class PolicyParameters:
    actor_spec: MlpSpec
    actor: np.ndarray
    critic_spec: MlpSpec
    critic: np.ndarray
    norm_mean: np.ndarray
    norm_scale: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.actor = np.asarray(self.actor, dtype=np.float64)
        self.critic = np.asarray(self.critic, dtype=np.float64)
        self.norm_mean = np.asarray(self.norm_mean, dtype=np.float64)
        self.norm_scale = np.asarray(self.norm_scale, dtype=np.float64)
        if self.actor.shape != (self.actor_spec.n_params,):
            raise ValueError("actor weight count does not match its spec")
        if self.critic.shape != (self.critic_spec.n_params,):
            raise ValueError("critic weight count does not match its spec")
        if self.norm_mean.shape != (self.actor_spec.input_dim,) or self.norm_scale.shape != self.norm_mean.shape:
            raise ValueError("normaliser size must equal the input dimension")
        if not np.all(self.norm_scale > 0):
            raise ValueError("normaliser scales must be strictly positive")

    def copy(self) -> "PolicyParameters":
        return PolicyParameters(self.actor_spec, self.actor.copy(), self.critic_spec,
                                self.critic.copy(), self.norm_mean.copy(),
                                self.norm_scale.copy(), dict(self.meta))

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        return (raw - self.norm_mean) / self.norm_scale

    def to_json(self) -> str:
        return json.dumps({
            "version": PARAMS_VERSION,
            "layout": "per layer: W (out x in, row-major) then b",
            "actor": {"spec": self.actor_spec.to_dict(), "weights": self.actor.tolist()},
            "critic": {"spec": self.critic_spec.to_dict(), "weights": self.critic.tolist()},
            "normalizer": {"mean": self.norm_mean.tolist(), "scale": self.norm_scale.tolist()},
            "meta": self.meta,
        })

    @classmethod
    def from_json(cls, text: str) -> "PolicyParameters":
        d = json.loads(text)
        if d.get("version") != PARAMS_VERSION:
            raise ValueError(f"unsupported policy parameter version {d.get('version')!r}")
        spec = lambda s: MlpSpec(s["input_dim"], tuple(s["hidden"]), s["output_dim"], s["activation"])
        return cls(spec(d["actor"]["spec"]), np.array(d["actor"]["weights"], dtype=np.float64),
                   spec(d["critic"]["spec"]), np.array(d["critic"]["weights"], dtype=np.float64),
                   np.array(d["normalizer"]["mean"]), np.array(d["normalizer"]["scale"]),
                   d.get("meta", {}))


def default_specs(n_actions: int = 601, hidden=(64, 64)) -> tuple[MlpSpec, MlpSpec]:
    return MlpSpec(N_INPUTS, hidden, n_actions), MlpSpec(N_INPUTS, hidden, n_actions)


def init_policy(seed: int, norm_mean, norm_scale, n_actions: int = 601, hidden=(64, 64),
                zero: bool = False) -> PolicyParameters:
    a_spec, c_spec = default_specs(n_actions, hidden)
    if zero:
        actor, critic = np.zeros(a_spec.n_params), np.zeros(c_spec.n_params)
    else:
        actor = init_weights(a_spec, seed, "init-actor")
        critic = init_weights(c_spec, seed, "init-critic")
    return PolicyParameters(a_spec, actor, c_spec, critic, norm_mean, norm_scale)


def raw_inputs(dataset) -> np.ndarray:
    """Features, benchmark premium and burn cost; market quantiles are withheld."""
    return np.column_stack([dataset.features, dataset.benchmark_premium, dataset.burn_cost])


def record_inputs(record) -> np.ndarray:
    return np.array(record.features + (record.benchmark_premium, record.burn_cost))


def normalizer_from_pool(pool) -> tuple[np.ndarray, np.ndarray]:
    """Mean and scale of agent inputs, weighted by resampling frequency."""
    w = np.bincount(pool.customer_index, minlength=len(pool.train)).astype(np.float64)
    X = raw_inputs(pool.train)
    mean = np.average(X, axis=0, weights=w)
    sd = np.sqrt(np.average((X - mean) ** 2, axis=0, weights=w))
    return mean, np.where(sd > 0, sd, 1.0)


def actor_logits(params: PolicyParameters, x: np.ndarray) -> np.ndarray:
    """Logits over the action grid for normalised input(s) ``x``."""
    out, _ = forward(params.actor_spec, params.actor, x)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite actor logits")
    return out


def critic_value(params: PolicyParameters, x: np.ndarray, action_index: int) -> float:
    out, _ = forward(params.critic_spec, params.critic, x)
    v = out[..., action_index]
    if not np.all(np.isfinite(v)):
        raise FloatingPointError("non-finite critic value")
    return float(v) if np.ndim(v) == 0 else v


def log_policy(params: PolicyParameters, x: np.ndarray, action_index: int) -> float:
    return float(log_softmax(actor_logits(params, x))[action_index])


def grad_log_policy(params: PolicyParameters, x: np.ndarray, action_index: int) -> np.ndarray:
    logits, acts = forward(params.actor_spec, params.actor, x)
    dout = -softmax(logits)
    dout[action_index] += 1.0
    return backward(params.actor_spec, params.actor, acts, dout)


def grad_critic(params: PolicyParameters, x: np.ndarray, action_index: int) -> np.ndarray:
    spec = params.critic_spec
    _, acts = forward(spec, params.critic, x)
    sizes = _sizes(spec)
    grad = np.zeros(spec.n_params)
    _backprop_head(params.critic, sizes, _offsets(sizes), acts, int(action_index), 0.0, grad, False)
    return grad


def central_difference(f, theta: np.ndarray, directions: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Directional derivatives of ``f`` at ``theta`` along each row of ``directions``."""
    out = np.empty(len(directions))
    for i, v in enumerate(directions):
        out[i] = (f(theta + h * v) - f(theta - h * v)) / (2.0 * h)
    return out


def relative_error(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)
