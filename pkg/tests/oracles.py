"""Independent reference computations used by several test modules.

The MLP here is plain Python floats and loops, written from the math rather
than from the compiled kernels.  Sums run in index order, which is the
evaluation order the package commits to, so results can be compared bitwise.
"""
import math

import numpy as np

from pcwlab.approx import raw_inputs
from pcwlab.conversion import BIN_HI, BIN_LO
from pcwlab.simenv import simulate
from pcwlab.trainer import training_draws


def unpack(sizes, theta):
    layers, off = [], 0
    for fi, fo in zip(sizes[:-1], sizes[1:]):
        W = [[float(theta[off + o * fi + i]) for i in range(fi)] for o in range(fo)]
        off += fo * fi
        b = [float(theta[off + o]) for o in range(fo)]
        off += fo
        layers.append((W, b))
    return layers


def mlp_forward(sizes, theta, x):
    """Returns (outputs, activations) where activations[l] feeds layer l."""
    layers = unpack(sizes, theta)
    h = [float(v) for v in x]
    acts = [h]
    for l, (W, b) in enumerate(layers):
        z = []
        for o in range(len(b)):
            a = 0.0
            for i in range(len(h)):
                a += W[o][i] * h[i]
            z.append(b[o] + a)
        if l < len(layers) - 1:
            h = [math.tanh(v) for v in z]
            acts.append(h)
        else:
            return z, acts


def mlp_grad(sizes, theta, x, dout):
    """Gradient of sum_k dout[k] * output[k], flat in the package's layout."""
    layers = unpack(sizes, theta)
    _, acts = mlp_forward(sizes, theta, x)
    grads = [None] * len(layers)
    delta = [float(d) for d in dout]
    for l in range(len(layers) - 1, -1, -1):
        W, _ = layers[l]
        h = acts[l]
        grads[l] = ([[delta[o] * h[i] for i in range(len(h))] for o in range(len(delta))], list(delta))
        if l > 0:
            back = [0.0] * len(h)
            for o in range(len(delta)):
                for i in range(len(h)):
                    back[i] += W[o][i] * delta[o]
            delta = [back[i] * (1.0 - h[i] * h[i]) for i in range(len(h))]
    flat = []
    for gW, gb in grads:
        for row in gW:
            flat.extend(row)
        flat.extend(gb)
    return flat


def log_softmax(logits):
    m = max(logits)
    s = 0.0
    for v in logits:
        s += math.exp(v - m)
    lse = math.log(s)
    return [(v - m) - lse for v in logits]


def sample(probs, u):
    c = 0.0
    for k, p in enumerate(probs):
        c += p
        if u <= c:
            return k
    return len(probs) - 1


def fitted_lookup(model, z):
    k = round(z * 100.0)
    if k < BIN_LO:
        return model.left_value
    if k > BIN_HI:
        return model.right_value
    return float(model.values[k - BIN_LO])


def brute_force_action(p0, b, top5, top610, p_fn, grid):
    """Exhaustive argmax of p(z) * (P - b) over the grid, lowest index on ties."""
    best, best_k = -math.inf, 0
    for k in range(grid.count):
        prem = (grid.lo + k * grid.step) * p0
        v = p_fn((prem - top5) / (top610 - top5)) * (prem - b)
        if v > best:
            best, best_k = v, k
    return best_k, best


def reference_step(params, data, model, mode, seed, lr_a, lr_q):
    """One iteration of the actor-critic rule, computed by hand."""
    cust, ua, ud = training_draws(seed, len(data), 0, 1)
    c = int(cust[0])
    x = params.normalize(raw_inputs(data))[c]
    a_sizes, c_sizes = params.actor_spec.sizes, params.critic_spec.sizes
    logits, _ = mlp_forward(a_sizes, params.actor, x)
    probs = [math.exp(v) for v in log_softmax(logits)]
    a = sample(probs, float(ua[0]))
    R = simulate(data[c], a, model, float(ud[0])).reward(mode)
    q = mlp_forward(c_sizes, params.critic, x)[0][a]
    one_hot = [0.0] * 601
    one_hot[a] = 1.0
    g_q = mlp_grad(c_sizes, params.critic, x, one_hot)
    score = [-p for p in probs]
    score[a] += 1.0
    g_pi = mlp_grad(a_sizes, params.actor, x, score)
    critic = [w - (2.0 * lr_q * (q - R)) * g for w, g in zip(params.critic, g_q)]
    actor = [w + (lr_a * q) * g for w, g in zip(params.actor, g_pi)]
    return np.array(actor), np.array(critic), a, R
