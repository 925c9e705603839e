import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcwlab import approx
from pcwlab.approx import (MlpSpec, PolicyParameters, actor_logits, backward, central_difference,
                           critic_value, forward, grad_critic, grad_log_policy, init_policy,
                           log_policy, log_softmax, normalizer_from_pool, relative_error, softmax)

from oracles import mlp_forward, mlp_grad


def small_policy(seed=0, n_inputs=approx.N_INPUTS, hidden=(8, 6), n_actions=13):
    p = init_policy(seed, np.zeros(n_inputs), np.ones(n_inputs), n_actions, hidden)
    g = np.random.default_rng(seed)
    p.actor[:] = g.normal(0, 0.5, p.actor.size)
    p.critic[:] = g.normal(0, 0.5, p.critic.size)
    return p


def test_layout_and_sizes():
    spec = MlpSpec(3, (4,), 2)
    assert spec.n_params == 3 * 4 + 4 + 4 * 2 + 2
    theta = np.arange(spec.n_params, dtype=float)
    (W1, b1), (W2, b2) = approx.layers(spec, theta)
    assert W1[1, 0] == 3 and b1[0] == 12 and W2[0, 0] == 16 and b2[-1] == spec.n_params - 1


def test_forward_matches_python_oracle():
    p = small_policy(1)
    x = np.random.default_rng(2).normal(size=approx.N_INPUTS)
    out, _ = forward(p.actor_spec, p.actor, x)
    ref, _ = mlp_forward(p.actor_spec.sizes, p.actor, x)
    assert np.array_equal(out, ref)


def test_batch_equals_single():
    p = small_policy(3)
    X = np.random.default_rng(4).normal(size=(50, approx.N_INPUTS))
    batch = actor_logits(p, X)
    assert np.array_equal(batch, np.stack([actor_logits(p, x) for x in X]))
    perm = np.random.default_rng(5).permutation(50)
    assert np.array_equal(critic_value(p, X[perm], 4), critic_value(p, X, 4)[perm])


def test_zero_init_is_uniform_and_flat():
    p = init_policy(0, np.zeros(approx.N_INPUTS), np.ones(approx.N_INPUTS), zero=True)
    x = np.ones(approx.N_INPUTS)
    assert np.all(actor_logits(p, x) == 0)
    assert np.allclose(softmax(actor_logits(p, x)), 1 / 601, rtol=0, atol=1e-15)
    assert critic_value(p, x, 17) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-700, 700), min_size=1, max_size=50))
def test_softmax_normalised(logits):
    p = softmax(np.array(logits))
    assert abs(p.sum() - 1.0) < 1e-12 and np.all(p >= 0)
    assert np.all(np.isfinite(log_softmax(np.array(logits))))


def test_backward_matches_oracle():
    p = small_policy(6)
    x = np.random.default_rng(7).normal(size=approx.N_INPUTS)
    dout = np.random.default_rng(8).normal(size=13)
    _, acts = forward(p.actor_spec, p.actor, x)
    assert np.array_equal(backward(p.actor_spec, p.actor, acts, dout),
                          mlp_grad(p.actor_spec.sizes, p.actor, x, dout))


def test_head_gradient_equals_one_hot_backward():
    p = small_policy(9)
    x = np.random.default_rng(10).normal(size=approx.N_INPUTS)
    _, acts = forward(p.critic_spec, p.critic, x)
    e = np.zeros(13)
    e[5] = 1.0
    assert np.array_equal(grad_critic(p, x, 5), backward(p.critic_spec, p.critic, acts, e))


@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(seed):
    p = small_policy(seed)
    g = np.random.default_rng(100 + seed)
    x = g.normal(size=approx.N_INPUTS)
    a = int(g.integers(13))
    dirs = np.vstack([np.eye(p.actor.size)[g.choice(p.actor.size, 20, replace=False)],
                      g.normal(size=(5, p.actor.size))])

    def f_actor(theta):
        q = p.copy()
        q.actor[:] = theta
        return log_policy(q, x, a)

    assert relative_error(dirs @ grad_log_policy(p, x, a),
                          central_difference(f_actor, p.actor, dirs)) < 1e-4
    cdirs = np.vstack([np.eye(p.critic.size)[g.choice(p.critic.size, 20, replace=False)],
                       g.normal(size=(5, p.critic.size))])

    def f_critic(theta):
        q = p.copy()
        q.critic[:] = theta
        return critic_value(q, x, a)

    assert relative_error(cdirs @ grad_critic(p, x, a),
                          central_difference(f_critic, p.critic, cdirs)) < 1e-4


def test_score_function_has_zero_mean():
    p = init_policy(0, np.zeros(approx.N_INPUTS), np.ones(approx.N_INPUTS), 5, (4,))
    x = np.ones(approx.N_INPUTS) * 0.3
    probs = softmax(actor_logits(p, x))
    actions = np.random.default_rng(0).choice(5, size=100_000, p=probs)
    grads = np.stack([grad_log_policy(p, x, a) for a in range(5)])
    sample = grads[actions]
    mean, se = sample.mean(axis=0), sample.std(axis=0) / np.sqrt(len(sample))
    live = se > 0
    assert np.all(np.abs(mean[live]) <= 4 * se[live] + 1e-12)
    assert np.allclose(probs @ grads, 0.0, atol=1e-12)


def test_policy_json_round_trip_bit_exact():
    p = small_policy(11)
    p.actor[0] = np.nextafter(0.1, 1.0)
    p.critic[1] = -5e-324
    p.meta = {"seed": 3}
    back = PolicyParameters.from_json(p.to_json())
    assert back.actor.tobytes() == p.actor.tobytes()
    assert back.critic.tobytes() == p.critic.tobytes()
    assert back.norm_mean.tobytes() == p.norm_mean.tobytes()
    assert back.to_json() == p.to_json()


def test_policy_json_version_and_shape_checked():
    p = small_policy(12)
    with pytest.raises(ValueError):
        PolicyParameters.from_json(p.to_json().replace('"version": 1', '"version": 9'))
    with pytest.raises(ValueError):
        PolicyParameters(p.actor_spec, p.actor[:-1], p.critic_spec, p.critic, p.norm_mean,
                         p.norm_scale)
    with pytest.raises(ValueError):
        PolicyParameters(p.actor_spec, p.actor, p.critic_spec, p.critic, p.norm_mean,
                         np.zeros_like(p.norm_scale))


def test_non_finite_logits_raise():
    p = small_policy(13)
    p.actor[-1] = np.inf
    with pytest.raises(FloatingPointError):
        actor_logits(p, np.zeros(approx.N_INPUTS))


def test_normalizer_weights_by_resampling(pool):
    mean, scale = normalizer_from_pool(pool)
    X = approx.raw_inputs(pool.train)[pool.customer_index]
    assert np.allclose(mean, X.mean(axis=0), rtol=1e-10)
    assert np.allclose(scale, X.std(axis=0), rtol=1e-8)
