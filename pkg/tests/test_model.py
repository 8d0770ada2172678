import math

import numpy as np
import pytest

from trajicl.dataset import (
    SequenceConfig,
    build_single_trajectory_sequence,
    group_by_level,
    records_from_demonstrations,
    stack_tokenized,
    tokenize,
)
from trajicl.expert import collect_demonstrations
from trajicl.gridworld import DynamicsConfig, GeneratorKind, TaskSpec, encoded_observation_dim
from trajicl.model import (
    ModelConfig,
    ModelContractError,
    count_params,
    init_model,
    model_preset,
)
from trajicl.numerics import no_grad


def tiny_cfg(**kw):
    defaults = dict(num_layers=2, d_model=32, num_heads=4, dropout=0.0, context_len=96,
                    obs_dim=encoded_observation_dim(9), obs_embed_dim=24)
    defaults.update(kw)
    return ModelConfig(**defaults)


@pytest.fixture(scope="module")
def records():
    spec = TaskSpec("mr", GeneratorKind.MULTI_ROOM, 11, 11, rooms=2)
    demos = collect_demonstrations(spec, list(range(6)), 2, DynamicsConfig(sticky_prob=0.1))
    return records_from_demonstrations(demos)


@pytest.fixture(scope="module")
def batch(records):
    pool = group_by_level(records)
    rng = np.random.default_rng(0)
    seqs = [build_single_trajectory_sequence(pool, rng) for _ in range(3)]
    return stack_tokenized([tokenize(s, False, 96) for s in seqs])


def test_param_count_matches_closed_form():
    for preset in ("tiny", "small"):
        cfg = model_preset(preset, context_len=64)
        model = init_model(cfg, seed=0)
        assert model.param_count() == count_params(cfg)
    cfg = tiny_cfg(include_rewards=True)
    assert init_model(cfg, 0).param_count() == count_params(cfg)


def test_same_seed_bit_identical_init():
    cfg = tiny_cfg()
    a, b = init_model(cfg, 7), init_model(cfg, 7)
    for name in a.params:
        assert np.array_equal(a.params[name].data, b.params[name].data), name
    c = init_model(cfg, 8)
    assert not np.array_equal(a.params["head.w"].data, c.params["head.w"].data)


def test_pad_action_embedding_row_exists():
    model = init_model(tiny_cfg(), 0)
    assert model.params["act_emb"].shape == (32, 32)
    assert np.any(model.params["act_emb"].data[31] != 0)


def test_forward_shapes_and_single_step(records):
    model = init_model(tiny_cfg(), 0)
    pool = group_by_level(records)
    rng = np.random.default_rng(1)
    s = build_single_trajectory_sequence(pool, rng)
    one = tokenize(s, False, 96)
    with no_grad():
        logits = model.forward(one)
    assert logits.shape == (1, 96, 8)

    # a bare single-state context
    from trajicl.model.rollout import _batch_from_tokens
    from trajicl.gridworld import encode_observation
    obs_vec = encode_observation(s.records[0].steps[0].obs)
    from trajicl.dataset import KIND_STATE, PAD_ACTION
    b = _batch_from_tokens([(KIND_STATE, obs_vec, PAD_ACTION, 0.0)], model.cfg.obs_dim, False)
    with no_grad():
        logits = model.forward(b)
    assert logits.shape == (1, 1, 8)


def test_forward_causality_full_pipeline(batch):
    model = init_model(tiny_cfg(), 0)
    with no_grad():
        base = model.forward(batch).data.copy()
    t = 10
    perturbed = batch
    mutated = perturbed.obs_feats.copy()
    mutated[:, t + 1 :, :] += 0.5  # poke every later position's features
    from trajicl.dataset import TokenizedBatch
    pb = TokenizedBatch(
        token_kind=batch.token_kind, obs_feats=mutated, action_ids=batch.action_ids,
        rewards=batch.rewards, target_ids=batch.target_ids, loss_mask=batch.loss_mask,
        traj_index=batch.traj_index, include_rewards=batch.include_rewards,
    )
    with no_grad():
        out = model.forward(pb).data
    assert np.array_equal(base[:, : t + 1], out[:, : t + 1])


def test_forward_batch_rows_independent(batch):
    model = init_model(tiny_cfg(), 0)
    with no_grad():
        base = model.forward(batch).data
    perm = np.array([2, 0, 1])
    from trajicl.dataset import TokenizedBatch
    pb = TokenizedBatch(
        token_kind=batch.token_kind[perm], obs_feats=batch.obs_feats[perm],
        action_ids=batch.action_ids[perm], rewards=batch.rewards[perm],
        target_ids=batch.target_ids[perm], loss_mask=batch.loss_mask[perm],
        traj_index=batch.traj_index[perm], include_rewards=batch.include_rewards,
    )
    with no_grad():
        out = model.forward(pb).data
    assert np.allclose(out, base[perm], atol=0)


def test_forward_rejects_overlong_batch(records):
    model = init_model(tiny_cfg(context_len=8), 0)
    pool = group_by_level(records)
    s = build_single_trajectory_sequence(pool, np.random.default_rng(0))
    long_batch = tokenize(s, False, 96)
    with pytest.raises(ModelContractError):
        model.forward(long_batch)


def test_loss_at_init_near_uniform(batch):
    model = init_model(tiny_cfg(), 0)
    with no_grad():
        loss = model.loss(batch)
    assert abs(loss.item() - math.log(8)) < 0.1


def test_padding_contributes_zero_gradient(batch):
    """Randomizing pad-position content must not change any gradient."""
    model = init_model(tiny_cfg(), 0)
    loss = model.loss(batch, training=False)
    loss.backward()
    g1 = {k: v.copy() for k, v in model.grads().items()}
    model.zero_grads()

    pad = batch.token_kind == 0
    obs2 = batch.obs_feats.copy()
    obs2[pad] = np.random.default_rng(0).normal(size=(int(pad.sum()), batch.obs_dim)).astype(np.float32)
    rew2 = batch.rewards.copy()
    rew2[pad] = 9.9
    from trajicl.dataset import TokenizedBatch
    pb = TokenizedBatch(
        token_kind=batch.token_kind, obs_feats=obs2, action_ids=batch.action_ids,
        rewards=rew2, target_ids=batch.target_ids, loss_mask=batch.loss_mask,
        traj_index=batch.traj_index, include_rewards=batch.include_rewards,
    )
    loss2 = model.loss(pb, training=False)
    loss2.backward()
    g2 = model.grads()
    assert set(g1) == set(g2)
    for k in g1:
        assert np.array_equal(g1[k], g2[k]), f"gradient changed through padding: {k}"
    model.zero_grads()


def test_dropout_rng_required_in_training(batch):
    model = init_model(tiny_cfg(dropout=0.2), 0)
    with pytest.raises(ModelContractError):
        model.forward(batch, training=True)


def test_end_to_end_gradient_check(records):
    """Finite differences through the full model in float64."""
    from tests.test_autograd import fd_check

    cfg = tiny_cfg(num_layers=1, d_model=16, num_heads=2, obs_embed_dim=8, context_len=32)
    model = init_model(cfg, 0)
    for p in model.params.values():
        p.data = p.data.astype(np.float64)
    pool = group_by_level(records)
    s = build_single_trajectory_sequence(pool, np.random.default_rng(2))
    batch = tokenize(s, False, 32)

    params = list(model.params.values())
    rng = np.random.default_rng(3)

    def build_loss():
        return model.loss(batch, training=False)

    fd_check(build_loss, params, rng, n_samples=25, richardson=True)
    model.zero_grads()
