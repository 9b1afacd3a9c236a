from __future__ import annotations

import numpy as np
import pytest

from gridtext.env.types import ActionSpace
from gridtext.policy.backends import ActionHeadsBackend, TokenScorerBackend
from gridtext.policy.distribution import (
    Normalization,
    PolicyConfig,
    ScoringMode,
    make_candidates,
)
from gridtext.policy.vocab import build_vocabulary
from gridtext.text.lexicon import build_actions, default_lexicon
from gridtext.training.losses import (
    LossBatch,
    PPOConfig,
    bc_grad,
    bc_loss,
    normalize_advantages,
    ppo_grad,
    ppo_loss,
)
from gridtext.training.optim import Adam, AdamConfig, clip_grad_norm

LEX = default_lexicon()
VOCAB = build_vocabulary(LEX)
ACTIONS = build_actions(LEX, ActionSpace.CANONICAL)
CANDIDATES = make_candidates(ACTIONS, VOCAB)

PROMPTS = [
    "Possible action of the agent: turn left, turn right, go forward, pick up, drop, toggle\n"
    f"Goal of the agent: go to the {c} ball\n"
    f"Obs. 0: You see a {c} ball {k} steps left, You see a wall 3 steps forward\n"
    "Action 0:"
    for c, k in [("red", 2), ("blue", 3), ("green", 4), ("grey", 2), ("purple", 3)]
]


def fresh_backend(mode: ScoringMode, seed: int = 2):
    if mode is ScoringMode.ACTION_HEADS:
        return ActionHeadsBackend(
            VOCAB, num_actions=6, embed_dim=6, hidden_dim=10, value_hidden_dim=6, seed=seed
        )
    return TokenScorerBackend(
        VOCAB, embed_dim=6, hidden_dim=10, value_hidden_dim=6, seed=seed
    )


def random_batch(rng: np.random.Generator, backend, n=6, coherent_old=False):
    idx = rng.integers(0, len(PROMPTS), size=n)
    prompts = [PROMPTS[i] for i in idx]
    actions = rng.integers(0, 6, size=n)
    if coherent_old:
        from gridtext.policy.backends import log_policy_from_scores
        import torch

        with torch.no_grad():
            scores, _ = backend.scoring_graph(prompts, [CANDIDATES] * n)
            log_pi = log_policy_from_scores(
                scores, backend.mode, Normalization.MAX_TEMPERATURE
            ).numpy()
        old = log_pi[np.arange(n), actions]
    else:
        old = rng.uniform(-3.0, -0.5, size=n)
    return LossBatch(
        prompts=prompts,
        candidates=[CANDIDATES] * n,
        action_indices=actions,
        old_logprobs=old,
        advantages=rng.normal(scale=2.0, size=n),
        returns=rng.normal(scale=3.0, size=n),
    )


def finite_difference_check(loss_fn, backend, grad, rel_tol=1e-4, eps=1e-4, n_dirs=4, seed=0):
    """Directional central differences in float64 against the analytic gradient."""
    rng = np.random.default_rng(seed)
    x0 = backend.parameters()
    checked = 0
    for _ in range(n_dirs):
        direction = rng.normal(size=x0.size)
        direction /= np.linalg.norm(direction)
        backend.set_parameters(x0 + eps * direction)
        f_plus = loss_fn()
        backend.set_parameters(x0 - eps * direction)
        f_minus = loss_fn()
        backend.set_parameters(x0)
        fd = (f_plus - f_minus) / (2 * eps)
        analytic = float(grad @ direction)
        scale = max(abs(fd), abs(analytic), 1e-8)
        assert abs(fd - analytic) / scale < rel_tol, (fd, analytic)
        checked += 1
    assert checked == n_dirs


class TestPPOLoss:
    def test_zero_advantage_first_epoch_policy_gradient_is_zero(self):
        backend = fresh_backend(ScoringMode.ACTION_HEADS)
        rng = np.random.default_rng(3)
        batch = random_batch(rng, backend, coherent_old=True)
        batch.advantages = np.zeros(len(batch))
        batch.returns = np.array(
            [backend.value(p) for p in batch.prompts]
        )  # zero value loss too
        config = PPOConfig(entropy_coef=0.0, vf_coef=0.5, advantage_normalization=False)
        stats, grad = ppo_grad(
            batch, backend, config, PolicyConfig(mode=backend.mode), normalize=False
        )
        assert stats.policy_loss == pytest.approx(0.0, abs=1e-12)
        assert np.linalg.norm(grad) == pytest.approx(0.0, abs=1e-9)

    def test_clip_selects_bounded_term(self):
        # ratio 1.5 with eps 0.2 and A=1 contributes the clipped 1.2 surrogate
        backend = fresh_backend(ScoringMode.ACTION_HEADS)
        batch = random_batch(np.random.default_rng(5), backend, n=1, coherent_old=True)
        batch.advantages = np.array([1.0])
        batch.old_logprobs = batch.old_logprobs - np.log(1.5)  # new/old = 1.5
        config = PPOConfig(entropy_coef=0.0, vf_coef=0.0, advantage_normalization=False)
        stats = ppo_loss(batch, backend, config, PolicyConfig(mode=backend.mode), normalize=False)
        assert stats.policy_loss == pytest.approx(-1.2, abs=1e-9)

    def test_clip_bound_property(self):
        # The clipped surrogate can never reward a sample by more than
        # (1+eps)*|A|; the pessimistic branch is unbounded by construction.
        rng = np.random.default_rng(7)
        backend = fresh_backend(ScoringMode.ACTION_HEADS)
        config = PPOConfig(entropy_coef=0.0, vf_coef=0.0, advantage_normalization=False)
        for _ in range(50):
            batch = random_batch(rng, backend, n=1)
            stats = ppo_loss(
                batch, backend, config, PolicyConfig(mode=backend.mode), normalize=False
            )
            surrogate = -stats.policy_loss
            assert surrogate <= (1 + config.clip_eps) * abs(batch.advantages[0]) + 1e-9

    def test_advantage_normalization(self):
        adv = np.array([1.0, 2.0, 3.0, 10.0])
        normed = normalize_advantages(adv)
        assert normed.mean() == pytest.approx(0.0, abs=1e-12)
        assert normed.std() == pytest.approx(1.0, rel=1e-6)

    def test_non_finite_loss_raises(self):
        backend = fresh_backend(ScoringMode.ACTION_HEADS)
        batch = random_batch(np.random.default_rng(11), backend)
        batch.advantages = np.array([np.inf] * len(batch))
        with pytest.raises(FloatingPointError):
            ppo_loss(
                batch,
                backend,
                PPOConfig(advantage_normalization=False),
                PolicyConfig(mode=backend.mode),
                normalize=False,
            )


class TestGradientChecks:
    @pytest.mark.parametrize("mode", [ScoringMode.TOKEN_SCORING, ScoringMode.ACTION_HEADS])
    @pytest.mark.parametrize("normalization", [Normalization.RENORMALIZE, Normalization.MAX_TEMPERATURE])
    @pytest.mark.parametrize("case", range(5))
    def test_ppo_gradient_matches_finite_differences(self, mode, normalization, case):
        backend = fresh_backend(mode, seed=case + 1)
        policy_config = PolicyConfig(normalization=normalization, mode=mode)
        config = PPOConfig(advantage_normalization=False)
        rng = np.random.default_rng(100 + case)
        batch = random_batch(rng, backend, n=5)
        _, grad = ppo_grad(batch, backend, config, policy_config, normalize=False)

        def loss_fn():
            return ppo_loss(batch, backend, config, policy_config, normalize=False).total

        finite_difference_check(loss_fn, backend, grad, seed=case)

    @pytest.mark.parametrize("mode", [ScoringMode.TOKEN_SCORING, ScoringMode.ACTION_HEADS])
    @pytest.mark.parametrize("case", range(3))
    def test_bc_gradient_matches_finite_differences(self, mode, case):
        backend = fresh_backend(mode, seed=10 + case)
        rng = np.random.default_rng(200 + case)
        n = 5
        prompts = [PROMPTS[i] for i in rng.integers(0, len(PROMPTS), size=n)]
        cands = [CANDIDATES] * n
        labels = rng.integers(0, 6, size=n)
        _, grad = bc_grad(prompts, cands, labels, backend)

        def loss_fn():
            return bc_loss(prompts, cands, labels, backend)

        finite_difference_check(loss_fn, backend, grad, seed=case)


class TestOptim:
    def test_clip_grad_norm(self):
        grad = np.array([3.0, 4.0])
        clipped, norm = clip_grad_norm(grad, 0.5)
        assert norm == pytest.approx(5.0)
        assert np.linalg.norm(clipped) == pytest.approx(0.5, abs=1e-12)
        small = np.array([0.1, 0.0])
        same, _ = clip_grad_norm(small, 0.5)
        assert np.array_equal(same, small)

    def test_adam_matches_reference_formulas(self):
        # one步 from zero state: update = lr * g / (|g| + eps) elementwise
        adam = Adam(3, lr=0.1, config=AdamConfig(eps=1e-5))
        params = np.zeros(3)
        grad = np.array([1.0, -2.0, 0.5])
        new = adam.step(params, grad)
        expected = -0.1 * grad / (np.abs(grad) + 1e-5)
        assert new == pytest.approx(expected, rel=1e-9)

    def test_adam_state_roundtrip(self):
        adam = Adam(4, lr=0.01)
        params = np.ones(4)
        rng = np.random.default_rng(0)
        for _ in range(5):
            params = adam.step(params, rng.normal(size=4))
        twin = Adam.from_state(adam.state_dict())
        g = rng.normal(size=4)
        assert np.array_equal(adam.step(params, g), twin.step(params, g))

    def test_adam_config_validation(self):
        with pytest.raises(ValueError):
            AdamConfig(beta1=1.5)
