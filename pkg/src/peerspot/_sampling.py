"""Vectorized Monte-Carlo samplers for per-object mechanism rewards.

Each sampler draws exactly the random quantities one reward realization
touches (quality, shared low draw, the involved agents' observations) instead
of materializing whole report matrices, so large trial counts stay cheap.
Draws stream from a single seeded generator in fixed-size chunks, which makes
estimates bit-reproducible for a given seed regardless of trial count.
"""

from __future__ import annotations

import numpy as np

from .errors import NonBinaryLabelSpace, NotEnoughObjects, ShapeMismatch, TooFewAgents
from .mechanisms import MechanismKind, MechanismSpec, UtilityEstimate
from .scoring import NEGATIVE_SENTINEL, divergence
from .signals import Environment
from .strategies import Strategy, StrategyProfile, belief_table

CHUNK = 20_000

# Cross-object holdout size per label for the double-mixed sampler; large
# enough that an all-labels-positive sample fails to be double mixed with
# negligible probability.
DOUBLE_MIXED_SAMPLES_PER_LABEL = 24


def _draw_rows(rng: np.random.Generator, matrix: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """One categorical draw per entry of ``rows`` from the matching matrix row."""
    cdf = np.cumsum(matrix, axis=1)
    u = rng.random(rows.shape[0])
    out = (u[:, None] > cdf[rows]).sum(axis=1)
    return np.minimum(out, matrix.shape[1] - 1)


def _draw_prior(rng: np.random.Generator, env: Environment, size: int) -> np.ndarray:
    cdf = np.cumsum(env.prior.as_array())
    u = rng.random(size)
    return np.minimum((u[:, None] > cdf[None, :]).sum(axis=1), len(cdf) - 1)


def _observe(
    rng: np.random.Generator,
    env: Environment,
    strategy: Strategy,
    q: np.ndarray,
    s_low: np.ndarray,
) -> np.ndarray:
    if strategy.is_full_effort:
        return _draw_rows(rng, env.high_channel.matrix(), q)
    return s_low.copy()


def _latents(rng, env, size):
    q = _draw_prior(rng, env, size)
    s_low = _draw_rows(rng, env.low_channel.matrix(), q)
    return q, s_low


class _Sampler:
    """Chunked reward sampler for one (mechanism, environment, profile) triple."""

    def __init__(self, spec: MechanismSpec, env: Environment, profile: StrategyProfile):
        self.spec = spec
        self.env = env
        self.base = profile.base
        self.focal = profile.focal_strategy()
        self.k = len(env.q_space)
        self.base_map = self.base.map_array()
        self.focal_map = self.focal.map_array()
        self.beliefs_base = belief_table(env, self.base, self.base)
        self.beliefs_focal = belief_table(env, self.focal, self.base)
        self.score_focal = spec.rule.score_table(self.beliefs_focal)  # (obs, outcome)

    # -- helpers ----------------------------------------------------------

    def _pair_reports(self, rng, size):
        q, s_low = _latents(rng, self.env, size)
        obs_i = _observe(rng, self.env, self.focal, q, s_low)
        obs_p = _observe(rng, self.env, self.base, q, s_low)
        return q, s_low, obs_i, obs_p

    # -- per-kind chunk evaluators ----------------------------------------

    def chunk(self, rng: np.random.Generator, size: int) -> np.ndarray:
        kind = self.spec.kind
        fn = {
            MechanismKind.OUTPUT_AGREEMENT: self._chunk_output_agreement,
            MechanismKind.PEER_TRUTH_SERUM: self._chunk_peer_truth_serum,
            MechanismKind.CORRELATED_AGREEMENT: self._chunk_correlated_agreement,
            MechanismKind.SQRT_SCALED_AGREEMENT: self._chunk_sqrt_scaled,
            MechanismKind.DOUBLE_MIXED_AGREEMENT: self._chunk_double_mixed,
            MechanismKind.ROBUST_BTS: self._chunk_robust_bts,
            MechanismKind.MULTI_VALUED_ROBUST_BTS: self._chunk_mv_robust_bts,
            MechanismKind.DIVERGENCE_BTS: self._chunk_divergence_bts,
            MechanismKind.MINIMUM_TRUTH_SERUM: self._chunk_minimum_truth_serum,
            MechanismKind.PEER_INSENSITIVE: self._chunk_peer_insensitive,
        }[kind]
        return fn(rng, size)

    def _chunk_peer_insensitive(self, rng, size):
        return np.full(size, self.spec.constant_reward)

    def _chunk_output_agreement(self, rng, size):
        _, _, obs_i, obs_p = self._pair_reports(rng, size)
        return (self.focal_map[obs_i] == self.base_map[obs_p]).astype(float)

    def _chunk_peer_truth_serum(self, rng, size):
        env, spec = self.env, self.spec
        n = env.n_agents
        if spec.pts_frequency == "object":
            q, s_low = _latents(rng, env, size)
            obs_i = _observe(rng, env, self.focal, q, s_low)
            r_i = self.focal_map[obs_i]
            if self.base.is_full_effort:
                peer_obs = np.stack(
                    [_draw_rows(rng, env.high_channel.matrix(), q) for _ in range(n - 1)], axis=1
                )
            else:
                peer_obs = np.repeat(s_low[:, None], n - 1, axis=1)
            peer_reports = self.base_map[peer_obs]
            r_peer = peer_reports[:, 0]  # exchangeable peers; first is a uniform choice
            counts = np.zeros((size, self.k))
            for c in range(n - 1):
                np.add.at(counts, (np.arange(size), peer_reports[:, c]), 1.0)
            np.add.at(counts, (np.arange(size), r_i), 1.0)
            freq = counts[np.arange(size), r_peer] / n
            return spec.alpha + spec.beta * (r_i == r_peer) / freq
        # Batch frequency: full report pool over n agents and m objects per trial.
        m = env.n_objects
        rewards = np.empty(size)
        for t in range(size):
            q, s_low = _latents(rng, env, m)
            reports = np.empty((n, m), dtype=int)
            reports[0] = self.focal_map[_observe(rng, env, self.focal, q, s_low)]
            for a in range(1, n):
                reports[a] = self.base_map[_observe(rng, env, self.base, q, s_low)]
            r_peer = reports[1, 0]
            freq = float(np.mean(reports == r_peer))
            rewards[t] = spec.alpha + spec.beta * float(reports[0, 0] == r_peer) / freq
        return rewards

    def _chunk_correlated_agreement(self, rng, size):
        env = self.env
        m = env.n_objects
        if m < 3:
            raise NotEnoughObjects(
                "correlated-agreement sampling needs at least three objects for disjoint task sets"
            )
        half = (m - 1) // 2
        other = m - 1 - half
        q0, s0 = _latents(rng, env, size)
        agree = (
            self.focal_map[_observe(rng, env, self.focal, q0, s0)]
            == self.base_map[_observe(rng, env, self.base, q0, s0)]
        ).astype(float)
        cross = np.zeros(size)
        own_counts = np.zeros((size, self.k))
        peer_counts = np.zeros((size, self.k))
        for _ in range(half):
            q, s_low = _latents(rng, env, size)
            r = self.focal_map[_observe(rng, env, self.focal, q, s_low)]
            np.add.at(own_counts, (np.arange(size), r), 1.0)
        for _ in range(other):
            q, s_low = _latents(rng, env, size)
            r = self.base_map[_observe(rng, env, self.base, q, s_low)]
            np.add.at(peer_counts, (np.arange(size), r), 1.0)
        cross = (own_counts / half * peer_counts / other).sum(axis=1)
        return agree - cross

    def _chunk_sqrt_scaled(self, rng, size):
        env = self.env
        if env.n_agents < 4:
            raise TooFewAgents("sqrt-scaled agreement sampling needs at least four agents")
        m = env.n_objects
        q0, s0 = _latents(rng, env, size)
        r_i = self.focal_map[_observe(rng, env, self.focal, q0, s0)]
        r_peer = self.base_map[_observe(rng, env, self.base, q0, s0)]
        hit_counts = np.zeros(size)
        # Scored object contributes to the scorers' frequency statistic too.
        rk1 = self.base_map[_observe(rng, env, self.base, q0, s0)]
        rk2 = self.base_map[_observe(rng, env, self.base, q0, s0)]
        hit_counts += (rk1 == r_peer) & (rk2 == r_peer)
        for _ in range(m - 1):
            q, s_low = _latents(rng, env, size)
            a = self.base_map[_observe(rng, env, self.base, q, s_low)]
            b = self.base_map[_observe(rng, env, self.base, q, s_low)]
            hit_counts += (a == r_peer) & (b == r_peer)
        f_hat = np.sqrt(hit_counts / m)
        live = (f_hat > 0.0) & (f_hat < 1.0)
        rewards = np.zeros(size)
        rewards[live] = (r_i[live] == r_peer[live]) * self.spec.scale / f_hat[live]
        return rewards

    def _chunk_double_mixed(self, rng, size):
        env = self.env
        if env.n_objects < 3:
            raise NotEnoughObjects("double-mixed agreement needs at least three objects")
        sample_size = max(
            DOUBLE_MIXED_SAMPLES_PER_LABEL * self.k,
            -(-env.n_objects // env.n_agents),  # ceil division
        )
        q0, s0 = _latents(rng, env, size)
        r_i = self.focal_map[_observe(rng, env, self.focal, q0, s0)]
        r_peer = self.base_map[_observe(rng, env, self.base, q0, s0)]
        # Holdout objects: one sampled base report each, plus a fresh reference
        # report from a different evaluator of the first two objects matching r_i.
        qs = _draw_prior(rng, env, size * sample_size).reshape(size, sample_size)
        sls = _draw_rows(rng, env.low_channel.matrix(), qs.ravel()).reshape(size, sample_size)
        if self.base.is_full_effort:
            obs = _draw_rows(rng, env.high_channel.matrix(), qs.ravel()).reshape(size, sample_size)
        else:
            obs = sls
        sample_reports = self.base_map[obs]
        counts = np.zeros((size, self.k), dtype=int)
        for lab in range(self.k):
            counts[:, lab] = (sample_reports == lab).sum(axis=1)
        double_mixed = counts.min(axis=1) >= 2
        # First two matching positions; i.i.d. objects make this equivalent to
        # a uniform choice among matches.
        match = sample_reports == r_i[:, None]
        first = match.argmax(axis=1)
        match_wo_first = match.copy()
        match_wo_first[np.arange(size), first] = False
        second = match_wo_first.argmax(axis=1)
        refs = []
        for pos in (first, second):
            qsel = qs[np.arange(size), pos]
            slsel = sls[np.arange(size), pos]
            ref_obs = _observe(rng, env, self.base, qsel, slsel)
            refs.append(self.base_map[ref_obs])
        rewards = 0.5 + (refs[0] == r_peer) - 0.5 * (refs[0] == refs[1])
        rewards[~double_mixed] = 0.0
        return rewards

    def _chunk_robust_bts(self, rng, size):
        if self.k != 2:
            raise NonBinaryLabelSpace("robust BTS is defined for binary label spaces only")
        env = self.env
        q, s_low = _latents(rng, env, size)
        obs_i = _observe(rng, env, self.focal, q, s_low)
        obs_j = _observe(rng, env, self.base, q, s_low)
        obs_k = _observe(rng, env, self.base, q, s_low)
        r_i = self.focal_map[obs_i]
        r_k = self.base_map[obs_k]
        p_one = self.beliefs_base[obs_j, 1]
        delta = np.minimum(p_one, 1.0 - p_one)
        shadow_one = np.where(r_i == 1, p_one + delta, p_one - delta)
        shadow = np.stack([1.0 - shadow_one, shadow_one], axis=1)
        shadow_scores = self.spec.rule.score_table(shadow)
        own = self.score_focal[obs_i, r_k]
        return shadow_scores[np.arange(size), r_k] + own

    def _chunk_mv_robust_bts(self, rng, size):
        _, _, obs_i, obs_j = self._pair_reports(rng, size)
        r_i = self.focal_map[obs_i]
        r_j = self.base_map[obs_j]
        b_j = self.beliefs_base[obs_j, r_i]
        match = np.zeros(size)
        hit = r_i == r_j
        match[hit & (b_j > 0.0)] = 1.0 / b_j[hit & (b_j > 0.0)]
        match[hit & (b_j <= 0.0)] = NEGATIVE_SENTINEL
        return match + self.score_focal[obs_i, r_j]

    def _chunk_divergence_bts(self, rng, size):
        _, _, obs_i, obs_j = self._pair_reports(rng, size)
        r_i = self.focal_map[obs_i]
        r_j = self.base_map[obs_j]
        div = np.array(
            [
                [divergence(self.spec.rule, self.beliefs_focal[a], self.beliefs_base[b]) for b in range(self.k)]
                for a in range(self.k)
            ]
        )
        penalty = (r_i == r_j) & (div[obs_i, obs_j] > self.spec.theta)
        return self.score_focal[obs_i, r_j] - penalty.astype(float)

    def _chunk_minimum_truth_serum(self, rng, size):
        env = self.env
        n_peers = env.n_agents - 1
        q, s_low = _latents(rng, env, size)
        obs_i = _observe(rng, env, self.focal, q, s_low)
        r_i = self.focal_map[obs_i]
        if self.base.is_full_effort:
            peer_obs = np.stack(
                [_draw_rows(rng, env.high_channel.matrix(), q) for _ in range(n_peers)], axis=1
            )
        else:
            peer_obs = np.repeat(s_low[:, None], n_peers, axis=1)
        peer_reports = self.base_map[peer_obs]
        freq = np.zeros((size, self.k))
        for c in range(n_peers):
            np.add.at(freq, (np.arange(size), peer_reports[:, c]), 1.0 / n_peers)
        mean_own = (freq * self.score_focal[obs_i]).sum(axis=1)
        delta = (freq > 0).sum(axis=1) == self.k  # every label reported at least once
        same_mask = peer_reports == r_i[:, None]
        same_count = same_mask.sum(axis=1)
        peer_beliefs = self.beliefs_base[peer_obs]  # (size, n_peers, k)
        proxy = np.einsum("tp,tpk->tk", same_mask.astype(float), peer_beliefs)
        safe = np.maximum(same_count, 1)[:, None]
        proxy = proxy / safe
        proxy_scores = self.spec.rule.score_table(proxy.reshape(-1, self.k)).reshape(size, self.k)
        mean_proxy = (freq * proxy_scores).sum(axis=1)
        rewards = np.where(delta, np.minimum(mean_own, mean_proxy), mean_own)
        if self.spec.mts_aggregation == "sum":
            rewards = rewards * n_peers
        return rewards


def simulate_utilities(
    spec: MechanismSpec,
    env: Environment,
    profile: StrategyProfile,
    trials: int,
    seed: int,
    include_effort_cost: bool = False,
) -> UtilityEstimate:
    """Sample mean and stderr of the focal agent's per-object reward; deterministic per seed."""
    if trials < 1:
        raise ShapeMismatch(f"trials must be at least 1, got {trials}")
    sampler = _Sampler(spec, env, profile)
    rng = np.random.default_rng(seed)
    chunks = []
    remaining = trials
    while remaining > 0:
        take = min(CHUNK, remaining)
        chunks.append(sampler.chunk(rng, take))
        remaining -= take
    rewards = np.concatenate(chunks)
    if include_effort_cost and profile.focal_strategy().is_full_effort:
        rewards = rewards - env.effort_cost
    mean = float(rewards.mean())
    stderr = float(rewards.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return UtilityEstimate(value=mean, stderr=stderr, method="monte_carlo", samples=trials)
