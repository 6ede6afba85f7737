"""Exact per-object expected rewards for a focal agent against a symmetric base profile.

Everything here integrates over the per-object joint law: quality ~ prior,
one shared low draw, independent high draws per agent given quality.  Reports
are deterministic functions of each agent's observed signal, so conditioning
on (quality, low draw) makes all agents' reports independent, and every
mechanism reduces to small tensor contractions over label indices.

Multi-object mechanisms are evaluated in their many-object limit, where
empirical report frequencies concentrate on population values: the
correlated-agreement cross term becomes a product of marginals, the
sqrt-scaled agreement denominator becomes the square root of the pairwise
agreement mass, and the double-mixed sample is mixed with probability one
iff every label has positive base-report mass.
"""

from __future__ import annotations

import math
from itertools import combinations_with_replacement

import numpy as np

from .errors import EnumerationBudgetExceeded, NonBinaryLabelSpace
from .scoring import NEGATIVE_SENTINEL, ScoringRule
from .signals import DEFAULT_ENUMERATION_BUDGET, Environment
from .strategies import Effort, Strategy, belief_table

SUPPORT_ATOL = 1e-12


def outer_weights(env: Environment) -> np.ndarray:
    """Joint mass of (quality, low draw), shape (k, k)."""
    return env.prior.as_array()[:, None] * env.low_channel.matrix()


def observation_law(env: Environment, effort: Effort) -> np.ndarray:
    """P(observed value | quality, low draw), shape (k, k, k)."""
    k = len(env.q_space)
    if effort is Effort.FULL:
        return np.broadcast_to(env.high_channel.matrix()[:, None, :], (k, k, k)).copy()
    law = np.zeros((k, k, k))
    law[:, np.arange(k), np.arange(k)] = 1.0
    return law


def map_onehot(strategy: Strategy, k: int) -> np.ndarray:
    onehot = np.zeros((k, k))
    onehot[np.arange(k), strategy.map_array()] = 1.0
    return onehot


def report_law(env: Environment, strategy: Strategy) -> np.ndarray:
    """P(report | quality, low draw), shape (k, k, k)."""
    k = len(env.q_space)
    obs = observation_law(env, strategy.effort)
    return np.einsum("qlo,or->qlr", obs, map_onehot(strategy, k))


def report_marginal(env: Environment, strategy: Strategy) -> np.ndarray:
    return np.einsum("ql,qlr->r", outer_weights(env), report_law(env, strategy))


def pair_obs_law(env: Environment, effort_a: Effort, effort_b: Effort) -> np.ndarray:
    """Joint law of two distinct agents' observations, shape (k_a, k_b).

    Conditional on (quality, low draw) the observations are independent;
    no-effort observations are the shared low draw itself.
    """
    w = outer_weights(env)
    oa = observation_law(env, effort_a)
    ob = observation_law(env, effort_b)
    return np.einsum("ql,qla,qlb->ab", w, oa, ob)


def triple_obs_law(env: Environment, effort_a: Effort, effort_b: Effort, effort_c: Effort) -> np.ndarray:
    w = outer_weights(env)
    oa = observation_law(env, effort_a)
    ob = observation_law(env, effort_b)
    oc = observation_law(env, effort_c)
    return np.einsum("ql,qla,qlb,qlc->abc", w, oa, ob, oc)


def _belief_vectors(env: Environment, strategy: Strategy, base: Strategy) -> np.ndarray:
    """Belief vector per observed value, honoring the strategy's belief mode."""
    return belief_table(env, strategy, base)


def _score_rows(rule: ScoringRule, beliefs: np.ndarray) -> np.ndarray:
    """score_rows[o, r] = score of the belief held after observation o when outcome r realizes."""
    return rule.score_table(beliefs)


# ---------------------------------------------------------------------------
# Per-mechanism evaluators.  Each returns E[z(deviant, base)] per object.
# ---------------------------------------------------------------------------


def value_output_agreement(env: Environment, base: Strategy, deviant: Strategy) -> float:
    w = outer_weights(env)
    return float(np.einsum("ql,qlr,qlr->", w, report_law(env, deviant), report_law(env, base)))


def value_peer_truth_serum(
    env: Environment, base: Strategy, deviant: Strategy, alpha: float, beta: float
) -> float:
    """Per-object frequency limit: agreement on label r pays beta / freq(r), and the
    realized frequency concentrates on the base profile's conditional report mass,
    so each supported label contributes exactly the deviant's mass on it."""
    w = outer_weights(env)
    support = (report_law(env, base) > SUPPORT_ATOL).astype(float)
    hit = float(np.einsum("ql,qlr,qlr->", w, report_law(env, deviant), support))
    return alpha + beta * hit


def value_correlated_agreement(env: Environment, base: Strategy, deviant: Strategy) -> float:
    agree = value_output_agreement(env, base, deviant)
    cross = float(report_marginal(env, deviant) @ report_marginal(env, base))
    return agree - cross


def value_sqrt_scaled_agreement(
    env: Environment, base: Strategy, deviant: Strategy, scale: float
) -> float:
    """Many-object limit: the frequency statistic for label s converges to
    sqrt(pairwise base agreement mass on s); degenerate labels (mass 0 or 1) pay zero."""
    w = outer_weights(env)
    rg = report_law(env, base)
    rd = report_law(env, deviant)
    pair_mass = np.einsum("ql,qls,qls->s", w, rg, rg)
    agree_mass = np.einsum("ql,qls,qls->s", w, rd, rg)
    live = (pair_mass > SUPPORT_ATOL) & (pair_mass < 1.0 - SUPPORT_ATOL)
    if not live.any():
        return 0.0
    return float(scale * np.sum(agree_mass[live] / np.sqrt(pair_mass[live])))


def value_double_mixed_agreement(env: Environment, base: Strategy, deviant: Strategy) -> float:
    """Many-object limit of the double-mixed sampling mechanism.

    The cross-object sample is double mixed with limiting probability one iff
    every label carries positive base-report mass; otherwise the reward is
    identically zero.  Conditional on the sample, the two reference reports are
    independent draws on objects whose sampled report equals the focal agent's
    report, i.e. draws from the base pair-conditional law.
    """
    w = outer_weights(env)
    rg = report_law(env, base)
    rd = report_law(env, deviant)
    marg_g = np.einsum("ql,qlr->r", w, rg)
    if np.min(marg_g) <= SUPPORT_ATOL:
        return 0.0
    pair_g = np.einsum("ql,qlv,qlx->vx", w, rg, rg)
    cond = pair_g / marg_g[:, None]  # cond[v, x] = P(second base report = x | first = v)
    joint_dg = np.einsum("ql,qlv,qly->vy", w, rd, rg)  # deviant report v, same-object peer y
    marg_d = joint_dg.sum(axis=1)
    match_peer = float(np.einsum("vy,vy->", joint_dg, cond))
    match_refs = float(marg_d @ np.einsum("vx,vx->v", cond, cond))
    return 0.5 + match_peer - 0.5 * match_refs


def value_robust_bts(
    env: Environment, base: Strategy, deviant: Strategy, rule: ScoringRule
) -> float:
    k = len(env.q_space)
    if k != 2:
        raise NonBinaryLabelSpace("robust BTS is defined for binary label spaces only")
    obs3 = triple_obs_law(env, deviant.effort, base.effort, base.effort)
    beliefs_base = _belief_vectors(env, base, base)
    beliefs_dev = _belief_vectors(env, deviant, base)
    score_dev = _score_rows(rule, beliefs_dev)
    base_map = base.map_array()
    dev_map = deviant.map_array()
    total = 0.0
    for oi in range(k):
        ri = dev_map[oi]
        for oj in range(k):
            p_one = beliefs_base[oj][1]
            delta = min(p_one, 1.0 - p_one)
            shadow_one = p_one + delta if ri == 1 else p_one - delta
            shadow = np.array([1.0 - shadow_one, shadow_one])
            shadow_scores = rule.score_table(shadow[None, :])[0]
            for ok in range(k):
                rk = base_map[ok]
                total += obs3[oi, oj, ok] * (shadow_scores[rk] + score_dev[oi, rk])
    return float(total)


def value_multi_valued_robust_bts(
    env: Environment, base: Strategy, deviant: Strategy, rule: ScoringRule
) -> float:
    k = len(env.q_space)
    pair = pair_obs_law(env, deviant.effort, base.effort)
    beliefs_base = _belief_vectors(env, base, base)
    score_dev = _score_rows(rule, _belief_vectors(env, deviant, base))
    base_map = base.map_array()
    dev_map = deviant.map_array()
    total = 0.0
    for oi in range(k):
        ri = dev_map[oi]
        for oj in range(k):
            rj = base_map[oj]
            if ri == rj:
                bj = beliefs_base[oj][ri]
                match = 1.0 / bj if bj > 0.0 else NEGATIVE_SENTINEL
            else:
                match = 0.0
            total += pair[oi, oj] * (match + score_dev[oi, rj])
    return float(total)


def value_divergence_bts(
    env: Environment, base: Strategy, deviant: Strategy, rule: ScoringRule, theta: float
) -> float:
    from .scoring import divergence

    k = len(env.q_space)
    pair = pair_obs_law(env, deviant.effort, base.effort)
    beliefs_base = _belief_vectors(env, base, base)
    beliefs_dev = _belief_vectors(env, deviant, base)
    score_dev = _score_rows(rule, beliefs_dev)
    base_map = base.map_array()
    dev_map = deviant.map_array()
    total = 0.0
    for oi in range(k):
        ri = dev_map[oi]
        for oj in range(k):
            rj = base_map[oj]
            penalty = 0.0
            if ri == rj and divergence(rule, beliefs_dev[oi], beliefs_base[oj]) > theta:
                penalty = 1.0
            total += pair[oi, oj] * (score_dev[oi, rj] - penalty)
    return float(total)


def _peer_multisets(env: Environment, base: Strategy, n_peers: int, budget: int):
    """Yield (counts per observed value, probability per quality) over peer observation multisets."""
    k = len(env.q_space)
    if base.is_full_effort:
        n_multisets = math.comb(n_peers + k - 1, k - 1)
        if n_multisets * (k**3) > budget:
            raise EnumerationBudgetExceeded(
                f"minimum-truth-serum enumeration needs {n_multisets} peer multisets"
            )
        high = env.high_channel.matrix()
        log_fact = [math.lgamma(i + 1) for i in range(n_peers + 1)]
        for combo in combinations_with_replacement(range(k), n_peers):
            counts = np.bincount(combo, minlength=k)
            coef = math.exp(log_fact[n_peers] - sum(log_fact[c] for c in counts))
            prob_q = coef * np.prod(high**counts, axis=1)  # (k_q,)
            yield counts, prob_q
    else:
        # All peers observe the shared low draw; the multiset is determined by it.
        for low_value in range(k):
            counts = np.zeros(k, dtype=int)
            counts[low_value] = n_peers
            yield counts, ("low", low_value)


def value_minimum_truth_serum(
    env: Environment,
    base: Strategy,
    deviant: Strategy,
    rule: ScoringRule,
    aggregation: str = "mean",
    budget: int = DEFAULT_ENUMERATION_BUDGET,
) -> float:
    """Belief scores against all peers, capped by the same-report proxy belief score.

    Peer reports enter only through their observation multiset, so full-effort
    base profiles are enumerated over multisets with multinomial weights.
    """
    k = len(env.q_space)
    n_peers = env.n_agents - 1
    w = outer_weights(env)
    obs_dev = observation_law(env, deviant.effort)
    beliefs_base = _belief_vectors(env, base, base)
    beliefs_dev = _belief_vectors(env, deviant, base)
    score_dev = _score_rows(rule, beliefs_dev)
    base_map = base.map_array()
    dev_map = deviant.map_array()
    scale = 1.0 if aggregation == "mean" else float(n_peers)

    total = 0.0
    for counts, prob_q in _peer_multisets(env, base, n_peers, budget):
        report_counts = np.zeros(k)
        np.add.at(report_counts, base_map, counts)
        peer_freq = report_counts / n_peers
        delta = report_counts.min()
        for oi in range(k):
            ri = dev_map[oi]
            mean_own = float(peer_freq @ score_dev[oi])
            if delta < 1:
                reward = mean_own
            else:
                same = counts * (base_map == ri)
                proxy = (same @ beliefs_base) / same.sum()
                mean_proxy = float(peer_freq @ rule.score_table(proxy[None, :])[0])
                reward = min(mean_own, mean_proxy)
            if isinstance(prob_q, tuple):
                low_value = prob_q[1]
                weight = float(w[:, low_value] @ obs_dev[:, low_value, oi])
            else:
                weight = float((prob_q[:, None] * w * obs_dev[:, :, oi]).sum())
            total += weight * reward * scale
    return float(total)
