"""Monte-Carlo estimators of the simultaneous gradient and game Jacobian.

Episodes are sampled in lock-step as arrays: ``actions[m, t, i]`` is the
action of player ``i`` at step ``t`` of episode ``m``. Every estimator is a
weighted mean over episodes of a per-episode term; the ``*_terms``
functions expose those terms so an estimator's exact expectation can be
computed by enumerating outcomes (see :func:`enumerate_batch`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from nohd import deriv
from nohd.errors import DimensionError, ParameterError
from nohd.gamecore import GameEval, block_slices


class MatrixGameEnv:
    """Repeated single-state matrix game.

    ``horizon`` stage games are played per episode (1 by default). Costs
    are drawn from the game's cost tables; the state is always 0.
    """

    n_states = 1

    def __init__(self, game, horizon: int = 1):
        if horizon < 1:
            raise ParameterError(f"horizon must be >= 1, got {horizon}")
        self.game = game
        self.horizon = int(horizon)
        self._t = 0

    @property
    def n_players(self) -> int:
        return len(self.game.block_sizes)

    @property
    def discounts(self) -> tuple[float, ...]:
        return tuple(getattr(self.game, "discounts", (0.0,) * self.n_players))

    def reset(self, seed=None) -> int:
        self._t = 0
        return 0

    def step(self, joint_action) -> tuple[int, np.ndarray, bool]:
        states, costs, done = self.step_batch(np.zeros(1, dtype=int), np.atleast_2d(joint_action),
                                              self._t)
        self._t += 1
        return int(states[0]), costs[0], bool(done[0])

    def reset_batch(self, m: int) -> np.ndarray:
        return np.zeros(m, dtype=int)

    def step_batch(self, states, actions, t: int):
        actions = np.asarray(actions, dtype=int)
        costs = np.stack([c[actions[:, 0], actions[:, 1]] for c in self.game.costs], axis=1)
        done = np.full(len(actions), t + 1 >= self.horizon)
        return np.zeros(len(actions), dtype=int), costs, done

    def action_probs(self, theta, state: int) -> list[np.ndarray]:
        return self.game.probabilities(theta)


@dataclass(frozen=True)
class Episode:
    states: np.ndarray
    actions: np.ndarray
    costs: np.ndarray

    def __post_init__(self):
        if not (len(self.states) == len(self.actions) == len(self.costs)):
            raise DimensionError("episode arrays have inconsistent lengths")
        if not np.all(np.isfinite(self.costs)):
            raise ParameterError("episode costs must be finite")

    @property
    def length(self) -> int:
        return len(self.states)


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    """``M`` episodes padded to a common length ``T``.

    ``mask[m, t]`` marks real steps. ``weights`` (summing to one) default to
    ``1 / M``; enumeration oracles use outcome probabilities instead.
    """

    theta: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    costs: np.ndarray
    mask: np.ndarray
    discounts: tuple[float, ...]
    weights: np.ndarray | None = None

    def __post_init__(self):
        m, t = self.states.shape
        if self.actions.shape[:2] != (m, t) or self.costs.shape[:2] != (m, t) or self.mask.shape != (m, t):
            raise DimensionError("batch arrays have inconsistent shapes")
        if m == 0:
            raise ParameterError("empty batch")
        if self.weights is None:
            object.__setattr__(self, "weights", np.full(m, 1.0 / m))

    @property
    def size(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.states.shape[1]

    @property
    def n_players(self) -> int:
        return self.actions.shape[2]

    def episode(self, m: int) -> Episode:
        keep = self.mask[m]
        return Episode(self.states[m, keep], self.actions[m, keep], self.costs[m, keep])


def sample_batch(env, theta, m: int, horizon: int, seed) -> TrajectoryBatch:
    """Sample ``m`` episodes of at most ``horizon`` steps under ``theta``.

    Deterministic given ``seed`` (an int or a ``numpy`` Generator).
    """
    if m < 1 or horizon < 1:
        raise ParameterError(f"need M >= 1 and T >= 1, got M={m}, T={horizon}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    theta = np.asarray(theta, dtype=float)
    n = env.n_players
    states = np.zeros((m, horizon), dtype=int)
    actions = np.zeros((m, horizon, n), dtype=int)
    costs = np.zeros((m, horizon, n))
    mask = np.zeros((m, horizon), dtype=bool)

    current = env.reset_batch(m)
    alive = np.ones(m, dtype=bool)
    for t in range(horizon):
        states[:, t] = current
        mask[:, t] = alive
        for s in np.unique(current):
            rows = current == s
            for i, p in enumerate(env.action_probs(theta, int(s))):
                u = rng.random(int(rows.sum()))
                cdf = np.cumsum(p)
                actions[rows, t, i] = np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"),
                                                 len(p) - 1)
        nxt, c, done = env.step_batch(current, actions[:, t], t)
        costs[:, t] = np.where(alive[:, None], c, 0.0)
        alive &= ~np.asarray(done, dtype=bool)
        current = nxt
        if not alive.any():
            states, actions, costs, mask = (a[:, :t + 1] for a in (states, actions, costs, mask))
            break
    return TrajectoryBatch(theta, states, actions, costs, mask, env.discounts)


def enumerate_batch(env, theta) -> TrajectoryBatch:
    """All joint outcomes of one stage game, weighted by their probability.

    Estimators evaluated on this batch return their exact expectation at
    horizon 1.
    """
    theta = np.asarray(theta, dtype=float)
    probs = env.action_probs(theta, 0)
    joint = np.array(list(itertools.product(*[range(len(p)) for p in probs])), dtype=int)
    weights = np.prod([probs[i][joint[:, i]] for i in range(len(probs))], axis=0)
    _, c, _ = env.step_batch(env.reset_batch(len(joint)), joint, 0)
    k = len(joint)
    return TrajectoryBatch(theta, np.zeros((k, 1), dtype=int), joint[:, None, :], c[:, None, :],
                           np.ones((k, 1), dtype=bool), env.discounts, weights)


# score tables -----------------------------------------------------------------


@dataclass
class _Scores:
    """Per-step ``grad log pi`` and ``hess log pi`` for every player."""

    grads: list[np.ndarray]       # player k: (M, T, d_k)
    hessians: list[np.ndarray]    # player k: (M, T, d_k, d_k)


def _scores(game, batch: TrajectoryBatch) -> _Scores:
    slices = block_slices(game.block_sizes)
    grads, hessians = [], []
    for k, s in enumerate(slices):
        theta_k = batch.theta[s]
        d = theta_k.size
        g = np.zeros(batch.states.shape + (d,))
        h = np.zeros(batch.states.shape + (d, d))
        pairs = np.stack([batch.states, batch.actions[:, :, k]], axis=-1)
        for state, action in np.unique(pairs[batch.mask], axis=0):
            _, dg, dh = deriv.grad_hess(
                lambda x: game.log_prob(k, x, int(state), int(action)), theta_k)
            rows = batch.mask & (pairs[..., 0] == state) & (pairs[..., 1] == action)
            g[rows] = dg
            h[rows] = dh
        grads.append(g)
        hessians.append(h)
    return _Scores(grads, hessians)


def _discounted_costs(batch: TrajectoryBatch, i: int) -> np.ndarray:
    gamma = batch.discounts[i] if i < len(batch.discounts) else 0.0
    powers = np.array([1.0 if t == 0 else gamma ** t for t in range(batch.horizon)])
    return batch.costs[:, :, i] * powers * batch.mask


# per-episode terms ------------------------------------------------------------


def grad_terms(game, batch: TrajectoryBatch, i: int, k: int | None = None,
               scores: _Scores | None = None) -> np.ndarray:
    """``sum_t gamma^t C^i_t sum_{t' <= t} grad log pi_k`` per episode, shape ``(M, d_k)``."""
    k = i if k is None else k
    scores = scores or _scores(game, batch)
    w = _discounted_costs(batch, i)
    return np.einsum("mt,mtd->md", w, np.cumsum(scores.grads[k], axis=1))


def cross_hess_terms(game, batch: TrajectoryBatch, i: int, k: int, j: int,
                     scores: _Scores | None = None) -> np.ndarray:
    """``sum_t gamma^t C^i_t sum_{t' <= t} s_k(t') s_j(t')^T`` per episode."""
    if k == j:
        raise ParameterError("cross-Hessian estimator needs two different players (k != j); "
                             "use diag_hess_estimate for k == j")
    scores = scores or _scores(game, batch)
    w = _discounted_costs(batch, i)
    outer = np.einsum("mta,mtb->mtab", scores.grads[k], scores.grads[j])
    return np.einsum("mt,mtab->mab", w, np.cumsum(outer, axis=1))


def diag_hess_terms(game, batch: TrajectoryBatch, i: int, k: int,
                    scores: _Scores | None = None) -> np.ndarray:
    """``grad Phi grad log pi_k(tau)^T + hess Phi`` per episode.

    ``Phi = sum_t gamma^t C^i_t sum_{t' <= t} log pi_k(x_t', u^k_t')``, a
    scalar function of ``theta_k``.
    """
    scores = scores or _scores(game, batch)
    w = _discounted_costs(batch, i)
    grad_phi = np.einsum("mt,mtd->md", w, np.cumsum(scores.grads[k], axis=1))
    hess_phi = np.einsum("mt,mtab->mab", w, np.cumsum(scores.hessians[k], axis=1))
    traj_score = scores.grads[k].sum(axis=1)
    return np.einsum("ma,mb->mab", grad_phi, traj_score) + hess_phi


def _mean(terms: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return np.tensordot(weights, terms, axes=1)


def _stderr(terms: np.ndarray, weights: np.ndarray) -> np.ndarray:
    mean = _mean(terms, weights)
    var = _mean((terms - mean) ** 2, weights)
    eff_n = 1.0 / float(weights @ weights)
    return np.sqrt(var / eff_n)


# estimators -------------------------------------------------------------------


def grad_estimate(game, batch: TrajectoryBatch, i: int, k: int | None = None) -> np.ndarray:
    """Estimate of ``grad_{theta_k} V_i`` (``k`` defaults to ``i``)."""
    return _mean(grad_terms(game, batch, i, k), batch.weights)


def cross_hess_estimate(game, batch: TrajectoryBatch, i: int, k: int, j: int) -> np.ndarray:
    """Estimate of the mixed block ``grad_{theta_k} grad_{theta_j}^T V_i``, ``k != j``."""
    return _mean(cross_hess_terms(game, batch, i, k, j), batch.weights)


def diag_hess_estimate(game, batch: TrajectoryBatch, i: int, k: int) -> np.ndarray:
    """Estimate of ``hess_{theta_k} V_i``."""
    return _mean(diag_hess_terms(game, batch, i, k), batch.weights)


@dataclass(frozen=True)
class JacobianEstimate:
    """Estimated game quantities plus per-block standard errors.

    ``grad_stderr[i]`` matches ``full_grads[i]``; ``jacobian_stderr``
    matches ``jacobian``.
    """

    evaluation: GameEval
    grad_stderr: np.ndarray
    jacobian_stderr: np.ndarray

    @property
    def sim_grad(self) -> np.ndarray:
        return self.evaluation.sim_grad

    @property
    def jacobian(self) -> np.ndarray:
        return self.evaluation.jacobian


def jacobian_estimate(game, batch: TrajectoryBatch) -> JacobianEstimate:
    """Estimate ``xi``, the full gradient table and the game Jacobian.

    Row block ``i`` of the Jacobian is ``grad_{theta_i} grad_theta V_i``:
    its diagonal block comes from the single-player estimator and the
    others from the cross estimator. No symmetrization is applied.
    """
    sizes = tuple(game.block_sizes)
    if batch.n_players != len(sizes):
        raise DimensionError(f"batch has {batch.n_players} players, game has {len(sizes)}")
    slices = block_slices(sizes)
    n = sum(sizes)
    w = batch.weights
    scores = _scores(game, batch)

    full_grads = np.zeros((len(sizes), n))
    grad_se = np.zeros((len(sizes), n))
    jac = np.zeros((n, n))
    jac_se = np.zeros((n, n))
    values = np.array([float(w @ _discounted_costs(batch, i).sum(axis=1)) for i in range(len(sizes))])
    for i, si in enumerate(slices):
        for k, sk in enumerate(slices):
            terms = grad_terms(game, batch, i, k, scores)
            full_grads[i, sk] = _mean(terms, w)
            grad_se[i, sk] = _stderr(terms, w)
        for j, sj in enumerate(slices):
            if j == i:
                terms = diag_hess_terms(game, batch, i, i, scores)
            else:
                terms = cross_hess_terms(game, batch, i, i, j, scores)
            jac[si, sj] = _mean(terms, w)
            jac_se[si, sj] = _stderr(terms, w)

    sim = np.concatenate([full_grads[i, s] for i, s in enumerate(slices)])
    ev = GameEval(batch.theta.copy(), sizes, values, full_grads, sim, jac)
    return JacobianEstimate(ev, grad_se, jac_se)


def sampled_evaluator(game, m: int, horizon: int = 1, seed=0):
    """``evaluator(theta, t)`` for :func:`nohd.optim.run` backed by fresh batches.

    Batch ``t`` is drawn from an independent stream spawned from ``seed``,
    so a run is reproducible regardless of how many steps it takes.
    """
    env = MatrixGameEnv(game, horizon)
    root = np.random.SeedSequence(seed)

    def evaluator(theta, t):
        child = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(t,)))
        batch = sample_batch(env, theta, m, horizon, child)
        return jacobian_estimate(game, batch).evaluation

    return evaluator
