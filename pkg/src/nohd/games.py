"""Concrete games: two-player matrix games and closed-form analytic games.

Matrix games store *costs* (players minimize); payoff tables are negated
when a game is built from them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from nohd import deriv
from nohd.errors import ConfigError, DomainExitError, ParameterError
from nohd.gamecore import block_slices


class Parametrization(enum.Enum):
    LINEAR = "linear"
    BOLTZMANN = "boltzmann"

    @classmethod
    def parse(cls, value) -> "Parametrization":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError(f"unknown parametrization {value!r}") from None


@dataclass(frozen=True, eq=False)
class MatrixGame:
    """Two-player one-shot game with mixed strategies.

    ``costs[i][a, b]`` is player ``i``'s cost when player 1 plays ``a`` and
    player 2 plays ``b``. Under the Boltzmann parametrization each player
    has one logit per action; under the linear one, the first ``k - 1``
    action probabilities are the parameters and the last is implied.
    """

    name: str
    costs: tuple[np.ndarray, np.ndarray]
    parametrization: Parametrization = Parametrization.BOLTZMANN
    discounts: tuple[float, float] = (0.0, 0.0)
    _stacked: np.ndarray = field(init=False, repr=False)
    _slices: list = field(init=False, repr=False)

    def __post_init__(self):
        costs = tuple(np.asarray(c, dtype=float) for c in self.costs)
        if len(costs) != 2 or costs[0].ndim != 2 or costs[0].shape != costs[1].shape:
            raise ConfigError("need two cost matrices of identical 2-d shape")
        if not all(np.all(np.isfinite(c)) for c in costs):
            raise ConfigError("cost tables must be finite")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "parametrization", Parametrization.parse(self.parametrization))
        object.__setattr__(self, "discounts", tuple(float(g) for g in self.discounts))
        object.__setattr__(self, "_stacked", np.stack(costs))
        object.__setattr__(self, "_slices", block_slices(self.block_sizes))

    @classmethod
    def from_payoffs(cls, name, payoffs, parametrization=Parametrization.BOLTZMANN,
                     discounts=(0.0, 0.0)) -> "MatrixGame":
        return cls(name, tuple(-np.asarray(p, dtype=float) for p in payoffs),
                   parametrization, discounts)

    def with_parametrization(self, parametrization) -> "MatrixGame":
        return MatrixGame(self.name, self.costs, Parametrization.parse(parametrization),
                          self.discounts)

    @property
    def n_players(self) -> int:
        return 2

    @property
    def actions(self) -> tuple[int, int]:
        return self.costs[0].shape

    @property
    def block_sizes(self) -> tuple[int, ...]:
        if self.parametrization is Parametrization.BOLTZMANN:
            return tuple(self.actions)
        return tuple(k - 1 for k in self.actions)

    # policies -----------------------------------------------------------------

    def policy(self, i: int, theta_i):
        """Action distribution of player ``i``; accepts arrays or ``Dual2``."""
        if self.parametrization is Parametrization.BOLTZMANN:
            return deriv.softmax(theta_i)
        last = 1.0 - deriv.total(theta_i)
        last = last.reshape(1) if isinstance(last, deriv.Dual2) else np.atleast_1d(last)
        probs = deriv.concatenate([theta_i, last])
        p = deriv.value_of(probs)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise DomainExitError(
                f"player {i + 1} probabilities {np.round(p, 6).tolist()} left the open simplex")
        return probs

    def log_prob(self, i: int, theta_i, state, action: int):
        """``log pi_i(action | state)``; the state is ignored (single state)."""
        if self.parametrization is Parametrization.BOLTZMANN:
            return deriv.log_softmax(theta_i)[action]
        return deriv.log(self.policy(i, theta_i)[action])

    def probabilities(self, theta) -> list[np.ndarray]:
        theta = np.asarray(theta, dtype=float)
        return [np.asarray(self.policy(i, theta[s]), dtype=float)
                for i, s in enumerate(self._slices)]

    def theta_from_probabilities(self, probs) -> np.ndarray:
        """Parameters reproducing the given mixed strategies.

        Boltzmann logits are set to ``log p`` (softmax is shift invariant,
        this fixes the gauge).
        """
        blocks = []
        for i, p in enumerate(probs):
            p = np.asarray(p, dtype=float)
            if p.shape != (self.actions[i],) or np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
                raise ParameterError(f"player {i + 1}: invalid distribution {p.tolist()}")
            if self.parametrization is Parametrization.BOLTZMANN:
                blocks.append(np.log(p))
            else:
                blocks.append(p[:-1])
        return np.concatenate(blocks)

    # costs --------------------------------------------------------------------

    def values(self, theta):
        s1, s2 = self._slices
        p1 = self.policy(0, theta[s1])
        p2 = self.policy(1, theta[s2])
        return (p1 * (self._stacked @ p2)).sum(axis=1)

    def expected_cost(self, theta, i: int) -> float:
        return float(deriv.value_of(self.values(np.asarray(theta, dtype=float)))[i])

    def nash_reference(self) -> list[np.ndarray]:
        return nash_reference(self)


# built-in games ---------------------------------------------------------------

MATCHING_PENNIES_PAYOFFS = (
    [[1.0, -1.0], [-1.0, 1.0]],
    [[-1.0, 1.0], [1.0, -1.0]],
)
DILEMMA_PAYOFFS = (
    [[-1.0, -3.0], [0.0, -2.0]],
    [[-1.0, 0.0], [-3.0, -2.0]],
)
# Zero-sum: the (Rock, Paper) cell is (-1, 1).
RPS_PAYOFFS = (
    [[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]],
    [[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]],
)

_BUILTINS = {
    "mp": ("matching_pennies", MATCHING_PENNIES_PAYOFFS),
    "rps": ("rock_paper_scissors", RPS_PAYOFFS),
    "dilemma": ("dilemma", DILEMMA_PAYOFFS),
}
_ALIASES = {
    "matching_pennies": "mp", "matching-pennies": "mp", "matchingpennies": "mp",
    "rock_paper_scissors": "rps", "rock-paper-scissors": "rps",
    "prisoners_dilemma": "dilemma", "pd": "dilemma",
}

# Starting strategies used in the reference experiments.
DEFAULT_STARTS = {
    "mp": ([0.86, 0.14], [0.14, 0.86]),
    "rps": ([0.66, 0.24, 0.1], [0.66, 0.24, 0.1]),
    "dilemma": ([0.5, 0.5], [0.5, 0.5]),
}


def canonical_name(name: str) -> str:
    key = str(name).lower()
    key = _ALIASES.get(key, key)
    if key not in _BUILTINS:
        raise ConfigError(f"unknown built-in game {name!r}; choose from {sorted(_BUILTINS)}")
    return key


def builtin_game(name: str, parametrization=Parametrization.BOLTZMANN) -> MatrixGame:
    key = canonical_name(name)
    _, payoffs = _BUILTINS[key]
    return MatrixGame.from_payoffs(key, payoffs, parametrization)


def matching_pennies(parametrization=Parametrization.BOLTZMANN) -> MatrixGame:
    return builtin_game("mp", parametrization)


def rock_paper_scissors(parametrization=Parametrization.BOLTZMANN) -> MatrixGame:
    return builtin_game("rps", parametrization)


def dilemma(parametrization=Parametrization.BOLTZMANN) -> MatrixGame:
    return builtin_game("dilemma", parametrization)


def pure_equilibria(game: MatrixGame) -> list[tuple[int, int]]:
    """All pure-strategy Nash equilibria, by best-response enumeration."""
    c1, c2 = game.costs
    found = []
    for a in range(c1.shape[0]):
        for b in range(c1.shape[1]):
            if c1[a, b] <= c1[:, b].min() and c2[a, b] <= c2[a, :].min():
                found.append((a, b))
    return found


def nash_reference(game: MatrixGame) -> list[np.ndarray]:
    """Reference equilibrium strategies.

    Matching pennies and rock-paper-scissors have the uniform mixed
    equilibrium. Any other game needs a unique pure equilibrium (the
    dilemma has one).
    """
    try:
        key = canonical_name(game.name)
    except ConfigError:
        key = None
    k1, k2 = game.actions
    if key in ("mp", "rps"):
        return [np.full(k1, 1.0 / k1), np.full(k2, 1.0 / k2)]
    pure = pure_equilibria(game)
    if len(pure) != 1:
        raise ConfigError(f"no reference equilibrium for game {game.name!r} "
                          f"({len(pure)} pure equilibria)")
    (a, b), = pure
    return [np.eye(k1)[a], np.eye(k2)[b]]


# analytic games ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AnalyticGame:
    """Closed-form game; ``potential`` is set for exact potential games."""

    kind: str
    block_sizes: tuple[int, ...]
    value_fn: Callable
    potential_fn: Callable | None = None
    equilibrium: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def values(self, theta):
        return self.value_fn(theta)

    def potential(self, theta):
        if self.potential_fn is None:
            raise AttributeError(f"{self.kind} game has no potential function")
        return self.potential_fn(theta)


def make_analytic(kind: str, **params) -> AnalyticGame:
    """Build one of the analytic test games.

    ``bilinear``
        ``V1 = th1^T M th2 + b1^T th1``, ``V2 = -th1^T M th2 + b2^T th2``;
        ``coupling`` (M, default ``[[1]]``), ``offsets`` ``(b1, b2)``.
    ``quadratic_potential``
        Both players minimize ``phi = th^T Q th / 2 + c^T th``; ``Q``
        (default identity), ``c``, ``block_sizes`` (default ``(1, 1)``).
    ``perturbed_hamiltonian``
        ``V1 = th1 th2 + eps th1^3``, ``V2 = -th1 th2 + eps th2^3``
        (scalar players, ``eps`` default 0.05). The equilibrium at the
        origin has zero symmetric part, so Hamiltonian Newton steps
        converge quadratically without terminating in finitely many steps.
    """
    if kind == "bilinear":
        m = np.atleast_2d(np.asarray(params.get("coupling", [[1.0]]), dtype=float))
        d1, d2 = m.shape
        b1, b2 = (np.zeros(d1), np.zeros(d2))
        if "offsets" in params:
            b1, b2 = (np.asarray(b, dtype=float).reshape(-1) for b in params["offsets"])

        def values(theta):
            t1, t2 = theta[:d1], theta[d1:]
            coupling = t1 @ (m @ t2)
            return deriv.stack([coupling + t1 @ b1, -coupling + t2 @ b2])

        eq = None
        if d1 == d2 and abs(np.linalg.det(m)) > 1e-12:
            eq = np.concatenate([np.linalg.solve(m.T, b2), -np.linalg.solve(m, b1)])
        return AnalyticGame(kind, (d1, d2), values, None, eq, dict(params))

    if kind == "quadratic_potential":
        sizes = tuple(params.get("block_sizes", (1, 1)))
        n = sum(sizes)
        q = np.asarray(params.get("Q", np.eye(n)), dtype=float)
        q = 0.5 * (q + q.T)
        c = np.asarray(params.get("c", np.zeros(n)), dtype=float)

        def potential(theta):
            return 0.5 * (theta @ (q @ theta)) + theta @ c

        def values(theta):
            phi = potential(theta)
            return deriv.stack([phi] * len(sizes))

        eq = np.linalg.solve(q, -c) if abs(np.linalg.det(q)) > 1e-12 else None
        return AnalyticGame(kind, sizes, values, potential, eq, dict(params))

    if kind == "perturbed_hamiltonian":
        eps = float(params.get("eps", 0.05))

        def values(theta):
            t1, t2 = theta[0], theta[1]
            return deriv.stack([t1 * t2 + eps * t1 * t1 * t1,
                                -(t1 * t2) + eps * t2 * t2 * t2])

        return AnalyticGame(kind, (1, 1), values, None, np.zeros(2), {"eps": eps})

    raise ParameterError(f"unknown analytic game kind {kind!r}")


def random_game(dim: int, seed: int = 0, n_players: int = 2) -> AnalyticGame:
    """Smooth general-sum game with a dense Jacobian, for timing.

    ``V_i = th^T Q_i th / 2 + w_i^T tanh(U th)`` with random ``Q_i``, ``U``
    and ``w_i``; every player's cost depends on every parameter.
    """
    if dim % n_players:
        raise ParameterError(f"dim {dim} not divisible by {n_players} players")
    rng = np.random.default_rng(seed)
    qs = []
    for _ in range(n_players):
        a = rng.normal(size=(dim, dim)) / np.sqrt(dim)
        qs.append(a + a.T)
    u = rng.normal(size=(dim, dim)) / np.sqrt(dim)
    ws = rng.normal(size=(n_players, dim))

    def values(theta):
        hidden = deriv.tanh(u @ theta)
        return deriv.stack([0.5 * (theta @ (q @ theta)) + hidden @ w for q, w in zip(qs, ws)])

    sizes = (dim // n_players,) * n_players
    return AnalyticGame("synthetic", sizes, values, None, None, {"dim": dim, "seed": seed})


# game definition files -------------------------------------------------------


def _require(doc, key, path):
    if key not in doc:
        raise ConfigError(f"{path}: missing field '{key}'")
    return doc[key]


def game_from_mapping(doc: dict, source: str = "<game>") -> tuple[MatrixGame, np.ndarray | None]:
    """Build a game (and optional initial parameters) from a parsed mapping.

    Fields: ``name``, ``actions`` (``[k1, k2]``), ``payoffs`` (two
    row-major lists) or ``costs``, ``parametrization``, ``discounts``,
    and optionally ``initial_probabilities`` or ``initial_theta``.
    """
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: expected a mapping at top level")
    name = str(doc.get("name", "custom"))
    actions = _require(doc, "actions", source)
    if not (isinstance(actions, list) and len(actions) == 2
            and all(isinstance(k, int) and k >= 2 for k in actions)):
        raise ConfigError(f"{source}: field 'actions' must be two integers >= 2")
    if ("payoffs" in doc) == ("costs" in doc):
        raise ConfigError(f"{source}: give exactly one of 'payoffs' or 'costs'")
    key = "payoffs" if "payoffs" in doc else "costs"
    tables = doc[key]
    if not isinstance(tables, list) or len(tables) != 2:
        raise ConfigError(f"{source}: field '{key}' must list one table per player")
    shaped = []
    for i, table in enumerate(tables):
        arr = np.asarray(table, dtype=float)
        if arr.size != actions[0] * actions[1]:
            raise ConfigError(f"{source}: {key}[{i}] has {arr.size} entries, "
                              f"expected {actions[0] * actions[1]}")
        shaped.append(arr.reshape(actions))
    if key == "payoffs":
        shaped = [-t for t in shaped]
    param = Parametrization.parse(doc.get("parametrization", "boltzmann"))
    discounts = doc.get("discounts", [0.0, 0.0])
    if len(discounts) != 2 or not all(0.0 <= float(g) < 1.0 for g in discounts):
        raise ConfigError(f"{source}: field 'discounts' must be two values in [0, 1)")
    game = MatrixGame(name, tuple(shaped), param, tuple(discounts))

    theta0 = None
    if "initial_probabilities" in doc and "initial_theta" in doc:
        raise ConfigError(f"{source}: give at most one of initial_probabilities/initial_theta")
    if "initial_probabilities" in doc:
        try:
            theta0 = game.theta_from_probabilities(doc["initial_probabilities"])
        except ParameterError as exc:
            raise ConfigError(f"{source}: field 'initial_probabilities': {exc}") from None
    elif "initial_theta" in doc:
        theta0 = np.asarray(doc["initial_theta"], dtype=float).reshape(-1)
        if theta0.size != sum(game.block_sizes):
            raise ConfigError(f"{source}: field 'initial_theta' needs {sum(game.block_sizes)} values")
    return game, theta0


def load_game_file(path, parametrization=None) -> tuple[MatrixGame, np.ndarray | None]:
    """Read a YAML game definition; ``parametrization`` overrides the file's."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    if parametrization is not None and isinstance(doc, dict):
        doc = {**doc, "parametrization": Parametrization.parse(parametrization).value}
    return game_from_mapping(doc, str(path))
