"""Update rules for differentiable games.

NOHD picks, at every step, between two Newton directions built from the
Helmholtz split ``J = S + A`` of the game Jacobian:

* potential step ``-eta |S|_m^{-1} xi`` (PT-inverse of the symmetric part),
* Hamiltonian step ``-eta A^{-1} xi`` (antisymmetric part, pseudo-inverse
  when ``A`` is singular),

choosing by how well each aligns with the Hamiltonian gradient ``J^T xi``.
The baselines (GD, SGA, CO, IGA-PP, LOLA, SOS, CGD) share the same
evaluation objects so they can be driven by one loop.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from nohd import gamecore
from nohd.errors import (DomainExitError, NumericalError, ParameterError,
                         SingularMatrixError)
from nohd.gamecore import Decomposition, GameEval
from nohd.linalg import pseudo_solve, pt_inverse, solve

FIXED_POINT_TOL = 1e-8
# cos_S values this close to zero count as non-negative; on exactly
# Hamiltonian games cos_S is zero up to rounding.
COS_SIGN_TOL = 1e-12

ALGORITHMS = ("nohd", "gd", "sga", "co", "igapp", "lola", "sos", "cgd")


class Branch(enum.Enum):
    POTENTIAL = "potential"
    HAMILTONIAN = "hamiltonian"
    FIXED_POINT = "fixed_point"


@dataclass(frozen=True)
class NohdConfig:
    eta: float = 1.0
    m: float = 0.03
    ham_grad_floor: float = 1e-10
    apply_eta_to_hamiltonian_branch: bool = True
    fixed_point_tol: float = FIXED_POINT_TOL

    def __post_init__(self):
        if not self.eta > 0:
            raise ParameterError(f"eta must be positive, got {self.eta}")
        if not self.m > 0:
            raise ParameterError(f"m must be positive, got {self.m}")
        if self.ham_grad_floor < 0 or self.fixed_point_tol < 0:
            raise ParameterError("tolerances must be non-negative")


@dataclass(frozen=True)
class UpdateStep:
    """One update direction plus the diagnostics that produced it.

    ``branch`` is ``None`` for baseline algorithms; cosines are NaN when
    undefined (baselines, fixed points, degenerate geometry).
    """

    direction: np.ndarray
    branch: Branch | None = None
    cos_s: float = float("nan")
    cos_a: float = float("nan")
    used_pseudoinverse: bool = False
    degenerate: bool = False


def _cosine(u: np.ndarray, g: np.ndarray) -> float:
    nu, ng = np.linalg.norm(u), np.linalg.norm(g)
    if nu == 0.0 or ng == 0.0:
        return 0.0
    return float(np.clip(u @ g / (nu * ng), -1.0, 1.0))


def _solve_or_pinv(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, bool]:
    try:
        return solve(a, b), False
    except SingularMatrixError:
        return pseudo_solve(a, b), True


def potential_direction(dec: Decomposition, xi, m: float) -> np.ndarray:
    """``|S|_m^{-1} xi`` (no sign, no step size)."""
    return pt_inverse(dec.S, m) @ np.asarray(xi, dtype=float)


def hamiltonian_direction(dec: Decomposition, xi) -> tuple[np.ndarray, bool]:
    """``A^{-1} xi``, or ``A^+ xi`` when ``A`` is singular.

    Returns the vector and whether the pseudo-inverse was used.
    """
    return _solve_or_pinv(dec.A, np.asarray(xi, dtype=float))


def newton_potential_step(dec: Decomposition, xi, cfg: NohdConfig = NohdConfig()) -> np.ndarray:
    return -cfg.eta * potential_direction(dec, xi, cfg.m)


def newton_hamiltonian_step(dec: Decomposition, xi,
                            cfg: NohdConfig = NohdConfig()) -> tuple[np.ndarray, bool]:
    u, used_pinv = hamiltonian_direction(dec, xi)
    c = cfg.eta if cfg.apply_eta_to_hamiltonian_branch else 1.0
    return -c * u, used_pinv


def nohd_step(ev: GameEval, dec: Decomposition, cfg: NohdConfig = NohdConfig()) -> UpdateStep:
    """One NOHD update.

    With ``g = J^T xi`` and ``cos_X`` the cosine between ``u_X`` and ``g``:
    when ``cos_S >= 0`` the branch with the larger cosine wins, otherwise
    the one with the smaller cosine; ties go to the potential branch.
    If ``||g||`` is below ``cfg.ham_grad_floor`` the cosines are undefined
    and the potential branch is used (flagged ``degenerate``).
    """
    xi = np.asarray(ev.sim_grad, dtype=float)
    if np.linalg.norm(xi) <= cfg.fixed_point_tol:
        return UpdateStep(np.zeros_like(xi), Branch.FIXED_POINT)

    u_s = potential_direction(dec, xi, cfg.m)
    u_a, used_pinv = hamiltonian_direction(dec, xi)
    g = dec.ham_grad
    c_ham = cfg.eta if cfg.apply_eta_to_hamiltonian_branch else 1.0

    if np.linalg.norm(g) <= cfg.ham_grad_floor:
        return UpdateStep(-cfg.eta * u_s, Branch.POTENTIAL, degenerate=True)

    cos_s, cos_a = _cosine(u_s, g), _cosine(u_a, g)
    if cos_s >= -COS_SIGN_TOL:
        potential = cos_s >= cos_a
    else:
        potential = cos_s <= cos_a
    if potential:
        return UpdateStep(-cfg.eta * u_s, Branch.POTENTIAL, cos_s, cos_a, False)
    return UpdateStep(-c_ham * u_a, Branch.HAMILTONIAN, cos_s, cos_a, used_pinv)


# baselines --------------------------------------------------------------------


def off_diagonal_blocks(ev: GameEval) -> np.ndarray:
    """``H_o``: the game Jacobian with its diagonal (own-player) blocks zeroed."""
    h_o = np.array(ev.jacobian, dtype=float)
    for s in ev.slices:
        h_o[s, s] = 0.0
    return h_o


def shaping_term(ev: GameEval) -> np.ndarray:
    """Opponent-shaping vector ``chi``.

    ``chi_i = sum_{j != i} J_{ji}^T grad_{theta_j} V_i`` where ``J_{ji}`` is
    block ``(j, i)`` of the game Jacobian and the gradients come from the
    full gradient table.
    """
    slices = ev.slices
    chi = np.zeros(ev.jacobian.shape[0])
    for i, si in enumerate(slices):
        for j, sj in enumerate(slices):
            if j != i:
                chi[si] += ev.jacobian[sj, si].T @ ev.full_grads[i, sj]
    return chi


SOS_A = 0.5
SOS_B = 0.1


def sos_scale(xi: np.ndarray, xi0: np.ndarray, shaping: np.ndarray,
              a: float = SOS_A, b: float = SOS_B) -> float:
    """Shaping coefficient ``p = min(p1, p2)``; ``shaping`` is ``-alpha chi``."""
    inner = float(shaping @ xi0)
    p1 = 1.0 if inner >= 0.0 else min(1.0, -a * float(xi0 @ xi0) / inner)
    norm = float(np.linalg.norm(xi))
    p2 = norm * norm if norm < b else 1.0
    return min(p1, p2)


def baseline_step(alg: str, ev: GameEval, dec: Decomposition | None = None, *,
                  eta: float = 0.1, **hyper) -> np.ndarray:
    """Update direction of a baseline optimizer (all minimize cost).

    Hyperparameters: ``lam`` (SGA, default 1), ``gamma`` (CO, default 1),
    ``alpha`` (IGA-PP, LOLA, SOS; default ``eta``), ``a`` and ``b`` (SOS).
    """
    if not eta > 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    alg = alg.lower()
    xi = np.asarray(ev.sim_grad, dtype=float)
    if alg == "gd":
        return -eta * xi
    if dec is None:
        dec = gamecore.decompose(ev)
    if alg == "sga":
        return -eta * (xi + hyper.get("lam", 1.0) * (dec.A.T @ xi))
    if alg == "co":
        return -eta * (xi + hyper.get("gamma", 1.0) * (ev.jacobian.T @ xi))

    h_o = off_diagonal_blocks(ev)
    if alg == "cgd":
        lhs = np.eye(xi.size) + eta * h_o
        return -eta * _solve_or_pinv(lhs, xi)[0]

    alpha = hyper.get("alpha", eta)
    xi0 = xi - alpha * (h_o @ xi)
    if alg == "igapp":
        return -eta * xi0
    shaping = -alpha * shaping_term(ev)
    if alg == "lola":
        return -eta * (xi0 + shaping)
    if alg == "sos":
        p = sos_scale(xi, xi0, shaping, hyper.get("a", SOS_A), hyper.get("b", SOS_B))
        return -eta * (xi0 + p * shaping)
    raise ParameterError(f"unknown algorithm {alg!r}; choose from {ALGORITHMS}")


def make_updater(alg: str, eta: float, nohd_config: NohdConfig | None = None,
                 **hyper) -> Callable[[GameEval, Decomposition], UpdateStep]:
    """Bind an algorithm and its hyperparameters into ``update(ev, dec)``."""
    alg = alg.lower()
    if alg not in ALGORITHMS:
        raise ParameterError(f"unknown algorithm {alg!r}; choose from {ALGORITHMS}")
    if alg == "nohd":
        cfg = nohd_config if nohd_config is not None else NohdConfig(eta=eta)
        if nohd_config is not None and nohd_config.eta != eta:
            cfg = NohdConfig(eta, cfg.m, cfg.ham_grad_floor,
                             cfg.apply_eta_to_hamiltonian_branch, cfg.fixed_point_tol)
        return lambda ev, dec: nohd_step(ev, dec, cfg)
    if not eta > 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    return lambda ev, dec: UpdateStep(baseline_step(alg, ev, dec, eta=eta, **hyper))


# run loop ---------------------------------------------------------------------


@dataclass(frozen=True)
class StepRecord:
    step: int
    theta: np.ndarray
    values: np.ndarray
    xi_norm: float
    update: UpdateStep | None


@dataclass
class Trace:
    """Iterates ``theta_0, ..., theta_T`` with the update taken at each.

    A run that uses its full step budget ends with a record of the final
    point and ``update=None``. When the stop rule ends the run,
    ``stopped_early`` is set and the last record keeps the update it
    computed, which was not applied.
    """

    algorithm: str
    records: list[StepRecord] = field(default_factory=list)
    stopped_early: bool = False

    @property
    def thetas(self) -> np.ndarray:
        return np.array([r.theta for r in self.records])

    @property
    def final_theta(self) -> np.ndarray:
        return self.records[-1].theta

    @property
    def n_updates(self) -> int:
        return sum(r.update is not None for r in self.records)


def run(game, algorithm: str, theta0, steps: int, stop_rule: Callable[[Trace], bool] | None = None,
        *, eta: float = 1.0, nohd_config: NohdConfig | None = None,
        evaluator: Callable[[np.ndarray, int], GameEval] | None = None, **hyper) -> Trace:
    """Iterate ``theta <- theta + update`` for at most ``steps`` updates.

    ``evaluator(theta, t)`` supplies the game quantities (exact by default;
    pass an estimator closure for sampled runs). ``stop_rule(trace)`` is
    consulted after each recorded point.

    Raises
    ------
    DomainExitError
        When the iterate leaves the policy domain; ``step`` is set and the
        partial trace is attached as ``trace``.
    NumericalError
        If NOHD produces a zero direction away from a fixed point.
    """
    if steps < 1:
        raise ParameterError(f"steps must be >= 1, got {steps}")
    update = make_updater(algorithm, eta, nohd_config, **hyper)
    if evaluator is None:
        def evaluator(theta, t):
            return gamecore.evaluate(game, theta)

    trace = Trace(algorithm.lower())
    theta = np.array(theta0, dtype=float).reshape(-1)
    for t in range(steps + 1):
        try:
            ev = evaluator(theta, t)
        except DomainExitError as exc:
            exc.step = t
            exc.trace = trace
            raise
        xi_norm = float(np.linalg.norm(ev.sim_grad))
        if t == steps:
            trace.records.append(StepRecord(t, theta, ev.values, xi_norm, None))
            break
        dec = gamecore.decompose(ev)
        step = update(ev, dec)
        if (step.branch is not None and step.branch is not Branch.FIXED_POINT
                and not np.any(step.direction)):
            raise NumericalError(f"zero update away from a fixed point at step {t}")
        trace.records.append(StepRecord(t, theta, ev.values, xi_norm, step))
        if stop_rule is not None and stop_rule(trace):
            trace.stopped_early = True
            break
        theta = theta + step.direction
    return trace
