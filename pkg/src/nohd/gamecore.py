"""Differentiable n-player games: evaluation and Jacobian decomposition.

A game is any object exposing ``block_sizes`` (parameter count per player)
and ``values(theta)``, which maps the stacked joint parameter vector to the
vector of per-player costs. ``values`` must be written with the primitives
of :mod:`nohd.deriv` so it can be evaluated on hyper-dual inputs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from nohd import deriv
from nohd.errors import DimensionError, NotAFixedPointError
from nohd.linalg import sym_eig

FIXED_POINT_TOL = 1e-6


class Game(Protocol):
    block_sizes: tuple[int, ...]

    def values(self, theta): ...


def block_slices(sizes: Sequence[int]) -> list[slice]:
    edges = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


@dataclass(frozen=True)
class ParamVector:
    """Joint parameters: the players' blocks stacked into one flat vector."""

    flat: np.ndarray
    sizes: tuple[int, ...]

    def __post_init__(self):
        flat = np.asarray(self.flat, dtype=float).reshape(-1)
        if flat.size != sum(self.sizes):
            raise DimensionError(f"{flat.size} parameters for block sizes {self.sizes}")
        object.__setattr__(self, "flat", flat)
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    @classmethod
    def from_blocks(cls, blocks) -> "ParamVector":
        blocks = [np.atleast_1d(np.asarray(b, dtype=float)) for b in blocks]
        return cls(np.concatenate(blocks), tuple(b.size for b in blocks))

    @property
    def blocks(self) -> list[np.ndarray]:
        return [self.flat[s] for s in block_slices(self.sizes)]

    def block(self, i: int) -> np.ndarray:
        return self.flat[block_slices(self.sizes)[i]]


@dataclass(frozen=True)
class GameEval:
    """Exact (or estimated) first- and second-order game quantities at one point.

    ``full_grads[i]`` is the gradient of player ``i``'s cost with respect to
    every parameter; the simultaneous gradient keeps only each player's own
    block, and ``jacobian`` is its derivative.
    """

    theta: np.ndarray
    block_sizes: tuple[int, ...]
    values: np.ndarray
    full_grads: np.ndarray
    sim_grad: np.ndarray
    jacobian: np.ndarray

    @property
    def slices(self) -> list[slice]:
        return block_slices(self.block_sizes)


@dataclass(frozen=True)
class Decomposition:
    """Symmetric/antisymmetric split of the game Jacobian.

    ``ham_value`` is ``||xi||^2 / 2`` and ``ham_grad`` its gradient
    ``J^T xi = (S + A^T) xi``.
    """

    S: np.ndarray
    A: np.ndarray
    ham_value: float
    ham_grad: np.ndarray

    @property
    def xi_norm(self) -> float:
        return float(np.sqrt(2.0 * self.ham_value))


class FixedPointKind(enum.Enum):
    SYMMETRIC_STABLE = "symmetric-stable"
    SYMMETRIC_UNSTABLE = "symmetric-unstable"
    STRICT_SADDLE = "strict-saddle"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class FixedPointClass:
    kind: FixedPointKind
    eigen_summary: np.ndarray


def _flat_theta(game, theta) -> np.ndarray:
    if isinstance(theta, ParamVector):
        if theta.sizes != tuple(game.block_sizes):
            raise DimensionError(f"block sizes {theta.sizes} != game's {tuple(game.block_sizes)}")
        return theta.flat
    flat = np.asarray(theta, dtype=float).reshape(-1)
    if flat.size != sum(game.block_sizes):
        raise DimensionError(f"got {flat.size} parameters, game expects {sum(game.block_sizes)}")
    return flat


def assemble_eval(theta, block_sizes, values, full_grads, hessians) -> GameEval:
    """Build a :class:`GameEval` from per-player gradients and Hessians.

    ``hessians[i]`` is the full Hessian of player ``i``'s cost; row block
    ``i`` of it becomes row block ``i`` of the game Jacobian.
    """
    slices = block_slices(block_sizes)
    full_grads = np.asarray(full_grads, dtype=float)
    sim_grad = np.concatenate([full_grads[i, s] for i, s in enumerate(slices)])
    jacobian = np.concatenate([hessians[i][s, :] for i, s in enumerate(slices)], axis=0)
    return GameEval(np.asarray(theta, dtype=float), tuple(block_sizes),
                    np.asarray(values, dtype=float), full_grads, sim_grad, jacobian)


def evaluate(game, theta) -> GameEval:
    """Costs, gradient table, simultaneous gradient and Jacobian at ``theta``.

    Derivatives are exact (hyper-dual forward mode over ``game.values``).

    Raises
    ------
    DimensionError
        If ``theta`` does not match the game's parameter layout.
    """
    flat = _flat_theta(game, theta)
    values, grads, hessians = deriv.grad_hess(game.values, flat)
    return assemble_eval(flat, game.block_sizes, values, grads, hessians)


def sim_grad(game, theta) -> np.ndarray:
    """Simultaneous gradient only (cheaper than :func:`evaluate`)."""
    return evaluate(game, theta).sim_grad


def decompose(ev: GameEval) -> Decomposition:
    jac = np.asarray(ev.jacobian, dtype=float)
    if jac.ndim != 2 or jac.shape[0] != jac.shape[1]:
        raise DimensionError(f"Jacobian must be square, got {jac.shape}")
    xi = ev.sim_grad
    return Decomposition(
        S=0.5 * (jac + jac.T),
        A=0.5 * (jac - jac.T),
        ham_value=0.5 * float(xi @ xi),
        ham_grad=jac.T @ xi,
    )


def classify_fixed_point(dec: Decomposition, tol: float = FIXED_POINT_TOL) -> FixedPointClass:
    """Classify a fixed point by the spectrum of the symmetric part.

    Eigenvalues within ``tol`` of zero make stability undecidable; such
    points are reported as indeterminate unless a clearly negative
    eigenvalue already marks them as saddles.

    Raises
    ------
    NotAFixedPointError
        If ``||xi|| > tol``.
    """
    if dec.xi_norm > tol:
        raise NotAFixedPointError(f"||xi|| = {dec.xi_norm:.3g} exceeds tolerance {tol:g}")
    eig = np.sort(sym_eig(dec.S).eigenvalues)
    if eig[0] > tol:
        kind = FixedPointKind.SYMMETRIC_STABLE
    elif eig[-1] < -tol:
        kind = FixedPointKind.SYMMETRIC_UNSTABLE
    elif eig[0] < -tol:
        kind = FixedPointKind.STRICT_SADDLE
    else:
        kind = FixedPointKind.INDETERMINATE
    return FixedPointClass(kind, eig)
