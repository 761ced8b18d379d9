"""Second-order forward-mode differentiation with hyper-dual arrays.

A :class:`Dual2` carries, for every element of an array-valued quantity,
its value, its gradient with respect to ``k`` seed directions and its
``k x k`` Hessian. Arithmetic propagates all three exactly, so evaluating a
smooth function on seeded inputs yields machine-precision gradients and
Hessians in one pass.

Functions written against the helpers in this module (:func:`exp`,
:func:`log`, :func:`softmax`, ...) accept both plain ``numpy`` arrays and
:class:`Dual2` values, which lets one code path serve evaluation and
differentiation.

>>> value, grad, hess = grad_hess(lambda x: x[0] * x[1], [3.0, 5.0])
>>> grad
array([5., 3.])
"""

from __future__ import annotations

import numpy as np

from nohd.errors import EvaluationError


def _outer(u, v):
    return u[..., :, None] * v[..., None, :]


def _sym_outer(u, v):
    # u v^T + v u^T, exactly symmetric in floating point
    uv = _outer(u, v)
    return uv + np.swapaxes(uv, -1, -2)


def _add_opt(x, y):
    if x is None:
        return y
    if y is None:
        return x
    return x + y


class Dual2:
    """Array of second-order hyper-dual numbers.

    Parameters
    ----------
    value : array_like
        Primal values, shape ``S``.
    first : array_like
        Gradients, shape ``S + (k,)``.
    second : array_like or None
        Hessians, shape ``S + (k, k)``. ``None`` stands for an identically
        zero Hessian, which keeps affine maps of the seed cheap.
    """

    # numpy operators on (ndarray, Dual2) defer to the reflected methods here
    __array_ufunc__ = None

    def __init__(self, value, first, second=None):
        self.value = np.asarray(value, dtype=float)
        first = np.asarray(first, dtype=float)
        k = first.shape[-1]
        if first.shape[:-1] != self.value.shape:
            first = np.broadcast_to(first, self.value.shape + (k,))
        if second is not None:
            second = np.asarray(second, dtype=float)
            if second.shape[:-2] != self.value.shape:
                second = np.broadcast_to(second, self.value.shape + (k, k))
        self.first = first
        self.second = second

    @classmethod
    def seed(cls, x) -> "Dual2":
        """Independent variables: one seed direction per entry of ``x``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        return cls(x, np.eye(x.size))

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def n_directions(self):
        return self.first.shape[-1]

    @property
    def hessian(self) -> np.ndarray:
        if self.second is None:
            return np.zeros(self.shape + (self.n_directions,) * 2)
        return self.second

    def __len__(self):
        return len(self.value)

    def __repr__(self):
        return f"Dual2(value={self.value!r}, k={self.n_directions})"

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx):
            raise IndexError("Ellipsis indexing is not supported on Dual2")
        second = None if self.second is None else self.second[idx]
        return Dual2(self.value[idx], self.first[idx], second)

    # elementwise arithmetic -------------------------------------------------

    def __neg__(self):
        second = None if self.second is None else -self.second
        return Dual2(-self.value, -self.first, second)

    def __add__(self, other):
        if isinstance(other, Dual2):
            return Dual2(self.value + other.value, self.first + other.first,
                         _add_opt(self.second, other.second))
        return Dual2(self.value + np.asarray(other, dtype=float), self.first, self.second)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual2):
            a, b = self, other
            first = a.first * b.value[..., None] + a.value[..., None] * b.first
            second = _sym_outer(a.first, b.first)
            if a.second is not None:
                second = second + a.second * b.value[..., None, None]
            if b.second is not None:
                second = second + a.value[..., None, None] * b.second
            return Dual2(a.value * b.value, first, second)
        other = np.asarray(other, dtype=float)
        second = None if self.second is None else self.second * other[..., None, None]
        return Dual2(self.value * other, self.first * other[..., None], second)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual2):
            return self * reciprocal(other)
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, exponent):
        if isinstance(exponent, Dual2):
            return exp(log(self) * exponent)
        p = float(exponent)
        v = self.value
        return _chain(self, v ** p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    # reductions and linear maps ---------------------------------------------

    def sum(self, axis=None):
        if axis is None:
            axes = tuple(range(self.ndim))
        else:
            axes = tuple(a % self.ndim for a in np.atleast_1d(axis))
        second = None if self.second is None else self.second.sum(axis=axes)
        return Dual2(self.value.sum(axis=axes), self.first.sum(axis=axes), second)

    @property
    def T(self):
        if self.ndim != 2:
            return self
        second = None if self.second is None else self.second.transpose(1, 0, 2, 3)
        return Dual2(self.value.T, self.first.transpose(1, 0, 2), second)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        k = self.n_directions
        value = self.value.reshape(shape)
        second = None if self.second is None else self.second.reshape(value.shape + (k, k))
        return Dual2(value, self.first.reshape(value.shape + (k,)), second)

    def __matmul__(self, other):
        if isinstance(other, Dual2):
            if self.ndim == 2 and other.ndim == 2:
                raise NotImplementedError("matrix @ matrix between Dual2 values")
            if self.ndim == 1:
                return (self * other).sum() if other.ndim == 1 else (self[:, None] * other).sum(axis=0)
            return (self * other[None, :]).sum(axis=1)
        other = np.asarray(other, dtype=float)
        # x @ M == (M^T @ x) for vectors; for matrices contract the last axis
        if self.ndim == 1:
            return _left_linear(other.T, self)
        value = self.value @ other
        first = np.einsum("ijk,jl->ilk", self.first, other)
        second = None
        if self.second is not None:
            second = np.einsum("ijkm,jl->ilkm", self.second, other)
        return Dual2(value, first, second)

    def __rmatmul__(self, other):
        return _left_linear(np.asarray(other, dtype=float), self)


def _left_linear(m, x: Dual2) -> Dual2:
    """``M @ x`` for a constant matrix ``M``."""
    value = m @ x.value
    first = np.tensordot(m, x.first, axes=1)
    second = None if x.second is None else np.tensordot(m, x.second, axes=1)
    return Dual2(value, first, second)


def _chain(x: Dual2, f, fp, fpp) -> Dual2:
    """Apply a scalar function with value ``f`` and derivatives ``fp``, ``fpp``."""
    first = fp[..., None] * x.first
    second = fpp[..., None, None] * _outer(x.first, x.first)
    if x.second is not None:
        second = second + fp[..., None, None] * x.second
    return Dual2(f, first, second)


# primitives usable on floats, arrays and Dual2 ---------------------------------


def exp(x):
    if isinstance(x, Dual2):
        e = np.exp(x.value)
        return _chain(x, e, e, e)
    return np.exp(x)


def log(x):
    v = x.value if isinstance(x, Dual2) else np.asarray(x, dtype=float)
    if np.any(v <= 0.0):
        raise EvaluationError("log of a non-positive value")
    if isinstance(x, Dual2):
        return _chain(x, np.log(v), 1.0 / v, -1.0 / (v * v))
    return np.log(x)


def tanh(x):
    if isinstance(x, Dual2):
        t = np.tanh(x.value)
        d = 1.0 - t * t
        return _chain(x, t, d, -2.0 * t * d)
    return np.tanh(x)


def reciprocal(x):
    if isinstance(x, Dual2):
        v = x.value
        if np.any(v == 0.0):
            raise EvaluationError("division by zero")
        return _chain(x, 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    return 1.0 / np.asarray(x, dtype=float)


def total(x, axis=None):
    """Sum that works for arrays and :class:`Dual2`."""
    if isinstance(x, Dual2):
        return x.sum(axis=axis)
    return np.sum(x, axis=axis)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Dual2) else np.asarray(x, dtype=float)


def stack(items):
    """Stack scalars (floats or 0-d :class:`Dual2`) into a 1-d array."""
    duals = [it for it in items if isinstance(it, Dual2)]
    if not duals:
        return np.array([float(it) for it in items])
    k = duals[0].n_directions
    values = np.array([float(value_of(it)) for it in items])
    first = np.zeros((len(items), k))
    second = np.zeros((len(items), k, k))
    for i, it in enumerate(items):
        if isinstance(it, Dual2):
            first[i] = it.first
            if it.second is not None:
                second[i] = it.second
    return Dual2(values, first, second)


def concatenate(parts):
    """Concatenate 1-d arrays and/or :class:`Dual2` vectors."""
    duals = [p for p in parts if isinstance(p, Dual2)]
    if not duals:
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])
    k = duals[0].n_directions
    values, firsts, seconds = [], [], []
    for p in parts:
        if isinstance(p, Dual2):
            values.append(p.value)
            firsts.append(p.first)
            seconds.append(p.hessian)
        else:
            p = np.asarray(p, dtype=float)
            values.append(p)
            firsts.append(np.zeros(p.shape + (k,)))
            seconds.append(np.zeros(p.shape + (k, k)))
    return Dual2(np.concatenate(values), np.concatenate(firsts), np.concatenate(seconds))


def softmax(x):
    """Softmax over the last axis, shifted by the max for stability."""
    shift = np.max(value_of(x), axis=-1, keepdims=True)
    e = exp(x - shift)
    return e / total(e, axis=-1)[..., None] if value_of(x).ndim > 1 else e / total(e)


def log_softmax(x):
    shift = np.max(value_of(x), axis=-1, keepdims=True)
    z = x - shift
    if value_of(x).ndim > 1:
        return z - log(total(exp(z), axis=-1))[..., None]
    return z - log(total(exp(z)))


# public entry points ----------------------------------------------------------


def grad_hess(f, x):
    """Value, gradient and Hessian of ``f`` at ``x``.

    ``f`` maps a 1-d array (or :class:`Dual2`) of length ``k`` to a scalar,
    or to an array of scalars, built from the primitives of this module.
    For array outputs of shape ``S`` the gradient has shape ``S + (k,)``
    and the Hessian ``S + (k, k)``.

    Raises
    ------
    EvaluationError
        If a primitive is evaluated outside its domain.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    k = x.size
    out = f(Dual2.seed(x))
    if not isinstance(out, Dual2):
        out = np.asarray(out, dtype=float)
        return out, np.zeros(out.shape + (k,)), np.zeros(out.shape + (k, k))
    value = out.value if out.ndim else float(out.value)
    return value, out.first.copy(), out.hessian.copy()


def fd_check(f, x, h: float = 1e-4):
    """Central finite-difference gradient and Hessian of ``f`` at ``x``.

    Test oracle for :func:`grad_hess`; ``f`` only ever sees plain arrays.
    Truncation error is O(h^2), so quadratics come out exact up to rounding.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    k = x.size

    def at(shift):
        return np.asarray(f(x + shift), dtype=float)

    f0 = at(np.zeros(k))
    eye = np.eye(k) * h
    grad = np.zeros(f0.shape + (k,))
    hess = np.zeros(f0.shape + (k, k))
    for i in range(k):
        grad[..., i] = (at(eye[i]) - at(-eye[i])) / (2 * h)
        for j in range(i, k):
            d = (at(eye[i] + eye[j]) - at(eye[i] - eye[j])
                 - at(-eye[i] + eye[j]) + at(-eye[i] - eye[j])) / (4 * h * h)
            hess[..., i, j] = d
            hess[..., j, i] = d
    return grad, hess
