"""Small dense real linear algebra.

Everything here works on plain ``numpy`` float arrays and returns new
arrays; inputs are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nohd.errors import DimensionError, NumericalError, ParameterError, SingularMatrixError

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
SINGULAR_PIVOT_RTOL = 1e-12
PINV_RCOND = 1e-10


@dataclass(frozen=True)
class SymEig:
    """Eigendecomposition ``H = Q diag(eigenvalues) Q^T``.

    Eigenvalues are ordered by decreasing absolute value; the columns of
    ``eigenvectors`` are the matching orthonormal eigenvectors.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T


def _as_square(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"{name} has non-finite entries")
    return a


def symmetrize(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + a.T)


def _ring_shuffle(m: int) -> np.ndarray:
    # Round-robin tournament on m (even) slots, stored so the pairs of the
    # current round sit at positions (0, 1), (2, 3), ...  Returns the fixed
    # permutation that moves a layout to the next round's layout.
    def layout(players):
        out = []
        for k in range(m // 2):
            out += [players[k], players[m - 1 - k]]
        return out

    players = list(range(m))
    current = layout(players)
    following = layout([players[0], players[-1]] + players[1:-1])
    where = {label: pos for pos, label in enumerate(current)}
    return np.array([where[label] for label in following])


def sym_eig(h, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> SymEig:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    The input is symmetrized as ``(H + H^T) / 2`` first. Each sweep visits
    every off-diagonal pair once, in round-robin order: the rotations of one
    round act on disjoint index pairs and are applied together. Iteration
    stops once the off-diagonal Frobenius norm drops below
    ``tol * ||H||_F``.

    Raises
    ------
    DimensionError
        If ``h`` is not square.
    NumericalError
        If the off-diagonal mass is still above tolerance after
        ``max_sweeps`` sweeps.
    """
    a = symmetrize(_as_square(h))
    n = a.shape[0]
    if n <= 1:
        return SymEig(np.diag(a).copy(), np.eye(n))
    # work on A / max|A| so tiny or huge entries cannot under/overflow the norms
    amax = np.max(np.abs(a))
    if amax == 0.0:
        return SymEig(np.zeros(n), np.eye(n))
    a = a / amax
    threshold = tol * np.linalg.norm(a)

    # Odd sizes get a decoupled zero slot; its rotations are exact identities.
    m = n + (n % 2)
    if m != n:
        a = np.pad(a, ((0, 1), (0, 1)))
    half = m // 2
    vt = np.eye(m)
    perm = np.arange(m)
    shuffle = _ring_shuffle(m)
    idx = np.arange(half)
    offdiag = ~np.eye(m, dtype=bool)

    def off_norm(x):
        return np.linalg.norm(x[offdiag])

    for _ in range(max_sweeps):
        if off_norm(a) <= threshold:
            break
        for _ in range(m - 1):
            blocks = a.reshape(half, 2, half, 2)
            apq = blocks[idx, 0, idx, 1]
            if np.any(apq != 0.0):
                app = blocks[idx, 0, idx, 0]
                aqq = blocks[idx, 1, idx, 1]
                active = apq != 0.0
                # denormal apq overflows tau to inf, which correctly gives t = 0
                with np.errstate(over="ignore"):
                    tau = (aqq - app) / (2.0 * np.where(active, apq, 1.0))
                    sign = np.where(tau >= 0.0, 1.0, -1.0)
                    t = np.where(active, sign / (np.abs(tau) + np.hypot(1.0, tau)), 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c

                # rot[k] = J_k^T; with A symmetric, J^T A J = J^T (J^T A)^T.
                rot = np.empty((half, 2, 2))
                rot[:, 0, 0] = c
                rot[:, 0, 1] = -s
                rot[:, 1, 0] = s
                rot[:, 1, 1] = c
                a = np.matmul(rot, a.reshape(half, 2, m)).reshape(m, m).T
                a = np.matmul(rot, a.reshape(half, 2, m)).reshape(m, m)
                blocks = a.reshape(half, 2, half, 2)
                blocks[idx, 0, idx, 1] = 0.0
                blocks[idx, 1, idx, 0] = 0.0
                # columns of V rotate by J, i.e. rows of V^T by J^T
                vt = np.matmul(rot, vt.reshape(half, 2, m)).reshape(m, m)
            a = a[shuffle][:, shuffle]
            vt = vt[shuffle]
            perm = perm[shuffle]
    else:
        if off_norm(a) > threshold:
            raise NumericalError(f"Jacobi did not converge in {max_sweeps} sweeps")

    keep = perm < n
    w = np.diag(a)[keep] * amax
    # rows of vt follow the current layout, columns are the original basis
    q = vt[keep][:, :n].T
    order = np.argsort(-np.abs(w), kind="stable")
    return SymEig(w[order], q[:, order])


def pt_inverse(h, m: float) -> np.ndarray:
    """Positive-truncated inverse ``Q |Lambda|_m^{-1} Q^T``.

    Eigenvalue magnitudes below ``m`` are replaced by ``m`` and negative
    eigenvalues have their sign flipped, so the result is symmetric
    positive definite with spectrum in ``(0, 1/m]``.
    """
    if not m > 0:
        raise ParameterError(f"PT-inverse floor m must be positive, got {m}")
    eig = sym_eig(h)
    mags = np.abs(eig.eigenvalues)
    floored = np.where(mags >= m, mags, m)
    q = eig.eigenvectors
    return symmetrize((q / floored) @ q.T)


def solve(a, b) -> np.ndarray:
    """Solve ``A x = b`` by LU with partial pivoting.

    Raises
    ------
    SingularMatrixError
        If a pivot falls below ``1e-12 * max|A_ij|``; callers wanting a
        least-squares answer should fall back to :func:`pseudo_solve`.
    """
    a = _as_square(a).copy()
    x = np.array(b, dtype=float)
    n = a.shape[0]
    if x.shape[:1] != (n,):
        raise DimensionError(f"right-hand side has shape {x.shape}, expected ({n},...)")
    scale = np.max(np.abs(a)) if n else 0.0
    if n and scale == 0.0:
        raise SingularMatrixError("zero matrix")
    limit = SINGULAR_PIVOT_RTOL * scale

    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[piv, k]) < limit:
            raise SingularMatrixError(f"pivot {k} below {limit:.3g}")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            x[[k, piv]] = x[[piv, k]]
        factors = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(factors, a[k, k:])
        x[k + 1:] -= np.multiply.outer(factors, x[k])

    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def pseudo_solve(a, b, rcond: float = PINV_RCOND) -> np.ndarray:
    """Minimum-norm least-squares solution ``A^+ b``.

    Singular values below ``rcond * sigma_max`` are treated as zero.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.shape[:1] != (a.shape[0],):
        raise DimensionError(f"incompatible shapes {a.shape} and {b.shape}")
    if a.size == 0:
        return np.zeros((a.shape[1],) + b.shape[1:])
    u, sigma, vt = np.linalg.svd(a, full_matrices=False)
    if sigma[0] == 0.0:
        return np.zeros((a.shape[1],) + b.shape[1:])
    keep = sigma > rcond * sigma[0]
    inv = np.where(keep, 1.0 / np.where(keep, sigma, 1.0), 0.0)
    coeffs = (u.T @ b) * (inv if b.ndim == 1 else inv[:, None])
    return vt.T @ coeffs
