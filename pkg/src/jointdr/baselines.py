"""Principal Hessian directions (pHd) for the two-block setting.

The pHd matrix is ``M = (1/m) sum_i (y_i - ybar)(x_i x_i^T - I)`` for
standardized features ``x_i``. Two variants are offered:

``stacked``
    ``x_i = (a_i; b_i)`` and the ``k`` eigenvectors of ``M`` with largest
    ``|eigenvalue|`` are returned. The off-diagonal block of ``M`` estimates
    ``E[y a b^T] = U Q V^T``, so this variant also picks up links that are odd
    in both arguments.
``blockwise``
    pHd is run on each block separately (``x_i = a_i`` and ``x_i = b_i``),
    keeping ``k/2`` directions per block; the directions are block-diagonal.
    This variant only sees the even part of the link.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError

PHD_MODES = ("stacked", "blockwise")


@dataclass(frozen=True, eq=False)
class PhdResult:
    """``directions`` is ``(n1 + n2) x k`` with orthonormal columns.

    ``eigenvalues`` are sorted by absolute value, largest first;
    ``degenerate`` flags an (numerically) all-zero pHd matrix.
    """

    directions: np.ndarray
    eigenvalues: np.ndarray
    degenerate: bool = False
    mode: str = "stacked"


def phd_matrix(x, y):
    """``(1/m) sum_i (y_i - ybar)(x_i x_i^T - I)`` for rows ``x_i`` of ``x``."""
    yc = y - y.mean()
    m, n = x.shape
    mat = (x.T * yc) @ x / m - yc.mean() * np.eye(n)
    return (mat + mat.T) / 2


def _top_abs_eig(mat, k):
    w, vecs = np.linalg.eigh(mat)
    order = np.argsort(-np.abs(w), kind="stable")[:k]
    return w[order], vecs[:, order]


def phd_estimate(samples, k, mode="stacked"):
    """Top-``k`` principal Hessian directions of standardized samples."""
    n1, n2 = samples.n1, samples.n2
    if mode not in PHD_MODES:
        raise InputError(f"unknown pHd mode {mode!r}; expected one of {PHD_MODES}")
    if not 1 <= k <= n1 + n2:
        raise InputError(f"k={k} is outside [1, {n1 + n2}]")
    y = np.asarray(samples.y)
    if mode == "stacked":
        mat = phd_matrix(np.hstack([samples.a, samples.b]), y)
        scale = np.abs(mat).max(initial=0.0)
        w, vecs = _top_abs_eig(mat, k)
        return PhdResult(vecs, w, degenerate=bool(scale <= 1e-14 * max(1.0, np.abs(y).max())), mode=mode)

    if k % 2 or k // 2 > min(n1, n2):
        raise InputError(f"blockwise pHd needs an even k with k/2 <= min(n1, n2), got k={k}")
    half = k // 2
    mat_a = phd_matrix(np.asarray(samples.a), y)
    mat_b = phd_matrix(np.asarray(samples.b), y)
    wa, va = _top_abs_eig(mat_a, half)
    wb, vb = _top_abs_eig(mat_b, half)
    directions = np.zeros((n1 + n2, k))
    directions[:n1, :half] = va
    directions[n1:, half:] = vb
    w = np.concatenate([wa, wb])
    order = np.argsort(-np.abs(w), kind="stable")
    scale = max(np.abs(mat_a).max(initial=0.0), np.abs(mat_b).max(initial=0.0))
    return PhdResult(
        directions[:, order],
        w[order],
        degenerate=bool(scale <= 1e-14 * max(1.0, np.abs(y).max())),
        mode=mode,
    )


def phd_split_error(result, truth):
    """NSEE analogue on the stacked space.

    ``||(I - W W^T) D||_F / sqrt(2r)`` where ``W`` is an orthonormal basis of
    ``span(blkdiag(U, V))`` and ``D`` the pHd directions; lies in ``[0, 1]``.
    """
    d = np.asarray(result.directions)
    n1, n2, r = truth.n1, truth.n2, truth.r
    if d.shape[0] != n1 + n2:
        raise DimensionError(f"directions have {d.shape[0]} rows, expected n1 + n2 = {n1 + n2}", "n")
    if d.shape[1] != 2 * r:
        raise DimensionError(f"need k = 2r = {2 * r} directions, got {d.shape[1]}", "k")
    blk = np.zeros((n1 + n2, 2 * r))
    blk[:n1, :r] = truth.u
    blk[n1:, r:] = truth.v
    w, _ = np.linalg.qr(blk)
    resid = d - w @ (w.T @ d)
    return float(np.linalg.norm(resid) / np.sqrt(2 * r))
