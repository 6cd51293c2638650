"""Linear moment estimator and the projections built on top of it.

The estimator for a pair of embeddings ``(U, V)`` starts from the matrix

    X_lin = (1/m) * sum_i a_i y_i b_i^T

whose expectation is ``U Q V^T`` for isotropic Gaussian features. The dense
estimate keeps the top-``r`` singular triplets of ``X_lin``; the sparse
estimate first passes ``X_lin`` through three hard-thresholding projections
(per-column entries, whole columns, whole rows) and only then truncates.

All functions are pure: inputs are never modified and the returned arrays
are fresh (or read-only views for the containers below).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import (
    DimensionError,
    EmptyInputError,
    InputError,
    NotPositiveDefiniteError,
    NumericalError,
    SingularCovarianceError,
)

# Singular values below ZERO_SV_RTOL * sigma_1 count as zero in rank decisions.
ZERO_SV_RTOL = 1e-12
# Smallest admissible Cholesky pivot (squared diagonal of the factor).
PIVOT_TOL = 1e-12
# Row block size for the BLAS accumulation path of linear_estimate.
CHUNK_ROWS = 65536


def _readonly(x):
    view = x.view()
    view.flags.writeable = False
    return view


def _as_matrix(x, name="x"):
    if isinstance(x, LinearEstimate):
        x = x.x_lin
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D array, got shape {x.shape}", name)
    if not np.isfinite(x).all():
        raise InputError(f"{name} contains NaN or Inf entries")
    return x


def _check_range(name, value, lo, hi):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise InputError(f"{name} must be an integer, got {value!r}")
    if not lo <= value <= hi:
        raise InputError(f"{name}={value} is outside [{lo}, {hi}]")


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Observed triples ``(a_i, b_i, y_i)``.

    ``a`` is ``m x n1`` and ``b`` is ``m x n2`` with one sample per row;
    ``y`` has length ``m``. Arrays are stored as read-only float views.
    """

    a: np.ndarray
    b: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if a.ndim != 2:
            raise DimensionError(f"a must be 2-D (m x n1), got shape {a.shape}", "a")
        if b.ndim != 2:
            raise DimensionError(f"b must be 2-D (m x n2), got shape {b.shape}", "b")
        if y.ndim != 1:
            raise DimensionError(f"y must be 1-D (m,), got shape {y.shape}", "y")
        m = a.shape[0]
        if m == 0:
            raise EmptyInputError("sample set is empty (m = 0)")
        if b.shape[0] != m:
            raise DimensionError(f"b has {b.shape[0]} rows but a has {m}", "m")
        if y.shape[0] != m:
            raise DimensionError(f"y has length {y.shape[0]} but a has {m} rows", "m")
        for name, arr in (("a", a), ("b", b), ("y", y)):
            if not np.isfinite(arr).all():
                raise InputError(f"{name} contains NaN or Inf entries")
        object.__setattr__(self, "a", _readonly(a))
        object.__setattr__(self, "b", _readonly(b))
        object.__setattr__(self, "y", _readonly(y))

    @property
    def m(self):
        return self.a.shape[0]

    @property
    def n1(self):
        return self.a.shape[1]

    @property
    def n2(self):
        return self.b.shape[1]

    def take(self, index):
        """Return the sub-sample (or permutation) selected by ``index``."""
        index = np.asarray(index)
        return SampleSet(self.a[index], self.b[index], self.y[index])


@dataclass(frozen=True, eq=False)
class LinearEstimate:
    x_lin: np.ndarray
    m: int


@dataclass(frozen=True, eq=False)
class EmbeddingEstimate:
    """Estimated embeddings ``(u_hat, v_hat)`` with their singular values.

    ``support_rows`` / ``support_cols`` are set by the sparse path only and
    hold the (sorted) indices kept by the row and column selections.
    """

    u_hat: np.ndarray
    v_hat: np.ndarray
    sigma_hat: np.ndarray
    support_rows: np.ndarray | None = None
    support_cols: np.ndarray | None = None

    @property
    def r(self):
        return self.u_hat.shape[1]

    def reconstruction(self):
        return (self.u_hat * self.sigma_hat) @ self.v_hat.T


def cholesky_lower(cov, name="cov"):
    """Lower Cholesky factor of ``cov``.

    Raises :class:`NotPositiveDefiniteError` carrying the 0-based index of
    the first pivot that is non-positive or below ``PIVOT_TOL``.
    """
    cov = _as_matrix(cov, name)
    n = cov.shape[0]
    if cov.shape != (n, n):
        raise DimensionError(f"{name} must be square, got shape {cov.shape}", name)
    scale = max(1.0, float(np.abs(cov).max(initial=0.0)))
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10 * scale):
        raise InputError(f"{name} is not symmetric")
    factor, info = lapack.dpotrf(cov, lower=1, clean=1)
    if info > 0:
        pivot = info - 1
        raise NotPositiveDefiniteError(
            f"{name} is not positive definite: Cholesky pivot {pivot} is non-positive",
            pivot,
        )
    if info < 0:
        raise NumericalError(f"dpotrf rejected argument {-info} for {name}")
    pivots = np.diag(factor) ** 2
    small = np.flatnonzero(pivots <= PIVOT_TOL)
    if small.size:
        pivot = int(small[0])
        raise NotPositiveDefiniteError(
            f"{name} is numerically singular: Cholesky pivot {pivot} = "
            f"{pivots[pivot]:.3g} <= {PIVOT_TOL:g}",
            pivot,
        )
    return factor


@dataclass(frozen=True, eq=False)
class MomentSpec:
    """Means and covariances of the two feature vectors.

    ``source`` is ``"known"`` or ``"sample-estimated"``. The lower Cholesky
    factors are computed once at construction (``chol1``, ``chol2``).
    """

    mean1: np.ndarray
    mean2: np.ndarray
    cov1: np.ndarray
    cov2: np.ndarray
    source: str = "known"
    chol1: np.ndarray = field(init=False, repr=False)
    chol2: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.source not in ("known", "sample-estimated"):
            raise InputError(f"unknown moment source {self.source!r}")
        for k in ("1", "2"):
            mean = np.asarray(getattr(self, "mean" + k), dtype=float)
            cov = np.asarray(getattr(self, "cov" + k), dtype=float)
            if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
                raise DimensionError(
                    f"mean{k} has shape {mean.shape} but cov{k} has shape {cov.shape}",
                    "n" + k,
                )
            chol = cholesky_lower(cov, "cov" + k)
            object.__setattr__(self, "mean" + k, _readonly(mean))
            object.__setattr__(self, "cov" + k, _readonly(cov))
            object.__setattr__(self, "chol" + k, _readonly(chol))

    @classmethod
    def identity(cls, n1, n2):
        return cls(np.zeros(n1), np.zeros(n2), np.eye(n1), np.eye(n2))


def linear_estimate(samples, method="blas"):
    """Compute ``X_lin = (1/m) sum_i a_i y_i b_i^T``.

    ``method="loop"`` is the reference path: one rank-one update per sample
    in index order. ``method="blas"`` accumulates row blocks of
    ``CHUNK_ROWS`` samples with matrix products, again in index order; it
    agrees with the reference path to 1e-10 relative to ``max|a||y||b|``
    and is the default.
    """
    a, b, y = samples.a, samples.b, samples.y
    m = samples.m
    acc = np.zeros((samples.n1, samples.n2))
    if method == "loop":
        for i in range(m):
            acc += np.outer(a[i] * y[i], b[i])
    elif method == "blas":
        for start in range(0, m, CHUNK_ROWS):
            rows = slice(start, start + CHUNK_ROWS)
            acc += a[rows].T @ (y[rows, None] * b[rows])
    else:
        raise InputError(f"unknown method {method!r}; expected 'blas' or 'loop'")
    return LinearEstimate(acc / m, m)


def rank_r_truncate(x, r):
    """Best rank-``r`` approximation of ``x`` as its top singular triplets.

    Only the reconstruction and the spanned subspaces are well defined when
    ``sigma_r == sigma_{r+1}``; individual vectors follow LAPACK.
    """
    x = _as_matrix(x)
    _check_range("r", r, 1, min(x.shape))
    try:
        u, s, vt = np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD did not converge for a {x.shape[0]}x{x.shape[1]} matrix "
            f"(Frobenius norm {np.linalg.norm(x):.3g}, max |entry| "
            f"{np.abs(x).max():.3g}): {exc}"
        ) from exc
    return EmbeddingEstimate(u[:, :r], vt[:r].T, np.maximum(s[:r], 0.0))


def _top_k(scores, k):
    # Stable sort on the negated scores keeps the smaller index on ties.
    return np.sort(np.argsort(-scores, kind="stable")[:k])


def project_col_entries(x, s1):
    """Keep the ``s1`` largest-magnitude entries of every column."""
    x = _as_matrix(x)
    _check_range("s1", s1, 1, x.shape[0])
    keep = np.argsort(-np.abs(x), axis=0, kind="stable")[:s1]
    cols = np.arange(x.shape[1])
    out = np.zeros_like(x)
    out[keep, cols] = x[keep, cols]
    return out


def _select_cols(x, s2):
    kept = _top_k(np.linalg.norm(x, axis=0), s2)
    out = np.zeros_like(x)
    out[:, kept] = x[:, kept]
    return out, kept


def project_col_select(x, s2):
    """Keep the ``s2`` columns of largest Euclidean norm."""
    x = _as_matrix(x)
    _check_range("s2", s2, 1, x.shape[1])
    return _select_cols(x, s2)[0]


def project_row_select(x, s1):
    """Keep the ``s1`` rows of largest Euclidean norm."""
    x = _as_matrix(x)
    _check_range("s1", s1, 1, x.shape[0])
    return _select_cols(x.T, s1)[0].T


def sparse_truncate(x, s1, s2, r):
    """Sequential projection of a matrix onto rows/columns/rank budgets.

    Applies, in order, the per-column entry selection (``s1``), column
    selection (``s2``), row selection (``s1``) and rank-``r`` truncation.
    The SVD is taken on the ``s1 x s2`` surviving block only.
    """
    x = _as_matrix(x)
    n1, n2 = x.shape
    _check_range("s1", s1, 1, n1)
    _check_range("s2", s2, 1, n2)
    _check_range("r", r, 1, min(s1, s2))
    x1 = project_col_entries(x, s1)
    x2, cols = _select_cols(x1, s2)
    x3t, rows = _select_cols(x2.T, s1)
    block = x3t.T[np.ix_(rows, cols)]
    est = rank_r_truncate(block, r)
    u = np.zeros((n1, r))
    v = np.zeros((n2, r))
    u[rows] = est.u_hat
    v[cols] = est.v_hat
    out = EmbeddingEstimate(u, v, est.sigma_hat, support_rows=rows, support_cols=cols)
    problems = membership_violations(out, s1, s2, r)
    if problems:
        raise NumericalError("sparse estimate violates its budget: " + "; ".join(problems))
    return out


def sparse_estimate(samples, s1, s2, r, method="blas"):
    """Sparse embedding estimate from samples (linear estimate + :func:`sparse_truncate`)."""
    if r > min(s1, s2):
        raise InputError(f"r={r} must not exceed min(s1, s2)={min(s1, s2)}")
    return sparse_truncate(linear_estimate(samples, method).x_lin, s1, s2, r)


def membership_violations(estimate, s1, s2, r):
    """List every way ``estimate`` leaves the row/column/rank budget (empty if none)."""
    problems = []
    u, v = estimate.u_hat, estimate.v_hat
    recon = estimate.reconstruction()
    nz_rows = np.count_nonzero(np.any(recon != 0, axis=1))
    nz_cols = np.count_nonzero(np.any(recon != 0, axis=0))
    if nz_rows > s1:
        problems.append(f"{nz_rows} nonzero rows > s1={s1}")
    if nz_cols > s2:
        problems.append(f"{nz_cols} nonzero columns > s2={s2}")
    if u.shape[1] > r or v.shape[1] > r or estimate.sigma_hat.size > r:
        problems.append(f"rank budget exceeded: {u.shape[1]} columns > r={r}")
    for label, basis, support in (
        ("u_hat", u, estimate.support_rows),
        ("v_hat", v, estimate.support_cols),
    ):
        if support is None:
            continue
        if len(support) > (s1 if label == "u_hat" else s2):
            problems.append(f"{label} support has {len(support)} indices")
        outside = np.ones(basis.shape[0], dtype=bool)
        outside[support] = False
        if np.any(basis[outside] != 0):
            problems.append(f"{label} has nonzero rows outside its support")
    return problems


def whiten(samples, moments):
    """Map ``a -> C1^{-1}(a - mean1)`` and ``b -> C2^{-1}(b - mean2)``; ``y`` is kept."""
    if moments.mean1.size != samples.n1:
        raise DimensionError(
            f"moments are for n1={moments.mean1.size}, samples have n1={samples.n1}", "n1"
        )
    if moments.mean2.size != samples.n2:
        raise DimensionError(
            f"moments are for n2={moments.mean2.size}, samples have n2={samples.n2}", "n2"
        )
    a = solve_triangular(moments.chol1, (samples.a - moments.mean1).T, lower=True).T
    b = solve_triangular(moments.chol2, (samples.b - moments.mean2).T, lower=True).T
    return SampleSet(a, b, samples.y)


def estimate_moments(samples):
    """Sample means and unbiased (``m - 1``) sample covariances of both feature blocks.

    No regularization is applied: a singular sample covariance raises
    :class:`SingularCovarianceError`.
    """
    m = samples.m
    if m < 2:
        raise InputError(f"need at least 2 samples to estimate covariances, got m={m}")
    parts = {}
    for k, feats in (("1", samples.a), ("2", samples.b)):
        parts["mean" + k] = feats.mean(axis=0)
        parts["cov" + k] = np.atleast_2d(np.cov(feats, rowvar=False, ddof=1))
    try:
        return MomentSpec(source="sample-estimated", **parts)
    except NotPositiveDefiniteError as exc:
        raise SingularCovarianceError(
            f"{exc} (sample covariance from m={m} samples); collect more samples "
            "or regularize the covariance explicitly before whitening",
            exc.pivot,
        ) from exc


def estimate_rank(x_lin, eta):
    """Number of singular values of ``x_lin`` above ``eta / 2``."""
    x = _as_matrix(x_lin, "x_lin")
    if not eta > 0:
        raise InputError(f"eta must be positive, got {eta}")
    s = np.linalg.svd(x, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    s = s[s > ZERO_SV_RTOL * s[0]]
    return int(np.count_nonzero(s > eta / 2))


def estimate_sparsity(x_lin, eta):
    """Counts ``(s1, s2)`` of rows and columns holding an entry with ``|x| > eta / 2``."""
    x = _as_matrix(x_lin, "x_lin")
    if not eta > 0:
        raise InputError(f"eta must be positive, got {eta}")
    mask = np.abs(x) > eta / 2
    return int(mask.any(axis=1).sum()), int(mask.any(axis=0).sum())
