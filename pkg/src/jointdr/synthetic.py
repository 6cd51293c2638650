"""Planted problems, feature distributions, link models and response draws.

Random streams
--------------
Every generator takes ``seed`` (anything accepted by
:func:`numpy.random.default_rng`). Experiment trials derive their seeds with
:func:`derive_seed`, which hashes ``(base_seed, *indices)`` through
:class:`numpy.random.SeedSequence` spawn keys; a trial seed then splits into
independent problem and sample streams with :func:`trial_streams`. Streams
depend only on these integers, never on execution order or thread count.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, InputError, NotOrthonormalError
from .estimator import MomentSpec, SampleSet

ORTHO_TOL = 1e-10
POISSON_LAMBDA = 4.0
DEFAULT_RHO = 0.2

LINK_KINDS = ("bilinear_gaussian", "bilinear_noiseless", "binary_exp", "indicator", "even_poly")
DIST_KINDS = ("gaussian_iso", "uniform_sqrt3", "poisson_norm", "correlated_gaussian")


def derive_seed(base_seed, *indices):
    """64-bit seed from ``SeedSequence(base_seed, spawn_key=indices)``."""
    seq = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(i) for i in indices))
    return int(seq.generate_state(1, np.uint64)[0])


def trial_streams(seed):
    """Independent ``(problem_rng, sample_rng)`` generators for one trial."""
    problem, samples = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(problem), np.random.default_rng(samples)


def orthonormality_deviation(x):
    x = np.asarray(x, dtype=float)
    return float(np.abs(x.T @ x - np.eye(x.shape[1])).max(initial=0.0))


@dataclass(frozen=True, eq=False)
class EmbeddingPair:
    """Ground-truth embeddings ``U`` (``n1 x r``) and ``V`` (``n2 x r``)."""

    u: np.ndarray
    v: np.ndarray
    row_support_u: np.ndarray | None = None
    row_support_v: np.ndarray | None = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.ndim != 2 or v.ndim != 2 or u.shape[1] != v.shape[1]:
            raise DimensionError(f"u {u.shape} and v {v.shape} must be n x r with equal r", "r")
        for name, basis in (("u", u), ("v", v)):
            dev = orthonormality_deviation(basis)
            if dev > ORTHO_TOL:
                raise NotOrthonormalError(f"{name} columns are not orthonormal (max deviation {dev:.3g})", dev)
        for name, basis, support in (("u", u, self.row_support_u), ("v", v, self.row_support_v)):
            if support is None:
                continue
            support = np.asarray(support)
            n, r = basis.shape
            if not r < support.size < n:
                raise InputError(f"support of {name} has size {support.size}; need {r} < s < {n}")
            outside = np.ones(n, dtype=bool)
            outside[support] = False
            if np.any(basis[outside] != 0):
                raise InputError(f"{name} has nonzero rows outside its support")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def r(self):
        return self.u.shape[1]

    @property
    def n1(self):
        return self.u.shape[0]

    @property
    def n2(self):
        return self.v.shape[0]

    def matrix(self, q=None):
        """``U Q V^T`` (``Q = I`` by default)."""
        if q is None:
            return self.u @ self.v.T
        return self.u @ np.asarray(q) @ self.v.T


def _bilinear(abar, bbar):
    return np.einsum("ij,ij->i", abar, bbar)


@dataclass(frozen=True)
class LinkModel:
    """Link ``f`` and noise channel producing ``y`` from ``(U^T a, V^T b)``.

    kinds
        ``bilinear_gaussian``: ``y = <U^T a, V^T b> + N(0, sigma_z^2)``;
        ``bilinear_noiseless``: ``y = <U^T a, V^T b>``;
        ``binary_exp``: ``y ~ Ber(exp(-||U^T a - V^T b||^2))``;
        ``indicator``: ``y ~ Ber(epsilon + (1 - 2 epsilon) 1{g > 0})`` with
        ``g`` the bilinear form unless given;
        ``even_poly``: ``y = sum_j (U^T a)_j^2 (V^T b)_j^2``.
    """

    kind: str
    r: int
    sigma_z: float = 1.0
    epsilon: float = 0.0
    g: Callable | None = None

    def __post_init__(self):
        if self.kind not in LINK_KINDS:
            raise InputError(f"unknown link kind {self.kind!r}; expected one of {LINK_KINDS}")
        if int(self.r) < 1:
            raise InputError(f"r must be >= 1, got {self.r}")
        if not self.sigma_z >= 0:
            raise InputError(f"sigma_z must be >= 0, got {self.sigma_z}")
        if not 0 <= self.epsilon < 0.5:
            raise InputError(f"epsilon must lie in [0, 1/2), got {self.epsilon}")

    def mean(self, abar, bbar):
        """Conditional mean ``mu = f(abar, bbar)`` row by row."""
        abar = np.atleast_2d(abar)
        bbar = np.atleast_2d(bbar)
        if self.kind in ("bilinear_gaussian", "bilinear_noiseless"):
            return _bilinear(abar, bbar)
        if self.kind == "binary_exp":
            return np.exp(-np.sum((abar - bbar) ** 2, axis=1))
        if self.kind == "indicator":
            g = _bilinear(abar, bbar) if self.g is None else np.asarray(self.g(abar, bbar))
            return self.epsilon + (1 - 2 * self.epsilon) * (g > 0)
        return np.einsum("ij,ij->i", abar**2, bbar**2)

    def respond(self, abar, bbar, rng):
        mu = self.mean(abar, bbar)
        if self.kind == "bilinear_gaussian":
            return mu + self.sigma_z * rng.standard_normal(mu.shape[0])
        if self.kind in ("binary_exp", "indicator"):
            return (rng.random(mu.shape[0]) < mu).astype(float)
        return mu

    @property
    def conditional_variance_bound(self):
        """Tightest constant bound on ``Var[y | a, b]``."""
        if self.kind == "bilinear_gaussian":
            return self.sigma_z**2
        if self.kind in ("binary_exp", "indicator"):
            return 0.25
        return 0.0

    def to_dict(self):
        if self.g is not None:
            raise InputError("a link with a custom g cannot be serialized")
        out = {"kind": self.kind, "r": int(self.r)}
        if self.kind == "bilinear_gaussian":
            out["sigma_z"] = float(self.sigma_z)
        if self.kind == "indicator":
            out["epsilon"] = float(self.epsilon)
        return out

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"kind", "r", "sigma_z", "epsilon"}
        if unknown:
            raise InputError(f"unknown link fields {sorted(unknown)}")
        return cls(d["kind"], int(d["r"]), float(d.get("sigma_z", 1.0)), float(d.get("epsilon", 0.0)))


@dataclass(frozen=True)
class FeatureDistribution:
    """Distribution of the feature vectors ``a`` and ``b``.

    ``gaussian_iso`` draws ``N(0, I)``, or ``N(mean, cov)`` when ``moments``
    is given. ``uniform_sqrt3`` draws i.i.d. ``U(-sqrt 3, sqrt 3)`` entries and
    ``poisson_norm`` i.i.d. ``(Poisson(4) - 4) / 2`` entries; both have zero
    mean and unit variance. ``correlated_gaussian`` draws ``a`` and ``b``
    jointly Gaussian with unit marginals and ``cov(a_k, b_k) = rho`` on the
    first ``min(n1, n2)`` coordinates.
    """

    kind: str = "gaussian_iso"
    rho: float = DEFAULT_RHO
    moments: MomentSpec | None = None

    def __post_init__(self):
        if self.kind not in DIST_KINDS:
            raise InputError(f"unknown distribution kind {self.kind!r}; expected one of {DIST_KINDS}")
        if not abs(self.rho) < 1:
            raise InputError(f"rho must satisfy |rho| < 1, got {self.rho}")
        if self.moments is not None and self.kind != "gaussian_iso":
            raise InputError("moments are only supported for gaussian_iso features")

    def sample(self, rng, m, n1, n2):
        if self.kind == "uniform_sqrt3":
            h = np.sqrt(3.0)
            return rng.uniform(-h, h, (m, n1)), rng.uniform(-h, h, (m, n2))
        if self.kind == "poisson_norm":
            scale = np.sqrt(POISSON_LAMBDA)
            a = (rng.poisson(POISSON_LAMBDA, (m, n1)) - POISSON_LAMBDA) / scale
            b = (rng.poisson(POISSON_LAMBDA, (m, n2)) - POISSON_LAMBDA) / scale
            return a, b
        a = rng.standard_normal((m, n1))
        b = rng.standard_normal((m, n2))
        if self.kind == "correlated_gaussian":
            k = min(n1, n2)
            b[:, :k] *= np.sqrt(1 - self.rho**2)
            b[:, :k] += self.rho * a[:, :k]
        elif self.moments is not None:
            mom = self.moments
            if mom.mean1.size != n1 or mom.mean2.size != n2:
                raise DimensionError("moments do not match the feature dimensions", "n1")
            a = a @ mom.chol1.T + mom.mean1
            b = b @ mom.chol2.T + mom.mean2
        return a, b

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "correlated_gaussian":
            out["rho"] = float(self.rho)
        if self.moments is not None:
            out["moments"] = {
                "mean1": self.moments.mean1.tolist(),
                "mean2": self.moments.mean2.tolist(),
                "cov1": self.moments.cov1.tolist(),
                "cov2": self.moments.cov2.tolist(),
            }
        return out

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"kind", "rho", "moments"}
        if unknown:
            raise InputError(f"unknown distribution fields {sorted(unknown)}")
        moments = d.get("moments")
        if moments is not None:
            moments = MomentSpec(**{k: np.asarray(moments[k], dtype=float) for k in ("mean1", "mean2", "cov1", "cov2")})
        return cls(d.get("kind", "gaussian_iso"), float(d.get("rho", DEFAULT_RHO)), moments)


def _orthonormal(rng, n, r):
    q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    return q


def _sparse_orthonormal(rng, n, r, s):
    support = np.sort(rng.choice(n, size=s, replace=False))
    out = np.zeros((n, r))
    out[support] = _orthonormal(rng, s, r)
    return out, support


def sample_problem(n1, n2, r, s1=None, s2=None, seed=None):
    """Draw a planted pair of orthonormal embeddings.

    Dense: orthonormalize Gaussian ``n x r`` matrices. Sparse (both ``s1``
    and ``s2`` given): pick uniform random row supports, fill them with
    Gaussians and orthonormalize the supported block.
    """
    if not 1 <= r <= min(n1, n2):
        raise InputError(f"need 1 <= r <= min(n1, n2); got r={r}, n1={n1}, n2={n2}")
    if (s1 is None) != (s2 is None):
        raise InputError("give both s1 and s2 for a sparse problem, or neither")
    rng = np.random.default_rng(seed)
    if s1 is None:
        return EmbeddingPair(_orthonormal(rng, n1, r), _orthonormal(rng, n2, r))
    if not (r < s1 < n1 and r < s2 < n2):
        raise InputError(f"sparse problem needs r < s1 < n1 and r < s2 < n2; got r={r}, s1={s1}, n1={n1}, s2={s2}, n2={n2}")
    u, supp_u = _sparse_orthonormal(rng, n1, r, s1)
    v, supp_v = _sparse_orthonormal(rng, n2, r, s2)
    return EmbeddingPair(u, v, supp_u, supp_v)


def responses(embedding, link, a, b, seed=None):
    """Responses ``y`` for given feature rows ``a`` and ``b``."""
    if link.r != embedding.r:
        raise DimensionError(f"link has r={link.r} but embedding has r={embedding.r}", "r")
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    return link.respond(a @ embedding.u, b @ embedding.v, np.random.default_rng(seed))


def generate_samples(embedding, link, dist, m, seed=None):
    """Draw ``m`` i.i.d. triples ``(a_i, b_i, y_i)`` from the planted model."""
    if m < 1:
        raise InputError(f"m must be >= 1, got {m}")
    if link.r != embedding.r:
        raise DimensionError(f"link has r={link.r} but embedding has r={embedding.r}", "r")
    rng = np.random.default_rng(seed)
    a, b = dist.sample(rng, m, embedding.n1, embedding.n2)
    y = link.respond(a @ embedding.u, b @ embedding.v, rng)
    return SampleSet(a, b, y)


@dataclass(frozen=True)
class TailReport:
    """Exponential tail fit ``log P[|y| >= t] ~ log C_hat - c_hat t``.

    ``curvature`` is the quadratic coefficient of log-survival against ``t``
    rescaled to [0, 1] over the fit window; the curve bows above its chord
    by ``curvature / 4`` at the midpoint. ``bounded`` marks samples whose
    largest ``|y|`` is an atom carrying at least ``10/m`` of the mass.
    """

    c_hat: float
    C_hat: float
    passed: bool
    curvature: float
    bounded: bool
    n_points: int


# curvature above this means the log-survival bows up by more than 0.25
MAX_CURVATURE = 1.0


def check_light_tail(y, grid):
    """Diagnose the light-tail condition ``P[|y| >= t] <= C exp(-c t)``.

    The fit uses grid points whose empirical survival is at least ``10/m``.
    Passes when the fitted rate is positive and the log-survival shows no
    upward bow (``curvature <= MAX_CURVATURE``), or when ``|y|`` is bounded
    with an atom at its maximum.
    """
    y = np.abs(np.asarray(y, dtype=float).ravel())
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise InputError("grid of t values is empty")
    if y.size == 0:
        raise InputError("y is empty")
    m = y.size
    ys = np.sort(y)
    survival = 1.0 - np.searchsorted(ys, grid, side="left") / m
    keep = survival >= 10.0 / m
    t, log_s = grid[keep], np.log(survival[keep])
    if np.unique(t).size < 2:
        raise InputError("fewer than two grid points have survival >= 10/m; extend or refine the grid")
    slope, intercept = np.polyfit(t, log_s, 1)
    curvature = 0.0
    if np.unique(t).size >= 3:
        scaled = (t - t.min()) / (t.max() - t.min())
        curvature = float(np.polyfit(scaled, log_s, 2)[0])
    bounded = np.count_nonzero(y == ys[-1]) >= 10
    c_hat = -float(slope)
    passed = bool(bounded or (c_hat > 0 and curvature <= MAX_CURVATURE))
    return TailReport(c_hat, float(np.exp(intercept)), passed, curvature, bool(bounded), int(keep.sum()))
