"""Subspace errors, Monte Carlo link constants and log-log slope fits."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError, NotOrthonormalError, NumericalError
from .synthetic import orthonormality_deviation

ORTHO_CHECK_TOL = 1e-8
# radicands in (-NEG_RADICAND_TOL, 0) are rounding noise and clamp to zero
NEG_RADICAND_TOL = 1e-10
MIN_MC_DRAWS = 10_000


def _check_basis(name, x):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D n x r array, got shape {x.shape}", name)
    dev = orthonormality_deviation(x)
    if dev > ORTHO_CHECK_TOL:
        raise NotOrthonormalError(f"{name} is not orthonormal: max |X^T X - I| = {dev:.3g}", dev)
    return x


def subspace_error(u_hat, u_true):
    """Residual ``||U_perp^T u_hat||_F`` of ``u_hat`` outside ``span(u_true)``.

    Equals ``sqrt(r - ||u_true^T u_hat||_F^2)``, whose radicand is checked
    for negativity; the value itself is the norm of the residual
    ``u_hat - u_true u_true^T u_hat``, which stays accurate near zero.
    Lies in ``[0, sqrt(r)]``.
    """
    u_hat = _check_basis("u_hat", u_hat)
    u_true = _check_basis("u_true", u_true)
    if u_hat.shape != u_true.shape:
        raise DimensionError(f"u_hat {u_hat.shape} and u_true {u_true.shape} differ in shape", "n")
    r = u_true.shape[1]
    overlap = u_true.T @ u_hat
    radicand = r - np.linalg.norm(overlap) ** 2
    if radicand < -NEG_RADICAND_TOL:
        raise NumericalError(f"negative radicand {radicand:.3g} in subspace error")
    resid = np.linalg.norm(u_hat - u_true @ overlap)
    return float(min(resid, np.sqrt(r)))


def nsee(estimate, truth):
    """Normalized subspace estimation error, in ``[0, 1]``.

    ``max(subspace_error(u_hat, U), subspace_error(v_hat, V)) / sqrt(r)``.
    """
    err_u = subspace_error(estimate.u_hat, truth.u)
    err_v = subspace_error(estimate.v_hat, truth.v)
    return max(err_u, err_v) / np.sqrt(truth.r)


@dataclass(frozen=True)
class LinkConstants:
    """Monte Carlo estimates of the link constants and their standard errors.

    ``q`` estimates ``E[abar f bbar^T]``; ``sigma2``, ``tau0_2``, ``tau1_2`` and
    ``tau2_2`` the second moments ``E||abar f bbar^T - Q||_F^2``, ``E f^2``,
    ``E||abar f||^2`` and ``E||bbar f||^2``. ``std_errors`` maps each field name
    to its standard error (an ``r x r`` array for ``q``).
    """

    q: np.ndarray
    sigma2: float
    tau0_2: float
    tau1_2: float
    tau2_2: float
    n_mc: int
    std_errors: dict

    @property
    def sigma_r(self):
        return float(np.linalg.svd(self.q, compute_uv=False)[-1])

    def to_dict(self):
        return {
            "q": self.q.tolist(),
            "sigma_r": self.sigma_r,
            "sigma2": self.sigma2,
            "tau0_2": self.tau0_2,
            "tau1_2": self.tau1_2,
            "tau2_2": self.tau2_2,
            "n_mc": self.n_mc,
            "std_errors": {k: np.asarray(v).tolist() for k, v in self.std_errors.items()},
        }


def link_constants_mc(link, r, n_mc, seed=None, chunk=250_000):
    """Estimate ``Q, sigma^2, tau_0^2, tau_1^2, tau_2^2`` by Monte Carlo.

    ``link`` is a :class:`~jointdr.synthetic.LinkModel` (its conditional mean
    is used) or any callable ``f(abar, bbar) -> (n,)`` acting row-wise on
    ``n x r`` arrays. ``sigma^2`` plugs in ``Q_hat`` from the same draws,
    which biases it by ``O(1/n_mc)``.
    """
    if n_mc < MIN_MC_DRAWS:
        raise InputError(f"n_mc must be at least {MIN_MC_DRAWS}, got {n_mc}")
    f = link.mean if hasattr(link, "mean") else link
    if hasattr(link, "r") and link.r != r:
        raise DimensionError(f"link has r={link.r} but r={r} was requested", "r")
    rng = np.random.default_rng(seed)

    # first pass: Q and the per-draw scalar moments
    q_sum = np.zeros((r, r))
    q_sq = np.zeros((r, r))
    draws = []
    for start in range(0, n_mc, chunk):
        size = min(chunk, n_mc - start)
        abar = rng.standard_normal((size, r))
        bbar = rng.standard_normal((size, r))
        fv = np.asarray(f(abar, bbar), dtype=float).reshape(size)
        if not np.isfinite(fv).all():
            raise NumericalError("link produced non-finite values; the constants are not finite")
        af = abar * fv[:, None]
        outer = af[:, :, None] * bbar[:, None, :]
        q_sum += outer.sum(axis=0)
        q_sq += (outer**2).sum(axis=0)
        draws.append((abar, bbar, fv))
    q = q_sum / n_mc
    q_se = np.sqrt(np.maximum(q_sq / n_mc - q**2, 0.0) / (n_mc - 1))

    stats = {"sigma2": [], "tau0_2": [], "tau1_2": [], "tau2_2": []}
    for abar, bbar, fv in draws:
        a2 = np.sum(abar**2, axis=1)
        b2 = np.sum(bbar**2, axis=1)
        cross = np.einsum("ij,jk,ik->i", abar, q, bbar)
        stats["sigma2"].append(fv**2 * a2 * b2 - 2 * fv * cross + np.sum(q**2))
        stats["tau0_2"].append(fv**2)
        stats["tau1_2"].append(fv**2 * a2)
        stats["tau2_2"].append(fv**2 * b2)
    means, ses = {}, {"q": q_se}
    for name, parts in stats.items():
        values = np.concatenate(parts)
        means[name] = float(values.mean())
        ses[name] = float(values.std(ddof=1) / np.sqrt(n_mc))
    return LinkConstants(q, n_mc=n_mc, std_errors=ses, **means)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float


def slope_fit(points):
    """Ordinary least-squares line through ``(x, y)`` pairs.

    Callers pass logarithms for log-log slopes. ``r2`` is 1 when ``y`` is
    constant and the fit is exact.
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InputError("points must be a sequence of (x, y) pairs")
    if not np.isfinite(pts).all():
        raise InputError("points contain NaN or Inf")
    x, y = pts[:, 0], pts[:, 1]
    if np.unique(x).size < 2:
        raise InputError("need at least two distinct x values for a slope")
    xc = x - x.mean()
    yc = y - y.mean()
    slope = float(xc @ yc / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean())
    ss_res = float(np.sum((yc - slope * xc) ** 2))
    ss_tot = float(yc @ yc)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(slope, intercept, r2)
