"""Lognormal similarity model and the analytic error, entropy and SNR results.

Both similarity populations are modelled through their distance,
``1 - similarity``, which is taken to be lognormal. In the similarity
domain this gives

    P(sim >= a) = Phi((ln(1 - a) - mu) / sigma)

for threshold ``a < 1``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate, optimize, special

from .features import pairwise_similarity


@dataclass(frozen=True)
class LognormalFit:
    mu: float
    sigma: float
    n: int = 0
    excluded: int = 0
    loglik: float | None = None
    ks: float | None = None

    @property
    def degenerate(self) -> bool:
        return self.sigma == 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "LognormalFit":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})

    # distributions in the similarity domain
    def sim_sf(self, a):
        """P(sim >= a)."""
        a = np.asarray(a, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log1p(-np.minimum(a, 1.0)) - self.mu) / self.sigma
        return np.where(a >= 1.0, 0.0, special.ndtr(z))

    def sim_cdf(self, a):
        """P(sim < a)."""
        return 1.0 - self.sim_sf(a)

    def sim_pdf(self, x):
        x = np.asarray(x, dtype=float)
        d = 1.0 - x
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(d) - self.mu) / self.sigma
            pdf = np.exp(-0.5 * z**2) / (d * self.sigma * math.sqrt(2 * math.pi))
        return np.where(d > 0, pdf, 0.0)


# values fitted to the measured 50-speaker population
PUBLISHED_SELF = LognormalFit(-3.17698, 0.546804)
PUBLISHED_CORR = LognormalFit(-0.457726, 0.178714)


def fit_lognormal(samples) -> LognormalFit:
    """Closed-form MLE of a lognormal: mean and population std of the logs."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("cannot fit an empty sample")
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise ValueError("lognormal samples must be positive and finite")
    logs = np.log(x)
    mu = float(logs.mean())
    sigma = float(logs.std())
    if sigma == 0.0:
        return LognormalFit(mu, 0.0, x.size)
    loglik = float(np.sum(-logs - np.log(sigma * math.sqrt(2 * math.pi))
                          - (logs - mu) ** 2 / (2 * sigma**2)))
    z = np.sort((logs - mu) / sigma)
    cdf = special.ndtr(z)
    n = z.size
    ks = float(max(np.max(np.arange(1, n + 1) / n - cdf), np.max(cdf - np.arange(n) / n)))
    return LognormalFit(mu, sigma, n, 0, loglik, ks)


def fit_similarities(sims) -> LognormalFit:
    """Fit ``1 - sim``; similarities >= 1 have no lognormal support and are counted out."""
    s = np.asarray(sims, dtype=float).ravel()
    keep = s < 1.0
    fit = fit_lognormal(1.0 - s[keep])
    return LognormalFit(fit.mu, fit.sigma, fit.n, int(np.count_nonzero(~keep)), fit.loglik, fit.ks)


@dataclass(frozen=True)
class ErrorModel:
    fit_self: LognormalFit
    fit_corr: LognormalFit

    @classmethod
    def published(cls) -> "ErrorModel":
        return cls(PUBLISHED_SELF, PUBLISHED_CORR)


def false_positive_rate(model: ErrorModel, alpha):
    """Chance a different device's feature reaches the threshold."""
    return model.fit_corr.sim_sf(alpha)[()]


def false_negative_rate(model: ErrorModel, alpha):
    """Chance a same-device feature falls short of the threshold."""
    return model.fit_self.sim_cdf(alpha)[()]


def total_error(model: ErrorModel, alpha):
    return false_positive_rate(model, alpha) + false_negative_rate(model, alpha)


def multi_sample_error(model: ErrorModel, alpha, k: int = 1):
    """Error of the unanimous k-sample rule with independent samples."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return false_positive_rate(model, alpha) ** k + false_negative_rate(model, alpha) ** k


def error_curve(model: ErrorModel, alphas, k: int = 1) -> np.ndarray:
    """Rows of (alpha, fp, fn, total) for the k-sample rule."""
    a = np.asarray(alphas, dtype=float)
    fp = model.fit_corr.sim_sf(a) ** k
    fn = model.fit_self.sim_cdf(a) ** k
    return np.column_stack([a, fp, fn, fp + fn])


def optimal_threshold(model: ErrorModel, k: int = 1, lo: float = 0.50, hi: float = 0.95,
                      step: float = 1e-3, tol: float = 1e-4) -> tuple[float, float]:
    """Grid search then golden-section refinement of the k-sample error."""
    grid = np.round(np.arange(lo, hi + step / 2, step), 12)
    err = error_curve(model, grid, k)[:, 3]
    i = int(np.argmin(err))
    a0 = grid[i]
    a_lo, a_hi = max(lo, a0 - step), min(hi, a0 + step)
    if a_lo < a0 < a_hi:
        res = optimize.minimize_scalar(lambda a: float(multi_sample_error(model, a, k)),
                                       bracket=(a_lo, a0, a_hi), method="golden", tol=tol)
        if lo <= res.x <= hi and res.fun <= err[i]:
            return float(res.x), float(res.fun)
    return float(a0), float(err[i])


def entropy_bits(error_rate) -> float:
    """Bits carried by the identity when 1/error_rate devices are distinguishable."""
    if not 0 < error_rate <= 1:
        raise ValueError(f"error rate must lie in (0, 1], got {error_rate}")
    return -math.log2(error_rate)


def neglected_fp_term(model: ErrorModel, alpha: float) -> float:
    """Integral over [alpha, 1] of f_corr(x) * F_self(x).

    The probability that another device's feature beats a genuine match
    that itself cleared the threshold.
    """
    if alpha >= 1.0:
        return 0.0
    f = lambda x: float(model.fit_corr.sim_pdf(x) * model.fit_self.sim_cdf(x))
    # the corr density lives near 1 - exp(mu); give quad that point when it is in range
    peak = 1.0 - math.exp(model.fit_corr.mu)
    points = [peak] if alpha < peak < 1.0 else None
    val, _ = integrate.quad(f, alpha, 1.0, points=points, limit=200, epsabs=1e-300)
    return float(val)


@dataclass(frozen=True)
class SnrRequirement:
    alpha: float
    linear: float
    db: float
    feasible: bool = True

    def to_dict(self) -> dict:
        db = self.db if math.isfinite(self.db) else ("-inf" if self.db < 0 else "inf")
        lin = self.linear if math.isfinite(self.linear) else "inf"
        return {"alpha": self.alpha, "linear": lin, "db": db, "feasible": self.feasible}


def snr_requirement(alpha: float) -> SnrRequirement:
    """Smallest in-band SNR |X|^2/|N|^2 at which noise alone keeps similarity above alpha.

    Assumes noise orthogonal to the signal. The bound is
    (1+4a+2a^2-4a^3+a^4) / (3-4a-2a^2+4a^3-a^4); the denominator factors
    as (1-a)^2 (3-a)(1+a), so it is infeasible for a >= 1. Below
    a = 1 - sqrt(2) any SNR suffices.
    """
    a = float(alpha)
    den = 3 - 4 * a - 2 * a**2 + 4 * a**3 - a**4
    if a >= 1.0 or den <= 0:
        return SnrRequirement(a, math.inf, math.inf, feasible=False)
    if 1 + 2 * a - a**2 <= 0:
        return SnrRequirement(a, 0.0, -math.inf)
    num = 1 + 4 * a + 2 * a**2 - 4 * a**3 + a**4
    lin = num / den
    return SnrRequirement(a, lin, 10 * math.log10(lin))


def similarity_under_noise(snr):
    """Similarity between X and X + N for orthogonal N with |X|^2/|N|^2 = snr."""
    snr = np.asarray(snr, dtype=float)
    ratio = np.sqrt(snr / (snr + 1.0))
    return (1.0 - np.sqrt(np.maximum(2.0 - 2.0 * ratio, 0.0)))[()]


def cross_similarities(vectors, labels, devices=None) -> np.ndarray:
    """All similarities between features of different devices.

    ``devices`` restricts the population to those labels.
    """
    vectors = np.asarray(vectors, dtype=float)
    labels = np.asarray(labels)
    if devices is not None:
        keep = np.isin(labels, list(devices))
        vectors, labels = vectors[keep], labels[keep]
    sims = pairwise_similarity(vectors)
    iu = np.triu_indices(len(labels), 1)
    diff = labels[iu[0]] != labels[iu[1]]
    return sims[iu][diff]


@dataclass(frozen=True)
class ScaleRow:
    devices: int
    fit: LognormalFit
    mu_spread: float = 0.0
    sigma_spread: float = 0.0


def scale_convergence(vectors, labels, sizes, seed=None, repeats: int = 1) -> list[ScaleRow]:
    """Refit the cross-device population using only the first m devices.

    Devices are taken in a seeded random order (sorted order when ``seed``
    is None). With ``repeats > 1`` the fit is averaged over that many
    orderings and ``mu_spread``/``sigma_spread`` give the mean absolute
    gap to the full-population fit. Fits come from per-device-pair sums of
    log distances, so each subset costs O(m^2).
    """
    vectors = np.asarray(vectors, dtype=float)
    labels = np.asarray(labels)
    devices, idx = np.unique(labels, return_inverse=True)
    n_dev = devices.size
    onehot = np.zeros((labels.size, n_dev))
    onehot[np.arange(labels.size), idx] = 1.0
    dist = 1.0 - pairwise_similarity(vectors)
    valid = dist > 0
    logd = np.log(np.where(valid, dist, 1.0))
    # block sums over device pairs; only off-diagonal blocks are cross pairs
    cnt = onehot.T @ valid.astype(float) @ onehot
    s1 = onehot.T @ logd @ onehot
    s2 = onehot.T @ (logd**2) @ onehot

    def fit(devs):
        sub = np.ix_(devs, devs)
        iu = np.triu_indices(len(devs), 1)
        n, a, b = cnt[sub][iu].sum(), s1[sub][iu].sum(), s2[sub][iu].sum()
        mu = a / n
        return mu, float(np.sqrt(max(b / n - mu**2, 0.0))), int(n)

    rng = np.random.default_rng(seed)
    orders = [np.arange(n_dev) if seed is None else rng.permutation(n_dev)]
    orders += [rng.permutation(n_dev) for _ in range(repeats - 1)]
    full_mu, full_sigma, _ = fit(np.arange(n_dev))
    rows = []
    for m in sizes:
        if not 2 <= m <= n_dev:
            raise ValueError(f"size {m} outside [2, {n_dev}]")
        fits = np.array([fit(order[:m])[:2] for order in orders])
        npairs = fit(orders[0][:m])[2]
        mu, sigma = fits.mean(axis=0)
        rows.append(ScaleRow(int(m), LognormalFit(float(mu), float(sigma), npairs),
                             float(np.mean(np.abs(fits[:, 0] - full_mu))),
                             float(np.mean(np.abs(fits[:, 1] - full_sigma)))))
    return rows
