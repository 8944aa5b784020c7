"""Discriminative latent mixture clustering of curve coefficients (Fisher-EM).

The model DFM[Sigma_k, beta]: coefficients, centered on their mean, are a
Gaussian mixture whose cluster means and covariances live in a p = K-1
dimensional subspace spanned by an orthonormal U, plus isotropic noise of
variance beta in the orthogonal complement. Each iteration re-estimates U by
the Fisher criterion on the current soft partition (F-step), then the
mixture parameters (M-step) and the posteriors (E-step).
"""

import math
from typing import Optional

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import linalg
from scipy.special import logsumexp

from src.clustering.kmeans import lloyd_labels
from src.errors import ArgumentError, NumericFailure
from src.fda.curves import FourierBasis
from src.state.models import frozen_array
from src.state.seeds import derive_seed
from src.workers import ordered_map

logger = structlog.get_logger()

_DECREASE_TOLERANCE = 1e-8


class DfmConfig(BaseModel):
    """EM settings shared by every K."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    k_range: tuple[int, int] = Field(default=(2, 6), description="Inclusive range of K tried")
    em_tol: float = Field(default=1e-8, gt=0.0, description="Relative loglik change to stop")
    max_iter: int = Field(default=200, ge=1)
    restarts: int = Field(default=10, ge=1)
    ridge: float = Field(default=1e-6, gt=0.0, description="Added to latent covariances and S_W")
    beta_floor: float = Field(default=1e-8, gt=0.0, description="Lower bound on the noise variance")
    collapse_ratio: float = Field(
        default=1e-3, ge=0.0, description="Latent variance below this share of beta abandons a run"
    )

    @field_validator("k_range")
    @classmethod
    def _range(cls, v: tuple[int, int]) -> tuple[int, int]:
        lo, hi = v
        if lo < 2 or hi < lo:
            raise ValueError(f"expected 2 <= low <= high, got [{lo}, {hi}]")
        return v


class DfmModel(BaseModel):
    """A fitted discriminative latent mixture."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    K: int = Field(ge=2)
    orientation: np.ndarray = Field(description="U, d x p with orthonormal columns")
    proportions: np.ndarray
    means: np.ndarray = Field(description="Latent means, K x p")
    covariances: np.ndarray = Field(description="Latent covariances, K x p x p")
    beta: float = Field(gt=0.0)
    center: np.ndarray
    loglik: float
    bic: float
    responsibilities: np.ndarray
    n_iterations: int
    converged: bool
    loglik_trace: tuple[float, ...] = ()

    @field_validator(
        "orientation", "proportions", "means", "covariances", "center", "responsibilities",
        mode="before",
    )
    @classmethod
    def _array(cls, v) -> np.ndarray:
        return frozen_array(v, np.float64)

    @property
    def latent_dim(self) -> int:
        return self.K - 1

    @property
    def n_features(self) -> int:
        return self.orientation.shape[0]

    @property
    def labels(self) -> np.ndarray:
        return self.responsibilities.argmax(axis=1)

    def centroids(self) -> np.ndarray:
        """Cluster means in coefficient space, K x d."""
        return self.means @ self.orientation.T + self.center

    def centroid_curves(self, basis: FourierBasis) -> np.ndarray:
        """Cluster mean curves sampled on the basis, K x Q."""
        return basis.evaluate(self.centroids())


class BicRow(BaseModel):
    K: int
    loglik: Optional[float] = None
    bic: Optional[float] = None
    n_params: int
    status: str = Field(description="'ok' or 'degenerate'")


class _Params(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    U: np.ndarray
    pi: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    beta: float


def n_free_parameters(K: int, d: int) -> int:
    p = K - 1
    return (K - 1) + K * p + K * p * (p + 1) // 2 + 1 + (d * p - p * (p + 1) // 2)


def _log_joint(Z: np.ndarray, params: _Params) -> np.ndarray:
    """(n, K) log pi_k + log density of each centered point under component k."""
    n, d = Z.shape
    p = params.U.shape[1]
    proj = Z @ params.U
    resid = ((Z - proj @ params.U.T) ** 2).sum(axis=1)
    const = d * math.log(2 * math.pi) + (d - p) * math.log(params.beta)
    out = np.empty((n, len(params.pi)))
    for k in range(len(params.pi)):
        chol = linalg.cholesky(params.sigma[k], lower=True)
        white = linalg.solve_triangular(chol, (proj - params.mu[k]).T, lower=True)
        maha = (white**2).sum(axis=0)
        logdet = 2.0 * np.log(np.diag(chol)).sum()
        out[:, k] = math.log(params.pi[k]) - 0.5 * (maha + logdet + resid / params.beta + const)
    return out


def _posteriors(log_joint: np.ndarray) -> np.ndarray:
    t = np.exp(log_joint - logsumexp(log_joint, axis=1, keepdims=True))
    return t / t.sum(axis=1, keepdims=True)


def _m_step(Z: np.ndarray, t: np.ndarray, U: np.ndarray, cfg: DfmConfig) -> _Params:
    n, d = Z.shape
    p = U.shape[1]
    nk = t.sum(axis=0)
    proj = Z @ U
    mu = (t.T @ proj) / nk[:, None]
    sigma = np.empty((len(nk), p, p))
    for k in range(len(nk)):
        diff = proj - mu[k]
        sigma[k] = (diff * t[:, k:k + 1]).T @ diff / nk[k] + cfg.ridge * np.eye(p)
    resid = ((Z - proj @ U.T) ** 2).sum(axis=1)
    beta = max(float(resid.sum() / (n * (d - p))), cfg.beta_floor)
    return _Params(U=U, pi=nk / n, mu=mu, sigma=sigma, beta=beta)


def _fisher_orientation(Z: np.ndarray, t: np.ndarray, p: int, ridge: float) -> np.ndarray:
    """Top-p generalized eigenvectors of (S_B, S_W + ridge I), orthonormalized."""
    n, d = Z.shape
    nk = t.sum(axis=0)
    means = (t.T @ Z) / nk[:, None]
    between = (means.T * nk) @ means / n
    within = np.zeros((d, d))
    for k in range(len(nk)):
        diff = Z - means[k]
        within += (diff * t[:, k:k + 1]).T @ diff
    within = within / n + ridge * np.eye(d)
    _, vectors = linalg.eigh(between, within)
    q, r = np.linalg.qr(vectors[:, ::-1][:, :p])
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def _q_value(log_joint: np.ndarray, t: np.ndarray) -> float:
    return float((t * log_joint).sum())


def _degenerate(params: _Params, n: int, collapse_ratio: float) -> bool:
    """Too few curves in a cluster, or a cluster squeezed flat in the latent space."""
    p = params.U.shape[1]
    if np.any(params.pi * n < p + 1):
        return True
    smallest = np.linalg.eigvalsh(params.sigma)[:, 0]
    return bool(np.any(smallest < collapse_ratio * params.beta))


class _RunResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: _Params
    responsibilities: np.ndarray
    loglik: float
    trace: list[float]
    converged: bool


def _fem_run(Z: np.ndarray, K: int, cfg: DfmConfig, seed: int) -> Optional[_RunResult]:
    """One Fisher-EM run from a k-means partition; None when it degenerates."""
    n, _ = Z.shape
    p = K - 1
    labels = lloyd_labels(Z, K, np.random.default_rng(seed))
    t = np.eye(K)[labels]
    U_prev: Optional[np.ndarray] = None
    trace: list[float] = []
    converged = False

    for _ in range(cfg.max_iter):
        if np.any(t.sum(axis=0) < p + 1):
            return None
        U = _fisher_orientation(Z, t, p, cfg.ridge)
        params = _m_step(Z, t, U, cfg)
        if U_prev is not None:
            # keep the previous subspace when the Fisher one does not improve the EM objective
            kept = _m_step(Z, t, U_prev, cfg)
            if _q_value(_log_joint(Z, kept), t) > _q_value(_log_joint(Z, params), t):
                params = kept
        if _degenerate(params, n, cfg.collapse_ratio):
            return None

        log_joint = _log_joint(Z, params)
        loglik = float(logsumexp(log_joint, axis=1).sum())
        if trace and loglik < trace[-1] - _DECREASE_TOLERANCE * abs(trace[-1]):
            logger.warning("loglik decreased; run discarded", previous=trace[-1], current=loglik)
            return None
        trace.append(loglik)
        t = _posteriors(log_joint)
        U_prev = params.U
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < cfg.em_tol * abs(trace[-2]):
            converged = True
            break

    return _RunResult(params=params, responsibilities=t, loglik=trace[-1], trace=trace, converged=converged)


def _check_sizes(n: int, d: int, K: int) -> None:
    if K < 2:
        raise ArgumentError(f"K must be at least 2, got {K}")
    if d <= K - 1:
        raise ArgumentError(f"coefficient dimension {d} must exceed K-1 = {K - 1}")
    if n <= K:
        raise ArgumentError(f"need more than K={K} curves, got {n}")


def dfm_fit(
    coeffs: np.ndarray, K: int, cfg: DfmConfig, seed: int, workers: int = 1
) -> DfmModel:
    """Best of ``cfg.restarts`` Fisher-EM runs for a fixed K.

    Args:
        coeffs: (n, d) coefficient vectors
        K: Number of clusters; the latent dimension is K-1
        cfg: EM settings
        seed: Master seed; run r uses the seed derived from (K, r)

    Raises:
        ArgumentError: d <= K-1 or n <= K
        NumericFailure: every restart degenerated
    """
    X = np.asarray(coeffs, dtype=np.float64)
    if X.ndim != 2:
        raise ArgumentError("coefficients must be an (n, d) matrix")
    n, d = X.shape
    _check_sizes(n, d, K)
    center = X.mean(axis=0)
    Z = X - center

    runs = ordered_map(
        lambda r: _fem_run(Z, K, cfg, derive_seed(seed, "dfm", K, r)), range(cfg.restarts), workers
    )
    valid = [(r, run) for r, run in enumerate(runs) if run is not None]
    if not valid:
        raise NumericFailure(f"all {cfg.restarts} restarts degenerated for K={K}")
    _, best = max(valid, key=lambda item: (item[1].loglik, -item[0]))
    if len(valid) < cfg.restarts:
        logger.info("degenerate restarts", K=K, degenerate=cfg.restarts - len(valid))

    nu = n_free_parameters(K, d)
    params = best.params
    return DfmModel(
        K=K,
        orientation=params.U,
        proportions=params.pi,
        means=params.mu,
        covariances=params.sigma,
        beta=params.beta,
        center=center,
        loglik=best.loglik,
        bic=best.loglik - nu / 2 * math.log(n),
        responsibilities=best.responsibilities,
        n_iterations=len(best.trace),
        converged=best.converged,
        loglik_trace=tuple(best.trace),
    )


def dfm_select(
    coeffs: np.ndarray,
    cfg: DfmConfig,
    seed: int,
    workers: int = 1,
    k_range: Optional[tuple[int, int]] = None,
) -> tuple[DfmModel, list[BicRow]]:
    """Fit every K in range and keep the largest BIC.

    A K whose restarts all degenerate is recorded in the table and skipped.

    Returns:
        (best model, one BicRow per K)

    Raises:
        ArgumentError: empty range, or a K violating the dfm_fit preconditions
        NumericFailure: every K degenerated
    """
    lo, hi = k_range or cfg.k_range
    if lo > hi:
        raise ArgumentError(f"K range [{lo}, {hi}] is empty")
    X = np.asarray(coeffs, dtype=np.float64)
    n, d = X.shape
    for K in range(lo, hi + 1):
        _check_sizes(n, d, K)

    table: list[BicRow] = []
    models: list[DfmModel] = []
    for K in range(lo, hi + 1):
        try:
            model = dfm_fit(X, K, cfg, seed, workers)
        except NumericFailure:
            table.append(BicRow(K=K, n_params=n_free_parameters(K, d), status="degenerate"))
            continue
        models.append(model)
        table.append(
            BicRow(K=K, loglik=model.loglik, bic=model.bic, n_params=n_free_parameters(K, d), status="ok")
        )
    if not models:
        raise NumericFailure(f"every K in [{lo}, {hi}] degenerated")
    best = max(models, key=lambda m: (m.bic, -m.K))
    logger.info("dfm selected", K=best.K, bic=round(best.bic, 3), bic_convention="larger is better")
    return best, table


def predict_posterior(model: DfmModel, coeff: np.ndarray) -> np.ndarray:
    """Posterior cluster probabilities of one coefficient vector."""
    x = np.asarray(coeff, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise ArgumentError(f"expected a vector of length {model.n_features}, got shape {x.shape}")
    params = _Params(
        U=model.orientation,
        pi=model.proportions,
        mu=model.means,
        sigma=model.covariances,
        beta=model.beta,
    )
    return _posteriors(_log_joint((x - model.center)[None], params))[0]
