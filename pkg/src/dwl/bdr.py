"""Bayesian dimensionality reduction by coordinate-ascent variational inference.

Data ``x`` is ``D x N`` (columns are samples). The variational posterior is
factored over the projection ``Q`` (``D x R``), the latents ``Z``
(``R x N``) and the gamma-distributed precisions ``Phi`` of the prior on
``Q``. Two priors are supported:

``elementwise``
    one precision per entry of ``Q``;
``ard``
    one precision per column of ``Q``, shared across the ``D`` features.

One iteration updates the latents, then the precisions, then the
projection. After the loop the posterior mean of ``Q`` is orthonormalized
with a thin QR and data are projected onto that basis.
"""

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import numerics
from .errors import (
    BadConfigError,
    BadShapeError,
    DimMismatchError,
    NotSpdError,
    NumericalFailureError,
)


class Prior(str, Enum):
    ELEMENTWISE = "elementwise"
    ARD = "ard"


@dataclass(frozen=True)
class BdrConfig:
    """Hyperparameters of a BDR fit.

    ``sigma_z_sq`` defaults to 0.5: with the latent update's unit prior the
    posterior mean of ``Q`` has a non-zero fixed point only for
    ``sigma_z_sq < 1``, and 0.5 makes the column-scale recursion converge
    fastest. ``prune_threshold`` applies to the energy-scaled precision
    computed by :func:`pruning_statistic`.
    """

    r: int
    prior_mode: Prior = Prior.ARD
    sigma_z_sq: float = 0.5
    alpha_phi: float = 1.0
    beta_phi: float = 1.0
    max_iter: int = 200
    tol: float = 1e-4
    seed: int = 0
    center_data: bool = True
    prune_threshold: float = 1e4

    def __post_init__(self):
        object.__setattr__(self, "prior_mode", Prior(self.prior_mode))
        if int(self.r) != self.r or self.r < 1:
            raise BadConfigError(f"r must be a positive integer, got {self.r}")
        for name in ("sigma_z_sq", "alpha_phi", "beta_phi", "tol", "prune_threshold"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise BadConfigError(f"{name} must be positive, got {value}")
        if self.max_iter < 1:
            raise BadConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.seed < 0:
            raise BadConfigError("seed must be non-negative")

    def to_dict(self):
        d = dict(self.__dict__)
        d["prior_mode"] = self.prior_mode.value
        return d


@dataclass
class BdrState:
    """Variational posterior statistics for one CAVI run.

    ``phi_mean`` has shape ``(D, R)`` for the element-wise prior and
    ``(R,)`` for ARD. ``sigma_q`` stacks the ``R`` column covariances into a
    ``(R, D, D)`` array.
    """

    q_mu: np.ndarray
    sigma_q: np.ndarray
    phi_mean: np.ndarray
    z_mu: np.ndarray
    sigma_z: np.ndarray
    iteration: int = 0
    last_delta: float = np.inf


@dataclass
class FitReport:
    iterations_run: int
    converged: bool
    final_delta: float
    delta_history: list
    phi_final: np.ndarray


@dataclass
class BdrModel:
    """Frozen projector produced by :func:`bdr_fit`."""

    q_orth: np.ndarray
    r_upper: np.ndarray
    center: np.ndarray
    retained: list
    config: BdrConfig
    fit_report: FitReport = field(repr=False)

    @property
    def n_components(self):
        return self.q_orth.shape[1]

    def project(self, x_any):
        return bdr_project(self, x_any)


@dataclass(frozen=True)
class GramCache:
    """``X X^T`` and its eigen-decomposition, computed once per fit."""

    xxt: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray

    @classmethod
    def of(cls, x):
        xxt = x @ x.T
        xxt = 0.5 * (xxt + xxt.T)
        w, v = numerics.sym_eig(xxt)
        return cls(xxt, np.clip(w, 0.0, None), v)


def _validate(x, config):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise BadShapeError(f"data must be a D x N matrix, got shape {x.shape}")
    d, n = x.shape
    if n < 2:
        raise BadShapeError(f"need at least 2 samples, got {n}")
    if not np.all(np.isfinite(x)):
        raise BadShapeError("data contains non-finite values")
    if config.r > min(d, n):
        raise BadConfigError(f"r={config.r} exceeds min(D, N)={min(d, n)}")
    return x


def bdr_init(x, config, q_init=None):
    """Initial state: random ``Q`` mean, identity covariances, prior-mean precisions.

    ``q_init`` overrides the random draw (used by tests).
    """
    x = _validate(x, config)
    d, _ = x.shape
    r = config.r
    if q_init is None:
        rng = numerics.seeded_rng(config.seed)
        q_mu = numerics.gaussian_matrix(rng, d, r, 0.0, 1.0 / np.sqrt(d))
    else:
        q_mu = np.array(q_init, dtype=np.float64)
        if q_mu.shape != (d, r):
            raise BadShapeError(f"q_init must have shape {(d, r)}, got {q_mu.shape}")
    sigma_q = np.broadcast_to(np.eye(d), (r, d, d)).copy()
    prior_mean = config.alpha_phi * config.beta_phi
    if config.prior_mode is Prior.ARD:
        phi = np.full(r, prior_mean)
    else:
        phi = np.full((d, r), prior_mean)
    state = BdrState(q_mu, sigma_q, phi, np.zeros((r, x.shape[1])), np.eye(r))
    return update_latents(state, x, config)


def update_latents(state, x, config):
    """Gaussian posterior of the latents given the current ``Q`` mean."""
    q = state.q_mu
    s2 = config.sigma_z_sq
    precision = q.T @ q / s2 + np.eye(q.shape[1])
    try:
        factor = numerics.cholesky_factor(0.5 * (precision + precision.T))
    except NotSpdError as exc:
        raise NumericalFailureError("latent precision is not SPD") from exc
    sigma_z = numerics.spd_inverse(factor)
    z_mu = numerics.spd_solve(factor, q.T @ x) / s2
    return replace(state, z_mu=z_mu, sigma_z=sigma_z)


def update_precision_elementwise(state, config):
    """Gamma posterior mean of each entry's precision."""
    if config.prior_mode is not Prior.ELEMENTWISE:
        raise BadConfigError("prior_mode is not elementwise")
    shape = config.alpha_phi + 0.5
    sigma_diag = np.diagonal(state.sigma_q, axis1=1, axis2=2).T  # (D, R)
    scale = 1.0 / (1.0 / config.beta_phi + 0.5 * state.q_mu**2 + 0.5 * sigma_diag)
    return replace(state, phi_mean=shape * scale)


def update_precision_ard(state, config):
    """Gamma posterior mean of each column's shared precision."""
    if config.prior_mode is not Prior.ARD:
        raise BadConfigError("prior_mode is not ard")
    d = state.q_mu.shape[0]
    shape = config.alpha_phi + 0.5 * d
    energy = np.sum(state.q_mu**2, axis=0) + np.trace(state.sigma_q, axis1=1, axis2=2)
    scale = 1.0 / (1.0 / config.beta_phi + 0.5 * energy)
    return replace(state, phi_mean=shape * scale)


def update_precision(state, config):
    if config.prior_mode is Prior.ARD:
        return update_precision_ard(state, config)
    return update_precision_elementwise(state, config)


def update_projection(state, x, config, gram=None):
    """Gaussian posterior of each column of ``Q``.

    Element-wise mode does one Cholesky factorization per column. ARD mode
    reuses the eigenvectors of ``X X^T``: each column covariance is
    ``V diag(1 / (phi_s + lambda / sigma_z_sq)) V^T``.
    """
    if gram is None:
        gram = GramCache.of(x)
    s2 = config.sigma_z_sq
    d, r = state.q_mu.shape
    rhs = x @ state.z_mu.T / s2  # column s is X z^s / sigma_z^2
    q_mu = np.empty((d, r))
    sigma_q = np.empty((r, d, d))
    if config.prior_mode is Prior.ARD:
        v = gram.eigvecs
        for s in range(r):
            inv_eig = 1.0 / (state.phi_mean[s] + gram.eigvals / s2)
            if not np.all(np.isfinite(inv_eig)) or np.any(inv_eig <= 0):
                raise NumericalFailureError(f"projection precision for column {s} is not SPD")
            cov = (v * inv_eig) @ v.T
            sigma_q[s] = 0.5 * (cov + cov.T)
            q_mu[:, s] = v @ (inv_eig * (v.T @ rhs[:, s]))
    else:
        scaled = gram.xxt / s2
        for s in range(r):
            precision = scaled + np.diag(state.phi_mean[:, s])
            try:
                factor = numerics.cholesky_factor(precision)
            except NotSpdError as exc:
                raise NumericalFailureError(
                    f"projection precision for column {s} is not SPD") from exc
            sigma_q[s] = numerics.spd_inverse(factor)
            q_mu[:, s] = numerics.spd_solve(factor, rhs[:, s])
    if not np.all(np.isfinite(q_mu)):
        raise NumericalFailureError("non-finite projection mean")
    return replace(state, q_mu=q_mu, sigma_q=sigma_q)


def relative_change(new, old):
    num = np.linalg.norm(new - old)
    den = np.linalg.norm(old)
    if den == 0.0:
        return 0.0 if num == 0.0 else np.inf
    return float(num / den)


def cavi_step(state, x, config, gram=None):
    """One full update cycle: latents, precisions, projection."""
    if gram is None:
        gram = GramCache.of(x)
    new = update_latents(state, x, config)
    new = update_precision(new, config)
    new = update_projection(new, x, config, gram)
    new.iteration = state.iteration + 1
    new.last_delta = relative_change(new.q_mu, state.q_mu)
    return new


def run_cavi(x, config, q_init=None):
    """Iterate to convergence on already-prepared (centered) data.

    Returns the final state and a :class:`FitReport`. Convergence means the
    relative Frobenius change of the ``Q`` mean fell below ``config.tol``.
    """
    x = _validate(x, config)
    gram = GramCache.of(x)
    state = bdr_init(x, config, q_init=q_init)
    history = []
    converged = False
    for _ in range(config.max_iter):
        state = cavi_step(state, x, config, gram)
        history.append(state.last_delta)
        if state.last_delta < config.tol:
            converged = True
            break
    report = FitReport(
        iterations_run=len(history),
        converged=converged,
        final_delta=history[-1],
        delta_history=history,
        phi_final=state.phi_mean.copy(),
    )
    return state, report


def orthonormalize(q_mu):
    """Thin QR of the projection mean: ``q_mu = q_orth @ r_upper``."""
    return numerics.thin_qr(q_mu)


def pruning_statistic(q_mu, phi_mean):
    """Energy-scaled ARD precision per component.

    Components are ordered by ascending precision (most relevant first) and
    orthogonalized in that order. Each precision is divided by the squared
    share of new energy its column contributes, relative to the largest
    column norm. A column that is redundant with more relevant ones, or has
    vanished, gets an unbounded statistic. For orthogonal columns of equal
    norm the statistic equals the precision itself.
    """
    phi = np.asarray(phi_mean, dtype=np.float64)
    if phi.ndim == 2:
        phi = phi.mean(axis=0)
    norms = np.linalg.norm(q_mu, axis=0)
    largest = norms.max()
    if largest == 0.0:
        return np.full(phi.shape, np.inf)
    order = np.lexsort((-norms, phi))
    r = np.linalg.qr(q_mu[:, order], mode="r")
    novel = np.empty_like(phi)
    novel[order] = np.abs(np.diag(r)) / largest
    with np.errstate(divide="ignore"):
        return phi / novel**2


def ard_prune(state, threshold):
    """Indices of components to keep, ascending.

    A component survives when its :func:`pruning_statistic` is below
    ``threshold``. If none does, the one with the smallest statistic is
    kept (largest column norm on ties).
    """
    stat = pruning_statistic(state.q_mu, state.phi_mean)
    keep = [int(s) for s in np.flatnonzero(stat < threshold)]
    if not keep:
        # the component that would enter first as the threshold rises,
        # so the retained set stays monotone in the threshold
        norms = np.linalg.norm(state.q_mu, axis=0)
        keep = [int(np.lexsort((-norms, stat))[0])]
    return keep


def bdr_fit(x, config):
    """Fit a BDR projector to ``D x N`` data.

    Returns ``(model, report)``. In ARD mode irrelevant components are
    dropped before orthonormalization.

    Raises
    ------
    RankDeficientError
        If the retained projection mean is not of full column rank.
    """
    x = _validate(x, config)
    center = x.mean(axis=1) if config.center_data else np.zeros(x.shape[0])
    xc = x - center[:, None]
    state, report = run_cavi(xc, config)
    if config.prior_mode is Prior.ARD:
        retained = ard_prune(state, config.prune_threshold)
    else:
        retained = list(range(config.r))
    q_orth, r_upper = orthonormalize(state.q_mu[:, retained])
    model = BdrModel(q_orth, r_upper, center, retained, config, report)
    return model, report


def bdr_project(model, x_any):
    """Low-dimensional features ``(x - center)^T q_orth``, one row per sample."""
    x_any = np.asarray(x_any, dtype=np.float64)
    if x_any.ndim != 2 or x_any.shape[0] != model.q_orth.shape[0]:
        raise DimMismatchError(
            f"expected {model.q_orth.shape[0]} rows, got shape {x_any.shape}")
    return (x_any - model.center[:, None]).T @ model.q_orth


@dataclass
class PcaModel:
    """Centered linear projector onto the top principal axes."""

    basis: np.ndarray
    center: np.ndarray

    @property
    def n_components(self):
        return self.basis.shape[1]

    def project(self, x_any):
        x_any = np.asarray(x_any, dtype=np.float64)
        if x_any.ndim != 2 or x_any.shape[0] != self.basis.shape[0]:
            raise DimMismatchError(
                f"expected {self.basis.shape[0]} rows, got shape {x_any.shape}")
        return (x_any - self.center[:, None]).T @ self.basis


def pca_baseline(x, r):
    """Top-``r`` principal axes of ``D x N`` data as orthonormal columns.

    Axes are in descending eigenvalue order; each column is signed so its
    largest-magnitude entry is positive.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise BadShapeError(f"need a D x N matrix with N >= 2, got shape {x.shape}")
    d, n = x.shape
    if not 1 <= r <= min(d, n):
        raise BadShapeError(f"r={r} must lie in [1, min(D, N)={min(d, n)}]")
    xc = x - x.mean(axis=1, keepdims=True)
    cov = xc @ xc.T / (n - 1)
    _, vecs = numerics.sym_eig(0.5 * (cov + cov.T))
    basis = vecs[:, ::-1][:, :r].copy()
    pivot = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[pivot, np.arange(r)])
    return basis * np.where(signs == 0, 1.0, signs)


def pca_fit(x, r):
    x = np.asarray(x, dtype=np.float64)
    return PcaModel(pca_baseline(x, r), x.mean(axis=1))
