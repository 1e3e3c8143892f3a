"""Tucker tensor autoregression with ridge shrinkage, fitted by ALS.

The model is ``Y = A + <X, B> + E`` where the contraction pairs every
non-sample mode of the regressor ``X`` with the leading modes of the
coefficient ``B``, and ``B`` carries a Tucker structure ``core x_d U_d``.
Fitting minimizes ``||Y - A - <X, B>||_F^2 + ridge * ||B||_F^2``; the
intercept is handled by mean-centering, and the penalty acts on the
reconstructed ``B``, not on the individual Tucker blocks.

Each ALS sweep updates the core and then every factor matrix in mode order.
Every update is the exact minimizer of the penalized objective in that block
with the others held fixed, so the objective trace is non-increasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .tensor_ops import (
    ModePairing,
    TuckerFactors,
    as_tensor,
    contract,
    mode_multiply,
    tucker_reconstruct,
    unfold,
)

# Above this coefficient size the closed-form initializer is skipped in
# favor of seeded random orthonormal factors.
_SPECTRAL_INIT_LIMIT = 200_000

# float budget per chunk of the factor-update design tensor; bounds memory
# when entity counts grow
_DESIGN_BUDGET = 1 << 24


class SingularSystemError(np.linalg.LinAlgError):
    """Normal equations are singular; raised with guidance to raise ridge."""


@dataclass(frozen=True)
class FitConfig:
    """Knobs of the ALS fit and of lambda selection."""

    max_sweeps: int = 200
    rel_tol: float = 1e-8
    lambda_grid: tuple = (0.0, 1.0, 5.0, 10.0, 20.0, 50.0)
    train_fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if not self.rel_tol > 0.0:
            raise ValueError("rel_tol must be > 0")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        grid = tuple(float(v) for v in self.lambda_grid)
        if any(v < 0.0 for v in grid):
            raise ValueError("lambda_grid values must be >= 0")
        object.__setattr__(self, "lambda_grid", grid)


@dataclass(frozen=True)
class FitReport:
    """Per-fit diagnostics; ``predicted_r2`` is NaN unless a test set was scored."""

    objective_trace: tuple
    converged: bool
    n_sweeps: int
    predicted_r2: float = float("nan")


@dataclass(frozen=True)
class TarModel:
    """Fitted tensor autoregression.

    ``coefficient`` reconstructs to shape ``(*regressor_dims, *response_dims)``;
    ``intercept`` has a leading broadcast mode of extent 1.  The training
    means are kept so out-of-sample R2 can center against the training set.
    """

    intercept: np.ndarray
    coefficient: TuckerFactors
    ridge: float
    ranks: tuple
    x_mean: np.ndarray
    y_mean: np.ndarray

    def __post_init__(self):
        if self.ridge < 0.0:
            raise ValueError("ridge must be >= 0")
        nx = self.x_mean.ndim
        shape = self.coefficient.shape
        if shape[:nx] != self.x_mean.shape or shape[nx:] != self.y_mean.shape:
            raise ValueError(
                f"coefficient shape {shape} does not match regressor dims "
                f"{self.x_mean.shape} + response dims {self.y_mean.shape}"
            )
        if self.intercept.shape != (1,) + self.y_mean.shape:
            raise ValueError("intercept must have shape (1, *response_dims)")

    def coefficient_tensor(self) -> np.ndarray:
        return tucker_reconstruct(self.coefficient)


def build_lagged_pairs(panel, lag: int):
    """Split a (T, ...) panel into aligned regressor/response tensors.

    ``X_t = panel[t]`` and ``Y_t = panel[t + lag]``, both with the sample
    index on mode 0 and ``T - lag`` samples.
    """
    panel = as_tensor(panel)
    t = panel.shape[0]
    if lag < 1:
        raise ValueError("lag must be >= 1")
    if lag >= t:
        raise ValueError(f"lag {lag} leaves no samples for a length-{t} panel")
    return panel[:-lag].copy(), panel[lag:].copy()


def resolve_ranks(ranks, dims) -> tuple:
    """Turn ``"full"`` or an explicit sequence into validated per-mode ranks."""
    dims = tuple(int(d) for d in dims)
    if isinstance(ranks, str):
        if ranks != "full":
            raise ValueError(f"unknown rank specification {ranks!r}")
        return dims
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(dims):
        raise ValueError(f"need {len(dims)} ranks, got {len(ranks)}")
    for r, d in zip(ranks, dims):
        if not 1 <= r <= d:
            raise ValueError(f"rank {r} outside [1, {d}]")
    return ranks


def _check_pair(x, y):
    x = as_tensor(x)
    y = as_tensor(y)
    if x.ndim < 2 or y.ndim < 2:
        raise ValueError("x and y need a sample mode plus at least one data mode")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"sample extents differ: {x.shape[0]} vs {y.shape[0]}")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise ValueError("x or y contains NaN or Inf")
    return x, y


def _solve_spd(a, rhs, context, ridge):
    """Solve a symmetric PSD system from a penalized least-squares block.

    With ``ridge == 0`` an ill-conditioned system is an error (the caller
    must raise lambda).  With ``ridge > 0`` a singular system still has
    consistent normal equations (flat directions of the block), so the
    minimum-norm solution is returned.
    """
    if ridge == 0.0:
        eig = np.linalg.eigvalsh(a)
        if eig[-1] <= 0.0 or eig[0] <= 1e-13 * eig[-1]:
            raise SingularSystemError(
                f"singular normal equations in {context} with lambda = 0; "
                "raise lambda to regularize"
            )
    try:
        cf = scipy.linalg.cho_factor(a, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        if ridge > 0.0:
            sol, _, _, _ = scipy.linalg.lstsq(a, rhs, check_finite=False)
            return sol
        raise SingularSystemError(
            f"singular normal equations in {context} with lambda = 0; "
            "raise lambda to regularize"
        ) from None
    return scipy.linalg.cho_solve(cf, rhs, check_finite=False)


def closed_form_fit(x, y, ridge: float) -> np.ndarray:
    """Full-rank ridge solution on the sample-mode unfoldings.

    Returns ``(Xc' Xc + ridge I)^-1 Xc' Yc`` where ``Xc, Yc`` are the
    mean-centered unfoldings; with full Tucker ranks the ALS fit converges to
    this matrix, which makes it the reference for equivalence checks.
    """
    x, y = _check_pair(x, y)
    if ridge < 0.0:
        raise ValueError("ridge must be >= 0")
    xu = x.reshape(x.shape[0], -1)
    yu = y.reshape(y.shape[0], -1)
    xc = xu - xu.mean(axis=0)
    yc = yu - yu.mean(axis=0)
    gram = xc.T @ xc
    if ridge > 0.0:
        gram = gram + ridge * np.eye(gram.shape[0])
    return _solve_spd(gram, xc.T @ yc, "closed_form_fit", ridge)


def _gram_chain(core, factors, skip):
    """Core multiplied by every factor Gram except ``skip`` along its mode."""
    out = core
    for d, u in enumerate(factors):
        if d != skip:
            out = mode_multiply(out, u.T @ u, d)
    return out


def _penalty_gram(core, factors, d):
    """R_d x R_d matrix M with ||B||_F^2 = tr(U_d M U_d') for factor d."""
    chained = _gram_chain(core, factors, skip=d)
    return unfold(chained, d) @ unfold(core, d).T


def _tucker_norm_sq(core, factors):
    chained = _gram_chain(core, factors, skip=-1)
    return float(np.tensordot(chained, core, axes=core.ndim))


def _apply_regressor_factors(xc, factors, n_reg, skip=-1):
    """Contract each regressor mode of xc with its factor (transposed)."""
    out = xc
    for k in range(n_reg):
        if k == skip:
            continue
        out = mode_multiply(out, factors[k].T, k + 1)
    return out


def _apply_response_factors(core, factors, n_reg, skip=-1):
    out = core
    for d in range(n_reg, core.ndim):
        if d == skip:
            continue
        out = mode_multiply(out, factors[d], d)
    return out


def _update_core(xc, yc, core_shape, factors, n_reg, ridge):
    n = xc.shape[0]
    r_left = int(np.prod(core_shape[:n_reg]))
    r_right = int(np.prod(core_shape[n_reg:]))
    z = _apply_regressor_factors(xc, factors, n_reg).reshape(n, r_left)
    y_t = yc
    for d in range(n_reg, len(core_shape)):
        y_t = mode_multiply(y_t, factors[d].T, d - n_reg + 1)
    y_t = y_t.reshape(n, r_right)

    lhs = z.T @ z
    if ridge > 0.0:
        m_left = np.eye(1)
        for k in range(n_reg):
            m_left = np.kron(m_left, factors[k].T @ factors[k])
        lhs = lhs + ridge * m_left
    gu = _solve_spd(lhs, z.T @ y_t, "core update", ridge)
    m_right = np.eye(1)
    for d in range(n_reg, len(core_shape)):
        m_right = np.kron(m_right, factors[d].T @ factors[d])
    gu = _solve_spd(m_right, gu.T, "core update", ridge).T
    return gu.reshape(core_shape)


def _update_regressor_factor(xc, yc, core, factors, k, ridge):
    n = xc.shape[0]
    n_reg = xc.ndim - 1
    i_d, r_d = factors[k].shape
    g_resp = _apply_response_factors(core, factors, n_reg)
    z_axes = [a + 1 for a in range(n_reg) if a != k]
    g_axes = [a for a in range(n_reg) if a != k]
    yu = yc.reshape(n, -1)
    q = yu.shape[1]

    dtd = np.zeros((i_d * r_d, i_d * r_d))
    rhs = np.zeros(i_d * r_d)
    chunk = max(1, min(n, _DESIGN_BUDGET // max(1, i_d * r_d * q)))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        z = _apply_regressor_factors(xc[lo:hi], factors, n_reg, skip=k)
        t1 = np.tensordot(z, g_resp, axes=(z_axes, g_axes))
        t1 = np.moveaxis(t1.reshape(hi - lo, i_d * r_d, q), 1, 0)
        t1 = np.ascontiguousarray(t1).reshape(i_d * r_d, -1)
        dtd += t1 @ t1.T
        rhs += t1 @ yu[lo:hi].reshape(-1)

    if ridge > 0.0:
        dtd = dtd + ridge * np.kron(np.eye(i_d), _penalty_gram(core, factors, k))
    sol = _solve_spd(dtd, rhs, f"factor {k} update", ridge)
    return sol.reshape(i_d, r_d)


def _update_response_factor(xc, yc, core, factors, d, ridge):
    n = xc.shape[0]
    n_reg = xc.ndim - 1
    m_local = d - n_reg
    r_d = factors[d].shape[1]
    z = _apply_regressor_factors(xc, factors, n_reg)
    c_partial = _apply_response_factors(core, factors, n_reg, skip=d)
    h = np.tensordot(z, c_partial, axes=(range(1, n_reg + 1), range(n_reg)))
    hm = np.moveaxis(h, 1 + m_local, -1).reshape(-1, r_d)
    ym = np.moveaxis(yc, 1 + m_local, -1).reshape(-1, yc.shape[1 + m_local])

    lhs = hm.T @ hm
    if ridge > 0.0:
        lhs = lhs + ridge * _penalty_gram(core, factors, d)
    sol = _solve_spd(lhs, hm.T @ ym, f"factor {d} update", ridge)
    return sol.T.copy()


def _init_factors(x, y, ranks, ridge, seed):
    n_reg = x.ndim - 1
    dims = x.shape[1:] + y.shape[1:]
    rng = np.random.default_rng(seed)
    p = int(np.prod(x.shape[1:]))
    q = int(np.prod(y.shape[1:]))
    b0 = None
    if p * q <= _SPECTRAL_INIT_LIMIT and x.shape[0] > 1:
        try:
            b0 = closed_form_fit(x, y, ridge).reshape(dims)
        except SingularSystemError:
            b0 = None
    factors = []
    for d, (extent, rank) in enumerate(zip(dims, ranks)):
        if b0 is not None:
            u, _, _ = np.linalg.svd(unfold(b0, d), full_matrices=False)
            factors.append(np.ascontiguousarray(u[:, :rank]))
        else:
            gauss = rng.standard_normal((extent, rank))
            qmat, _ = np.linalg.qr(gauss)
            factors.append(qmat)
    return factors


def als_fit(x, y, ranks, ridge: float, config: FitConfig | None = None):
    """Fit the penalized Tucker autoregression by alternating least squares.

    Parameters
    ----------
    x, y : arrays with the shared sample mode first.
    ranks : "full" or one rank per coefficient mode
        Coefficient modes are the non-sample modes of ``x`` followed by
        those of ``y``.
    ridge : nonnegative shrinkage weight on ``||B||_F^2``.
    config : FitConfig, optional.

    Returns
    -------
    (TarModel, FitReport)
    """
    x, y = _check_pair(x, y)
    if ridge < 0.0:
        raise ValueError("ridge must be >= 0")
    config = config or FitConfig()
    n_reg = x.ndim - 1
    dims = x.shape[1:] + y.shape[1:]
    ranks = resolve_ranks(ranks, dims)

    x_mean = x.mean(axis=0)
    y_mean = y.mean(axis=0)
    xc = x - x_mean
    yc = y - y_mean
    yc_flat = yc.reshape(yc.shape[0], -1)

    factors = _init_factors(x, y, ranks, ridge, config.seed)
    core = np.zeros(ranks)
    y_scale = float(np.sum(yc_flat * yc_flat)) + 1e-300
    # at full rank the factors are invertible, so the core update alone
    # already solves the whole ridge problem and factor sweeps are redundant
    # reparameterizations
    full_rank = ranks == dims

    trace = []
    converged = False
    for sweep in range(config.max_sweeps):
        core = _update_core(xc, yc, ranks, factors, n_reg, ridge)
        for d in () if full_rank else range(len(dims)):
            if d < n_reg:
                factors[d] = _update_regressor_factor(xc, yc, core, factors, d, ridge)
            else:
                factors[d] = _update_response_factor(xc, yc, core, factors, d, ridge)
        b = tucker_reconstruct(TuckerFactors(core, tuple(factors)))
        resid = yc_flat - xc.reshape(xc.shape[0], -1) @ b.reshape(-1, yc_flat.shape[1])
        obj = float(np.sum(resid * resid)) + ridge * float(np.sum(b * b))
        if not math.isfinite(obj):
            raise SingularSystemError(
                "ALS objective diverged; the problem is ill-posed, raise lambda"
            )
        trace.append(obj)
        scale = max(abs(trace[-2]), 1e-12 * y_scale) if sweep > 0 else None
        if sweep > 0 and abs(trace[-2] - obj) <= config.rel_tol * scale:
            converged = True
            break

    coefficient = TuckerFactors(core, tuple(factors))
    pairing = ModePairing(tuple(range(1, n_reg + 1)), tuple(range(n_reg)))
    intercept = y_mean[None] - contract(
        x_mean[None], tucker_reconstruct(coefficient), pairing
    )
    model = TarModel(
        intercept=intercept,
        coefficient=coefficient,
        ridge=float(ridge),
        ranks=ranks,
        x_mean=x_mean,
        y_mean=y_mean,
    )
    report = FitReport(
        objective_trace=tuple(trace),
        converged=converged,
        n_sweeps=len(trace),
    )
    return model, report


def predict(model: TarModel, x) -> np.ndarray:
    """``A + <X, B>`` with the intercept broadcast over the sample mode."""
    x = as_tensor(x)
    n_reg = model.x_mean.ndim
    if x.ndim != n_reg + 1 or x.shape[1:] != model.x_mean.shape:
        raise ValueError(
            f"regressor dims {x.shape[1:]} do not match model dims "
            f"{model.x_mean.shape}"
        )
    pairing = ModePairing(tuple(range(1, n_reg + 1)), tuple(range(n_reg)))
    return model.intercept + contract(x, model.coefficient_tensor(), pairing)


def predicted_r2(model: TarModel, x_test, y_test) -> float:
    """Out-of-sample R2 centered on the training-set mean stored in the model."""
    y_test = as_tensor(y_test)
    pred = predict(model, x_test)
    if pred.shape != y_test.shape:
        raise ValueError("y_test shape does not match predictions")
    rss = float(np.sum((y_test - pred) ** 2))
    tss = float(np.sum((y_test - model.y_mean[None]) ** 2))
    if tss <= 0.0:
        raise ValueError("zero total sum of squares on the test set")
    return 1.0 - rss / tss


def select_lambda(panel, ranks, config: FitConfig | None = None, lag: int = 1):
    """Pick the ridge weight by out-of-sample R2 on a chronological split.

    The first ``train_fraction`` of lagged sample pairs trains a model per
    grid value; the remainder scores it.  Returns ``(best_lambda, table)``
    where ``table`` maps each grid value to its predicted R2; ties go to the
    smaller lambda.
    """
    config = config or FitConfig()
    if not config.lambda_grid:
        raise ValueError("lambda_grid is empty")
    x, y = build_lagged_pairs(panel, lag)
    n = x.shape[0]
    n_train = int(n * config.train_fraction)
    if n_train < 1 or n_train >= n:
        raise ValueError(
            f"train_fraction {config.train_fraction} leaves an empty split "
            f"for {n} samples"
        )
    x_tr, y_tr = x[:n_train], y[:n_train]
    x_te, y_te = x[n_train:], y[n_train:]

    table = {}
    best_lambda = None
    best_r2 = -np.inf
    for lam in config.lambda_grid:
        model, _ = als_fit(x_tr, y_tr, ranks, lam, config)
        r2 = predicted_r2(model, x_te, y_te)
        table[lam] = r2
        if r2 > best_r2 or (r2 == best_r2 and lam < best_lambda):
            best_r2 = r2
            best_lambda = lam
    return best_lambda, table
