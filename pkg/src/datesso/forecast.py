"""ARFIMA(p, d, q) workload forecasting.

The memory parameter comes from the GPH log-periodogram regression, the ARMA
part from Hannan-Rissanen two-stage least squares on the fractionally
differenced, demeaned series. Forecasts iterate the ARMA recursion and undo
the differencing with the same truncated weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

MAX_WEIGHTS = 1000
D_LIMIT = 0.499
# two-sided 5% critical value for keeping a GPH estimate
D_SIGNIFICANCE = 1.959963984540054


class ForecastError(RuntimeError):
    pass


@dataclass(frozen=True)
class ForecastModel:
    p: int
    q: int
    d: float
    phi: tuple[float, ...]
    theta: tuple[float, ...]
    training_mean: float
    frac_weights: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    sigma2: float = 0.0
    aic: float = 0.0
    n_obs: int = 0

    @property
    def truncation(self) -> int:
        return int(self.frac_weights.size)


def frac_weights(d: float, k: int) -> np.ndarray:
    """First ``k`` binomial weights of (1 - B)^d."""
    w = np.empty(k, dtype=np.float64)
    if k == 0:
        return w
    w[0] = 1.0
    for j in range(1, k):
        w[j] = w[j - 1] * (j - 1 - d) / j
    return w


def frac_diff(series, d: float) -> np.ndarray:
    if not abs(d) < 0.5:
        raise ValueError(f"d must lie in (-0.5, 0.5), got {d}")
    x = np.asarray(series, dtype=np.float64)
    k = min(x.size, MAX_WEIGHTS)
    return kernels.frac_filter(x, frac_weights(d, k))


def _gph_regressor(n: int) -> np.ndarray:
    m = int(math.floor(math.sqrt(n)))
    lam = 2.0 * math.pi * np.arange(1, m + 1) / n
    return -np.log(4.0 * np.sin(lam / 2.0) ** 2)


def gph_standard_error(n: int) -> float:
    """Asymptotic standard error of the GPH slope: sqrt(pi^2 / 6 / Sxx)."""
    r = _gph_regressor(n)
    r = r - r.mean()
    return math.sqrt(math.pi**2 / 6.0 / float(r @ r))


def estimate_d(series) -> float:
    """GPH estimate of the memory parameter over the first floor(sqrt(n)) Fourier frequencies."""
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if n < 64:
        raise ForecastError(f"need at least 64 observations to estimate d, got {n}")
    x = x - x.mean()
    if not np.any(np.abs(x) > 1e-12 * max(1.0, float(np.max(np.abs(series))))):
        raise ForecastError("degenerate series: constant values")
    regressor = _gph_regressor(n)
    m = regressor.size
    coef = np.fft.rfft(x)[1 : m + 1]
    periodogram = (coef.real**2 + coef.imag**2) / (2.0 * math.pi * n)
    if np.any(periodogram <= 0):
        raise ForecastError("degenerate series: zero periodogram ordinate")
    response = np.log(periodogram)
    rc = regressor - regressor.mean()
    slope = float(rc @ (response - response.mean()) / (rc @ rc))
    return min(max(slope, -D_LIMIT), D_LIMIT)


def _lag_matrix(v: np.ndarray, lags: int, start: int) -> np.ndarray:
    return np.column_stack([v[start - i : v.size - i] for i in range(1, lags + 1)])


def _check_roots(coefs: np.ndarray, sign: float, what: str) -> None:
    if coefs.size == 0:
        return
    # polynomial 1 + sign*(c1 z + c2 z^2 + ...), highest degree first for np.roots
    poly = np.concatenate((sign * coefs[::-1], [1.0]))
    roots = np.roots(poly)
    if roots.size and np.min(np.abs(roots)) <= 1.0 + 1e-8:
        raise ForecastError(
            f"{what} polynomial has root(s) on or inside the unit circle: "
            f"min |root| = {np.min(np.abs(roots)):.4f}, coefficients {np.round(coefs, 4).tolist()}"
        )


def _hannan_rissanen(y: np.ndarray, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    n = y.size
    if p == 0 and q == 0:
        return np.zeros(0), np.zeros(0)
    if q == 0:
        X = _lag_matrix(y, p, p)
        coef, *_ = np.linalg.lstsq(X, y[p:], rcond=None)
        return coef, np.zeros(0)
    long_order = min(max(p + q + 5, int(math.ceil(10 * math.log10(n)))), n // 4)
    X = _lag_matrix(y, long_order, long_order)
    a, *_ = np.linalg.lstsq(X, y[long_order:], rcond=None)
    ehat = np.zeros(n)
    ehat[long_order:] = y[long_order:] - X @ a
    start = long_order + max(p, q)
    cols = []
    if p:
        cols.append(_lag_matrix(y, p, start))
    cols.append(_lag_matrix(ehat, q, start))
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), y[start:], rcond=None)
    return coef[:p], coef[p:]


def memory_parameter(series) -> float:
    """GPH estimate, set to 0 unless it differs significantly from short memory.

    Without the test a spurious d on short-memory data gets compensated by the
    ARMA terms, which inflates the selected orders.
    """
    d = estimate_d(series)
    if abs(d) < D_SIGNIFICANCE * gph_standard_error(np.asarray(series).size):
        return 0.0
    return d


def fit(series, p: int = 0, q: int = 0, d: float | None = None) -> ForecastModel:
    """ARFIMA(p, d, q) fit; ``d`` defaults to :func:`memory_parameter` of the series."""
    x = np.asarray(series, dtype=np.float64)
    if p < 0 or q < 0:
        raise ValueError("orders must be non-negative")
    need = max(10 * (p + q + 1), 64)
    if x.size < need:
        raise ForecastError(f"series too short for ARFIMA({p},d,{q}): {x.size} < {need}")
    mean = float(x.mean())
    if d is None:
        d = memory_parameter(x)
    elif not abs(d) < 0.5:
        raise ValueError(f"d must lie in (-0.5, 0.5), got {d}")
    weights = frac_weights(d, min(x.size, MAX_WEIGHTS))
    y = kernels.frac_filter(x - mean, weights)
    phi, theta = _hannan_rissanen(y, p, q)
    _check_roots(phi, -1.0, "AR")
    _check_roots(theta, 1.0, "MA")
    resid = kernels.arma_residuals(y, phi, theta)
    used = resid[max(p, q):]
    sigma2 = float(used @ used / used.size)
    if not sigma2 > 0:
        raise ForecastError("degenerate fit: zero residual variance")
    aic = used.size * math.log(sigma2) + 2 * (p + q + 1)
    return ForecastModel(
        p=p,
        q=q,
        d=d,
        phi=tuple(float(c) for c in phi),
        theta=tuple(float(c) for c in theta),
        training_mean=mean,
        frac_weights=weights,
        residuals=resid[-MAX_WEIGHTS:].copy(),
        sigma2=sigma2,
        aic=aic,
        n_obs=int(x.size),
    )


def select_order(series, p_max: int = 2, q_max: int = 2) -> tuple[int, int]:
    """Grid search minimizing AIC; ties go to smaller p+q, then smaller p."""
    if p_max > 3 or q_max > 3 or p_max < 0 or q_max < 0:
        raise ValueError("p_max and q_max must lie in [0, 3]")
    scored = []
    errors = []
    for p in range(p_max + 1):
        for q in range(q_max + 1):
            try:
                m = fit(series, p, q)
            except ForecastError as exc:
                errors.append(f"({p},{q}): {exc}")
                continue
            scored.append((m.aic, p + q, p, q))
    if not scored:
        raise ForecastError("no candidate order could be fitted; " + "; ".join(errors))
    best = min(scored)
    return best[2], best[3]


def _state(model: ForecastModel, history: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    z = history - model.training_mean
    y = kernels.frac_filter(z, model.frac_weights)
    e = kernels.arma_residuals(y, np.asarray(model.phi), np.asarray(model.theta))
    return z, y, e


def forecast(model: ForecastModel, history, h: int) -> np.ndarray:
    """Iterated h-step forecast from the end of ``history``; values clamped at 0."""
    if h < 1:
        raise ValueError("h must be >= 1")
    x = np.asarray(history, dtype=np.float64)
    need = max(model.p, model.q, model.truncation)
    if x.size < need:
        raise ValueError(f"history needs at least {need} observations, got {x.size}")
    z, y, e = _state(model, x)
    n = x.size
    w = model.frac_weights
    k = w.size
    y_ext = np.concatenate((y, np.zeros(h)))
    e_ext = np.concatenate((e, np.zeros(h)))
    z_ext = np.concatenate((z, np.zeros(h)))
    for j in range(h):
        t = n + j
        yhat = 0.0
        for i, c in enumerate(model.phi, start=1):
            yhat += c * y_ext[t - i]
        for i, c in enumerate(model.theta, start=1):
            yhat += c * e_ext[t - i]
        y_ext[t] = yhat
        lags = min(t, k - 1)
        z_ext[t] = yhat - w[1 : lags + 1] @ z_ext[t - lags : t][::-1]
    return np.maximum(z_ext[n:] + model.training_mean, 0.0)


def rolling_forecasts(model: ForecastModel, series, origins, h: int) -> np.ndarray:
    """Forecasts for many origins at once.

    Row ``i`` equals ``forecast(model, series[:origins[i] + 1], h)`` up to
    rounding; the differencing and residual recursions run once over the
    whole series instead of once per origin.
    """
    x = np.asarray(series, dtype=np.float64)
    o = np.asarray(origins, dtype=np.int64)
    if o.size == 0:
        return np.zeros((0, h))
    if o.min() + 1 < max(model.p, model.q, model.truncation):
        raise ValueError("every origin needs a full truncation window of history")
    stop = int(o.max()) + 1
    z, y, e = _state(model, x[:stop])
    w = model.frac_weights
    k = w.size
    p, q = model.p, model.q
    yhat = np.zeros((o.size, h))
    zhat = np.zeros((o.size, h))
    # contribution of realized history to the inverse filter at step j
    carried = [kernels.frac_filter(z, w[j:]) if j < k else np.zeros(stop) for j in range(1, h + 1)]
    for j in range(h):
        acc = np.zeros(o.size)
        for i in range(1, p + 1):
            acc += model.phi[i - 1] * (yhat[:, j - i] if i <= j else y[o + j + 1 - i])
        for i in range(1, q + 1):
            if i > j:
                acc += model.theta[i - 1] * e[o + j + 1 - i]
        yhat[:, j] = acc
        inv = acc - carried[j][o]
        for i in range(1, min(j, k - 1) + 1):
            inv -= w[i] * zhat[:, j - i]
        zhat[:, j] = inv
    return np.maximum(zhat + model.training_mean, 0.0)


def naive_forecasts(series, origins, h: int) -> np.ndarray:
    x = np.asarray(series, dtype=np.float64)
    return np.repeat(x[np.asarray(origins)][:, None], h, axis=1)


def round_workload(values) -> np.ndarray:
    """Half-up rounding of predicted workloads to integer request counts."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5).astype(np.int64)


@dataclass
class ForecastEvaluation:
    origins: np.ndarray
    actual: np.ndarray
    predicted: np.ndarray
    naive: np.ndarray
    orders: list[tuple[int, int]]

    def rmse(self, x: int | None = None) -> float:
        err = self.predicted - self.actual
        return float(np.sqrt(np.mean((err if x is None else err[:, x]) ** 2)))

    def mae(self, x: int | None = None) -> float:
        err = np.abs(self.predicted - self.actual)
        return float(np.mean(err if x is None else err[:, x]))

    def naive_rmse(self, x: int | None = None) -> float:
        err = self.naive - self.actual
        return float(np.sqrt(np.mean((err if x is None else err[:, x]) ** 2)))


def rolling_plan(train_end: int, stop: int, refit_every: int) -> list[tuple[int, int]]:
    """Blocks ``[start, end)`` of forecast origins sharing one fitted model."""
    if refit_every < 1:
        raise ValueError("refit_every must be >= 1")
    return [(s, min(s + refit_every, stop)) for s in range(train_end, stop, refit_every)]


def forecast_table(
    demand: np.ndarray,
    train_end: int,
    h: int,
    p_max: int = 2,
    q_max: int = 2,
    refit_every: int = 600,
    orders: list[tuple[int, int]] | None = None,
) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Forecasts for every origin ``t`` in ``[train_end - 1, T - 1)``.

    Returns an array of shape (T, h, N) with rows before ``train_end - 1`` left
    at nan, and the ARMA orders selected per abstract service on the training
    split. Models are refitted on the expanding history every ``refit_every``
    origins.
    """
    demand = np.asarray(demand, dtype=np.float64)
    horizon, n = demand.shape
    out = np.full((horizon, h, n), np.nan)
    if orders is None:
        orders = [select_order(demand[:train_end, x], p_max, q_max) for x in range(n)]
    first = max(train_end - 1, 0)
    for start, end in rolling_plan(first, horizon, refit_every):
        for x in range(n):
            model = fit(demand[: max(start + 1, train_end), x], *orders[x])
            origins = np.arange(start, end)
            out[start:end, :, x] = rolling_forecasts(model, demand[:, x], origins, h)
    return out, orders


def evaluate(
    demand: np.ndarray,
    train_end: int,
    p_max: int = 2,
    q_max: int = 2,
    refit_every: int = 600,
    h: int = 1,
) -> ForecastEvaluation:
    """One-origin-per-step evaluation over the test split, against a last-value predictor."""
    demand = np.asarray(demand, dtype=np.float64)
    horizon = demand.shape[0]
    if train_end < 64 or horizon - train_end < h:
        raise ForecastError(f"trace too short to split: {horizon} rows, {train_end} for training")
    table, orders = forecast_table(demand, train_end, h, p_max, q_max, refit_every)
    origins = np.arange(train_end - 1, horizon - h)
    predicted = table[origins, h - 1, :]
    actual = demand[origins + h, :]
    naive = demand[origins, :]
    return ForecastEvaluation(origins + h, actual, predicted, naive, orders)
