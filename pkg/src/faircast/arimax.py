"""Model 2: ARMAX(p, d, q) with lagged mobility change as exogenous regressor.

The model follows the printed equation form, with the exogenous term inside
the ARMA recursion (a semantic difference from regression-with-ARMA-errors
packages):

    y_t = c + b0 * x_t + sum_j phi_j y_{t-j} + e_t + sum_j theta_j e_{t-j}

fitted on the d-times-differenced series by conditional sum of squares:
presample innovations are zero, the first p observations are conditioned
on, and the Gaussian negative log likelihood is profiled over sigma^2.
Optimization is a Nelder-Mead simplex over unconstrained parameters mapped
into the stationary/invertible region through a tanh partial-autocorrelation
transform, so every returned fit has AR and MA roots outside the unit
circle. Order selection is a full (p, q) grid scored by AICc, with d picked
by the differencing-variance heuristic.

The simplex search and the residual recursion are numba-compiled: a
backtest runs hundreds of thousands of these fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import (
    HorizonExceedsExogLag,
    NoConvergedFit,
    SeriesTooShort,
)

#: Partial autocorrelations are clamped to at most this in magnitude.
PACF_SCALE = 1.0 - 1e-4

#: Root-modulus margin asserted on returned fits.
ROOT_MARGIN = 1.0 + 1e-6

#: Coefficients c_j from the pacf map are shrunk to c_j * s^j, which scales
#: every polynomial root by 1/s. The pacf clamp alone does not bound roots
#: away from the unit circle once orders exceed 1 (three pacfs at 0.9999
#: put a root within 3e-13 of it); the shrink enforces ROOT_MARGIN directly.
_ROOT_SHRINK = 1.0 / (1.0 + 2e-6)


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        if self.p < 0 or self.d < 0 or self.q < 0:
            raise ValueError(f"order components must be >= 0, got {self}")


@dataclass(frozen=True)
class ArimaxConfig:
    window_days: int = 90
    exog_lag_days: int = 21
    p_max: int = 3
    d_max: int = 2
    q_max: int = 3
    include_intercept_when_d0: bool = True
    tol: float = 1e-8        # simplex parameter/objective tolerance
    max_iter: int = 500      # simplex iterations per parameter, per start
    fit_cumulative: bool = False  # fit cumulative instead of incident cases

    def __post_init__(self):
        if self.window_days <= self.p_max + self.q_max + 10:
            raise ValueError("window_days must exceed p_max + q_max + 10")


@dataclass(frozen=True)
class FittedArimax:
    order: ArimaOrder
    phi: np.ndarray
    theta: np.ndarray
    beta0: float | None      # None when fitted without an exogenous series
    intercept: float | None
    sigma2: float
    neg_loglik: float
    aicc: float
    converged: bool
    n_eff: int               # observations entering the sum of squares
    unit: str = ""
    origin: int = -1


# --- numba kernels ----------------------------------------------------------

@njit(cache=True, nogil=True)
def _pacf_to_coef(pacf):
    """Durbin-Levinson map from partial autocorrelations to AR coefficients."""
    p = pacf.size
    coef = np.zeros(p)
    work = np.zeros(p)
    for j in range(p):
        a = pacf[j]
        for k in range(j):
            work[k] = coef[k] - a * coef[j - 1 - k]
        for k in range(j):
            coef[k] = work[k]
        coef[j] = a
    return coef


@njit(cache=True, nogil=True)
def _unconstrained_to_coef(raw):
    """tanh-pacf map plus the root-margin shrink; stationary for any raw."""
    coef = _pacf_to_coef(np.tanh(raw) * PACF_SCALE)
    f = _ROOT_SHRINK
    for j in range(coef.size):
        coef[j] *= f
        f *= _ROOT_SHRINK
    return coef


@njit(cache=True, nogil=True)
def _css_sigma2(w, xd, has_exog, c, b0, phi, theta, eps):
    """Innovation recursion; fills eps and returns mean squared innovation.

    eps must be zero-filled with len(w) slots; entries before index p stay
    zero (presample). Returns -1.0 when the recursion leaves the finite
    range, signalling explosive trial parameters.
    """
    p = phi.size
    q = theta.size
    n = w.size
    ssq = 0.0
    for t in range(p, n):
        pred = c
        if has_exog:
            pred += b0 * xd[t]
        for j in range(p):
            pred += phi[j] * w[t - 1 - j]
        for j in range(q):
            if t - 1 - j >= 0:
                pred += theta[j] * eps[t - 1 - j]
        e = w[t] - pred
        eps[t] = e
        ssq += e * e
    if not np.isfinite(ssq):
        return -1.0
    return ssq / (n - p)


@njit(cache=True, nogil=True)
def _nll_raw(raw, w, xd, has_exog, has_int, p, q, eps):
    """CSS negative log likelihood at an unconstrained parameter vector."""
    i = 0
    c = 0.0
    if has_int:
        c = raw[0]
        i = 1
    b0 = 0.0
    if has_exog:
        b0 = raw[i]
        i += 1
    phi = _unconstrained_to_coef(raw[i:i + p])
    theta = -_unconstrained_to_coef(raw[i + p:i + p + q])
    for t in range(eps.size):
        eps[t] = 0.0
    sigma2 = _css_sigma2(w, xd, has_exog, c, b0, phi, theta, eps)
    if sigma2 < 0.0:
        return np.inf
    n_eff = w.size - p
    if sigma2 == 0.0:
        return -np.inf
    return 0.5 * n_eff * (np.log(2.0 * np.pi * sigma2) + 1.0)


@njit(cache=True, nogil=True)
def _simplex_minimize(w, xd, has_exog, has_int, p, q, x0, xatol, fatol, maxiter, step):
    """Nelder-Mead with standard coefficients (1, 2, 0.5, 0.5).

    The initial simplex spreads each coordinate by `step` (relative when the
    coordinate is nonzero). Converged when both the parameter spread and the
    objective spread of the simplex fall below the tolerances.
    """
    n = x0.size
    eps = np.zeros(w.size)
    sim = np.empty((n + 1, n))
    fval = np.empty(n + 1)
    sim[0] = x0
    fval[0] = _nll_raw(x0, w, xd, has_exog, has_int, p, q, eps)
    for i in range(n):
        y = x0.copy()
        if y[i] != 0.0:
            y[i] *= 1.0 + step
        else:
            y[i] = step
        sim[i + 1] = y
        fval[i + 1] = _nll_raw(y, w, xd, has_exog, has_int, p, q, eps)

    converged = False
    for _ in range(maxiter):
        order = np.argsort(fval)
        sim = sim[order]
        fval = fval[order]

        fspread = np.abs(fval[1:] - fval[0]).max()
        xspread = np.abs(sim[1:] - sim[0]).max()
        if fspread <= fatol and xspread <= xatol:
            converged = True
            break

        centroid = np.zeros(n)
        for i in range(n):
            centroid += sim[i]
        centroid /= n

        xr = centroid + (centroid - sim[n])
        fr = _nll_raw(xr, w, xd, has_exog, has_int, p, q, eps)
        if fr < fval[0]:
            xe = centroid + 2.0 * (centroid - sim[n])
            fe = _nll_raw(xe, w, xd, has_exog, has_int, p, q, eps)
            if fe < fr:
                sim[n], fval[n] = xe, fe
            else:
                sim[n], fval[n] = xr, fr
        elif fr < fval[n - 1]:
            sim[n], fval[n] = xr, fr
        else:
            if fr < fval[n]:
                xc = centroid + 0.5 * (xr - centroid)
                fc = _nll_raw(xc, w, xd, has_exog, has_int, p, q, eps)
            else:
                xc = centroid + 0.5 * (sim[n] - centroid)
                fc = _nll_raw(xc, w, xd, has_exog, has_int, p, q, eps)
            if fc < min(fr, fval[n]):
                sim[n], fval[n] = xc, fc
            else:
                for i in range(1, n + 1):
                    sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
                    fval[i] = _nll_raw(sim[i], w, xd, has_exog, has_int, p, q, eps)

    best = np.argmin(fval)
    return sim[best], fval[best], converged


# --- public operations -------------------------------------------------------

def select_difference_order(y: np.ndarray, d_max: int = 2) -> int:
    """Smallest d in 0..d_max minimizing the sample sd of the differenced series."""
    y = np.asarray(y, dtype=np.float64)
    if y.size <= d_max + 10:
        raise SeriesTooShort(f"need more than {d_max + 10} observations, got {y.size}")
    best_d, best_sd = 0, np.inf
    w = y
    for d in range(d_max + 1):
        if d > 0:
            w = np.diff(w)
        sd = float(np.std(w, ddof=1)) if w.size > 1 else 0.0
        if sd < best_sd:
            best_d, best_sd = d, sd
    return best_d


def _param_layout(order: ArimaOrder, has_exog: bool, has_int: bool) -> int:
    return int(has_int) + int(has_exog) + order.p + order.q


def css_neg_loglik(
    params: np.ndarray,
    w: np.ndarray,
    x: np.ndarray | None,
    order: ArimaOrder,
    include_intercept: bool = False,
) -> float:
    """CSS negative log likelihood at model-space parameters.

    ``w`` and ``x`` are the d-times-differenced, aligned series; ``params``
    packs [intercept?, beta0 if x is given, phi_1..p, theta_1..q]. Presample
    innovations are zero and the first p observations are conditioned on.
    Returns +inf when the recursion overflows (explosive parameters) and
    -inf for an exact fit (zero innovation variance).
    """
    eps = css_residuals(params, w, x, order, include_intercept)
    if eps is None:
        return math.inf
    n_eff = w.size - order.p
    sigma2 = float(eps[order.p:] @ eps[order.p:]) / n_eff
    if sigma2 == 0.0:
        return -math.inf
    return 0.5 * n_eff * (math.log(2.0 * math.pi * sigma2) + 1.0)


def css_residuals(
    params: np.ndarray,
    w: np.ndarray,
    x: np.ndarray | None,
    order: ArimaOrder,
    include_intercept: bool = False,
) -> np.ndarray | None:
    """Innovation series for given parameters; None if the recursion overflows."""
    params = np.asarray(params, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    has_exog = x is not None
    if _param_layout(order, has_exog, include_intercept) != params.size:
        raise ValueError(f"expected {_param_layout(order, has_exog, include_intercept)} "
                         f"parameters, got {params.size}")
    if w.size - order.p < 1:
        raise SeriesTooShort(f"{w.size} observations cannot condition on p={order.p}")
    i = 0
    c = 0.0
    if include_intercept:
        c, i = float(params[0]), 1
    b0 = 0.0
    if has_exog:
        b0 = float(params[i])
        i += 1
        xd = np.asarray(x, dtype=np.float64)
        if xd.shape != w.shape:
            raise ValueError("x and w must be aligned after differencing")
    else:
        xd = np.zeros_like(w)
    phi = params[i:i + order.p].copy()
    theta = params[i + order.p:].copy()
    eps = np.zeros_like(w)
    sigma2 = _css_sigma2(w, xd, has_exog, c, b0, phi, theta, eps)
    return None if sigma2 < 0.0 else eps


def _poly_root_min_modulus(coefs: np.ndarray) -> float:
    """Min |root| of 1 - c_1 z - ... - c_k z^k; inf when all coefficients are 0."""
    if coefs.size == 0 or not np.any(coefs):
        return math.inf
    roots = np.roots(np.concatenate([-coefs[::-1], [1.0]]))
    return float(np.abs(roots).min()) if roots.size else math.inf


def ar_root_min_modulus(fit: FittedArimax) -> float:
    return _poly_root_min_modulus(fit.phi)


def ma_root_min_modulus(fit: FittedArimax) -> float:
    # invertibility of 1 + theta_1 z + ... is stationarity of 1 - (-theta) z - ...
    return _poly_root_min_modulus(-fit.theta)


def fit_arma_css(
    y: np.ndarray,
    x: np.ndarray | None,
    order: ArimaOrder,
    cfg: ArimaxConfig = ArimaxConfig(),
) -> FittedArimax:
    """Fit one (p, d, q) cell by conditional sum of squares.

    ``y`` (and ``x``, aligned) are on the original scale; both are differenced
    d times here. The series are rescaled internally so the simplex starts
    from a sanely-sized initial step, and parameters are reported on the
    original scale. A non-converged simplex still returns a usable fit with
    ``converged=False``.
    """
    y = np.asarray(y, dtype=np.float64)
    w = np.diff(y, n=order.d) if order.d else y.copy()
    has_exog = x is not None
    if has_exog:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != y.shape:
            raise ValueError("x must be aligned with y")
        xd = np.diff(x, n=order.d) if order.d else x.copy()
    else:
        xd = np.zeros_like(w)

    has_int = order.d == 0 and cfg.include_intercept_when_d0
    n_params = _param_layout(order, has_exog, has_int)
    n_eff = w.size - order.p
    if n_eff < n_params + 2:
        raise SeriesTooShort(
            f"{w.size} differenced observations cannot support {n_params} parameters"
        )

    # scale for optimizer conditioning; undone before reporting
    w_scale = float(np.std(w)) or 1.0
    x_scale = (float(np.std(xd)) or 1.0) if has_exog else 1.0
    ws = w / w_scale
    xs = xd / x_scale

    if n_params == 0:
        # nothing to optimize: pure I(d) noise model
        best, converged = np.empty(0), True
    else:
        x0 = np.zeros(n_params)
        if has_int:
            x0[0] = float(ws.mean())
        maxiter = cfg.max_iter * n_params
        best, _, converged = _simplex_minimize(
            ws, xs, has_exog, has_int, order.p, order.q, x0,
            cfg.tol, cfg.tol, maxiter, 0.25,
        )
        # polish restart from the incumbent with a tight simplex
        best, _, conv2 = _simplex_minimize(
            ws, xs, has_exog, has_int, order.p, order.q, best,
            cfg.tol, cfg.tol, maxiter, 1e-3,
        )
        converged = converged or conv2

    i = 0
    intercept = None
    if has_int:
        intercept = float(best[0]) * w_scale
        i = 1
    beta0 = None
    if has_exog:
        beta0 = float(best[i]) * w_scale / x_scale
        i += 1
    phi = _unconstrained_to_coef(best[i:i + order.p])
    theta = -_unconstrained_to_coef(best[i + order.p:])

    eps = np.zeros_like(w)
    sigma2 = float(
        _css_sigma2(w, xd, has_exog, 0.0 if intercept is None else intercept,
                    0.0 if beta0 is None else beta0, phi, theta, eps)
    )
    if sigma2 <= 0.0:
        sigma2 = max(sigma2, 0.0)
        nll = -math.inf
    else:
        nll = 0.5 * n_eff * (math.log(2.0 * math.pi * sigma2) + 1.0)

    k = order.p + order.q + 1 + int(has_exog) + int(has_int)
    aicc = aicc_score(nll, k, n_eff)

    # root moduli > ROOT_MARGIN are guaranteed by _unconstrained_to_coef;
    # the invariant is asserted explicitly in the test suite, not per fit.
    return FittedArimax(
        order=order,
        phi=phi,
        theta=theta,
        beta0=beta0,
        intercept=intercept,
        sigma2=sigma2,
        neg_loglik=nll,
        aicc=aicc,
        converged=bool(converged),
        n_eff=int(n_eff),
    )


def aicc_score(neg_loglik: float, k: int, n: int) -> float:
    """Small-sample corrected information criterion; +inf when n <= k + 1."""
    if n - k - 1 <= 0:
        return math.inf
    return 2.0 * neg_loglik + 2.0 * k + 2.0 * k * (k + 1) / (n - k - 1)


#: AICc differences below this are treated as ties (the standard
#: model-equivalence band) and resolved toward the more parsimonious order.
AICC_TIE = 2.0


def _selection_aicc(fit: FittedArimax, w: np.ndarray, xd: np.ndarray | None,
                    p_cond: int) -> float:
    """AICc for grid comparison, conditioning every cell on p_cond observations.

    CSS conditions away p observations, so each cell's own likelihood covers
    a different slice of the data and raw AICc values are not comparable
    (larger p would always look better). Here the fitted parameters are
    rescored on the common target span [p_cond:], giving all cells the same
    observation count and the same observations.
    """
    eps = css_residuals(_pack_params(fit, xd is not None), w, xd,
                        fit.order, fit.intercept is not None)
    if eps is None:
        return math.inf
    tail = eps[p_cond:]
    n_star = tail.size
    sigma2 = float(tail @ tail) / n_star
    k = fit.order.p + fit.order.q + 1 + int(fit.beta0 is not None) + int(fit.intercept is not None)
    if sigma2 <= 0.0:
        return -math.inf
    return aicc_score(0.5 * n_star * (math.log(2.0 * math.pi * sigma2) + 1.0), k, n_star)


def auto_fit(
    y: np.ndarray,
    x: np.ndarray | None,
    cfg: ArimaxConfig = ArimaxConfig(),
) -> FittedArimax:
    """Pick d by the differencing-variance heuristic, then grid (p, q) by AICc.

    Cells are compared on a common-span AICc (see _selection_aicc); only
    converged cells compete. Orders whose score is within AICC_TIE of the
    minimum count as tied, and ties break toward fewer parameters (smaller
    p + q, then smaller p). Raises NoConvergedFit when the whole grid fails.
    """
    y = np.asarray(y, dtype=np.float64)
    d = select_difference_order(y, cfg.d_max)
    w = np.diff(y, n=d) if d else y
    if x is not None:
        x = np.asarray(x, dtype=np.float64)
        xd = np.diff(x, n=d) if d else x
    else:
        xd = None
    candidates: list[tuple[float, int, int, FittedArimax]] = []
    for p in range(cfg.p_max + 1):
        for q in range(cfg.q_max + 1):
            try:
                fit = fit_arma_css(y, x, ArimaOrder(p, d, q), cfg)
            except SeriesTooShort:
                continue
            if fit.converged:
                score = _selection_aicc(fit, w, xd, cfg.p_max)
                if score < math.inf:  # excludes +inf and nan, keeps -inf
                    candidates.append((score, p + q, p, fit))
    if not candidates:
        raise NoConvergedFit(f"no converged fit on the (p <= {cfg.p_max}, q <= {cfg.q_max}) grid")
    best = min(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] <= best + AICC_TIE]
    return min(tied, key=lambda c: (c[1], c[2], c[0]))[3]


def forecast(
    fit: FittedArimax,
    y: np.ndarray,
    h: int,
    x: np.ndarray | None = None,
    x_future: np.ndarray | None = None,
    exog_lag_days: int | None = None,
) -> np.ndarray:
    """Mean forecast for steps 1..h on the original scale of ``y``.

    ``y`` (and ``x``) are the training-window series the fit was computed on;
    ``x_future`` supplies exogenous values for the forecast steps. Future
    innovations are zero; the recursion runs on the differenced scale and is
    integrated back d times.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    if exog_lag_days is not None and h > exog_lag_days:
        raise HorizonExceedsExogLag(f"h={h} exceeds the {exog_lag_days}-day exogenous lag")
    y = np.asarray(y, dtype=np.float64)
    d = fit.order.d
    has_exog = fit.beta0 is not None
    if has_exog:
        if x is None or x_future is None:
            raise ValueError("fit used an exogenous series; pass x and x_future")
        x = np.asarray(x, dtype=np.float64)
        x_future = np.asarray(x_future, dtype=np.float64)
        if x_future.size < h:
            raise HorizonExceedsExogLag(
                f"x_future supplies {x_future.size} steps, forecast needs {h}"
            )
        xd_full = np.diff(np.concatenate([x, x_future[:h]]), n=d) if d else np.concatenate(
            [x, x_future[:h]]
        )
        xd = xd_full[: xd_full.size - h]
        xd_fut = xd_full[xd_full.size - h:]
    else:
        xd = None
        xd_fut = np.zeros(h)

    w = np.diff(y, n=d) if d else y.copy()
    c = fit.intercept or 0.0
    b0 = fit.beta0 or 0.0
    eps = css_residuals(
        _pack_params(fit, has_exog), w, xd, fit.order, fit.intercept is not None
    )
    if eps is None:
        raise FloatingPointError("innovation recursion overflowed at the fitted parameters")

    p, q = fit.order.p, fit.order.q
    n = w.size
    wx = np.concatenate([w, np.zeros(h)])
    ex = np.concatenate([eps, np.zeros(h)])
    for k in range(h):
        t = n + k
        pred = c + b0 * xd_fut[k]
        for j in range(p):
            pred += fit.phi[j] * wx[t - 1 - j]
        for j in range(q):
            if t - 1 - j >= 0:
                pred += fit.theta[j] * ex[t - 1 - j]
        wx[t] = pred
    preds = wx[n:]

    # integrate back: tails[i] is the last value of the i-times-differenced y
    for i in range(d - 1, -1, -1):
        tail = float(np.diff(y, n=i)[-1]) if i else float(y[-1])
        preds = tail + np.cumsum(preds)
    return preds


def _pack_params(fit: FittedArimax, has_exog: bool) -> np.ndarray:
    parts = []
    if fit.intercept is not None:
        parts.append(fit.intercept)
    if has_exog:
        parts.append(fit.beta0)
    return np.concatenate([np.asarray(parts), fit.phi, fit.theta])
