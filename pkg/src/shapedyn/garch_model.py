"""DCC(1,1)-GARCH: two-stage quasi-likelihood estimation and forecasting.

Stage one fits a univariate GARCH to each demeaned component; stage two
fits the scalar dynamic-correlation parameters ``(a, b)`` to the
standardized residuals. The conditional mean is a constant per component.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter, lfiltic

from . import _dp
from .errors import ConvergenceError, InsufficientDataError, SingularCorrelationError

STATIONARITY_MARGIN = 1e-6
MIN_LENGTH = 50
# below this total ARCH weight the GARCH terms are treated as unidentified
ARCH_FLOOR = 1e-2
LR_SLACK = 1.0
MAX_CONDITION = 1e12


@dataclass
class UnivariateGarch:
    """``k(t) = w0 + sum_m w[m] l(t-1-m)^2 + sum_n zeta[n] k(t-1-n)``."""

    w0: float
    w: np.ndarray = field(default_factory=lambda: np.array([0.05]))
    zeta: np.ndarray = field(default_factory=lambda: np.array([0.85]))
    loglik: float = float("nan")
    iterations: int = 0

    @property
    def persistence(self) -> float:
        return float(np.sum(self.w) + np.sum(self.zeta))

    @property
    def long_run_variance(self) -> float:
        return float(self.w0 / (1.0 - self.persistence))

    def params(self) -> np.ndarray:
        return np.concatenate([[self.w0], self.w, self.zeta])

    def to_dict(self) -> dict:
        return {"w0": self.w0, "w": np.asarray(self.w).tolist(),
                "zeta": np.asarray(self.zeta).tolist(), "loglik": self.loglik}

    @classmethod
    def from_dict(cls, data):
        return cls(float(data["w0"]), np.asarray(data["w"], dtype=float),
                   np.asarray(data["zeta"], dtype=float), float(data.get("loglik", np.nan)))


@dataclass
class DccGarchModel:
    mu: np.ndarray
    components: list
    a: float
    b: float
    qbar: np.ndarray
    loglik: float = float("nan")

    @property
    def d(self) -> int:
        return len(self.mu)

    def to_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "components": [c.to_dict() for c in self.components],
                "a": self.a, "b": self.b, "Qbar": self.qbar.tolist(), "loglik": self.loglik}

    @classmethod
    def from_dict(cls, data):
        return cls(np.asarray(data["mu"], dtype=float),
                   [UnivariateGarch.from_dict(c) for c in data["components"]],
                   float(data["a"]), float(data["b"]), np.asarray(data["Qbar"], dtype=float),
                   float(data.get("loglik", np.nan)))


# -- stage one --------------------------------------------------------------

def conditional_variances(resid, w0, w, zeta, presample=None) -> np.ndarray:
    """Filter the variance recursion; presample ``l^2`` and ``k`` equal ``presample``."""
    resid = np.asarray(resid, dtype=float)
    w = np.atleast_1d(np.asarray(w, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    v0 = float(np.mean(resid ** 2)) if presample is None else float(presample)
    sq = resid ** 2
    padded = np.concatenate([np.full(len(w), v0), sq])
    # u(t) = w0 + sum_m w_m l^2(t-1-m)
    u = w0 + lfilter(np.concatenate([[0.0], w]), [1.0], padded)[len(w):]
    if len(zeta) == 0 or not np.any(zeta):
        return u
    den = np.concatenate([[1.0], -zeta])
    zi = lfiltic([1.0], den, y=np.full(len(zeta), v0))
    k, _ = lfilter([1.0], den, u, zi=zi)
    return k


def _obs_loglik(resid, theta, n_arch, presample):
    w0, w, zeta = theta[0], theta[1:1 + n_arch], theta[1 + n_arch:]
    k = conditional_variances(resid, w0, w, zeta, presample)
    if np.any(k <= 0) or not np.all(np.isfinite(k)):
        return None
    return -0.5 * (np.log(2 * np.pi) + np.log(k) + resid ** 2 / k)


def garch_loglik(resid, model: UnivariateGarch, presample=None) -> float:
    """Gaussian quasi log-likelihood of demeaned ``resid``."""
    theta = model.params()
    ll = _obs_loglik(np.asarray(resid, dtype=float), theta, len(model.w),
                     np.mean(np.asarray(resid) ** 2) if presample is None else presample)
    return -np.inf if ll is None else float(ll.sum())


def _project(theta, n_arch, w0_floor):
    out = theta.copy()
    out[0] = max(out[0], w0_floor)
    out[1:] = np.clip(out[1:], 0.0, None)
    total = out[1:].sum()
    cap = 1.0 - STATIONARITY_MARGIN
    if total > cap:
        out[1:] *= cap / total
    return out


def _scores(resid, theta, n_arch, presample, step):
    """Per-observation numeric gradients, central where feasible."""
    base = _obs_loglik(resid, theta, n_arch, presample)
    cols = []
    for i in range(len(theta)):
        e = np.zeros_like(theta)
        e[i] = step
        up = _obs_loglik(resid, theta + e, n_arch, presample)
        dn = _obs_loglik(resid, theta - e, n_arch, presample) if theta[i] - step >= 0 else None
        if up is not None and dn is not None:
            cols.append((up - dn) / (2 * step))
        elif up is not None:
            cols.append((up - base) / step)
        else:
            cols.append((base - dn) / step)
    return base, np.column_stack(cols)


def fit_univariate_garch(series, n_arch: int = 1, n_garch: int = 1, *,
                         max_iter: int = 2000, tol: float = 1e-8, step: float = 1e-6,
                         init=None, identify: bool = True) -> UnivariateGarch:
    """Quasi-ML GARCH fit by projected, BHHH-preconditioned gradient ascent.

    ``series`` is demeaned by its sample mean first. Each iteration moves
    along ``(G'G)^-1 g`` (``G`` the per-observation numeric scores),
    projects onto ``w0 > 0, w, zeta >= 0, sum < 1`` and halves the step
    until the likelihood does not decrease. Stops when the total gain over
    the last five iterations is below ``tol``.

    With ``identify`` (default), a fit whose ARCH weights sum below
    ``ARCH_FLOOR`` is compared with the pure-ARCH fit (``zeta = 0``): when
    the ARCH terms vanish the GARCH terms are not identified, and the
    pure-ARCH model is kept unless it loses more than ``LR_SLACK`` in
    log-likelihood.
    """
    x = np.asarray(series, dtype=float)
    if len(x) < MIN_LENGTH:
        raise InsufficientDataError(f"need at least {MIN_LENGTH} observations, got {len(x)}",
                                    module="garch_model", operation="fit_univariate_garch")
    resid = x - x.mean()
    var = float(np.mean(resid ** 2))
    if var <= 0:
        raise InsufficientDataError("constant series has no variance to model",
                                    module="garch_model", operation="fit_univariate_garch")
    if init is None:
        theta = np.concatenate([[0.1 * var], np.full(n_arch, 0.05 / max(n_arch, 1)),
                                np.full(n_garch, 0.85 / max(n_garch, 1))])
    else:
        theta = np.asarray(init, dtype=float).copy()
    w0_floor = 1e-10 * var
    theta = _project(theta, n_arch, w0_floor)
    # work in units of the sample variance so w0 is O(1) like the others
    scaled = resid / np.sqrt(var)
    theta[0] /= var
    ll_vec, grads = _scores(scaled, theta, n_arch, 1.0, step)
    ll = float(ll_vec.sum())
    gains = []
    it = 0
    for it in range(1, max_iter + 1):
        g = grads.sum(axis=0)
        hess = grads.T @ grads
        hess += 1e-10 * np.trace(hess) * np.eye(len(theta))
        # coefficients pinned at zero and pushed further down are held fixed
        free = np.ones(len(theta), dtype=bool)
        free[1:] = ~((theta[1:] <= 0) & (g[1:] < 0))
        direction = np.zeros_like(theta)
        direction[free] = np.linalg.solve(hess[np.ix_(free, free)], g[free])
        size = 1.0
        accepted = False
        for _ in range(40):
            trial = _project(theta + size * direction, n_arch, w0_floor / var)
            trial_vec = _obs_loglik(scaled, trial, n_arch, 1.0)
            if trial_vec is not None and trial_vec.sum() >= ll:
                accepted = True
                break
            size *= 0.5
        gain = float(trial_vec.sum() - ll) if accepted else 0.0
        if accepted:
            theta = trial
            ll_vec, grads = _scores(scaled, theta, n_arch, 1.0, step)
            ll = float(ll_vec.sum())
        gains.append(gain)
        if len(gains) >= 5 and sum(gains[-5:]) < tol:
            break
    else:
        raise ConvergenceError(
            f"no convergence after {max_iter} iterations",
            last_iterate=np.concatenate([[theta[0] * var], theta[1:]]),
            gradient_norm=float(np.linalg.norm(grads.sum(axis=0))),
            module="garch_model", operation="fit_univariate_garch")
    # back to data units; the likelihood shifts by the Jacobian of the scaling
    ll_data = ll - 0.5 * len(x) * np.log(var)
    fit = UnivariateGarch(w0=float(theta[0] * var), w=theta[1:1 + n_arch].copy(),
                          zeta=theta[1 + n_arch:].copy(), loglik=float(ll_data),
                          iterations=it)
    if identify and n_garch and np.sum(fit.w) < ARCH_FLOOR:
        arch = fit_univariate_garch(x, n_arch, 0, max_iter=max_iter, tol=tol, step=step,
                                    identify=False)
        if arch.loglik >= fit.loglik - LR_SLACK:
            arch.zeta = np.zeros(n_garch)
            arch.iterations += fit.iterations
            return arch
    return fit


def simulate_garch(model: UnivariateGarch, T: int, seed=None, burn: int = 500) -> np.ndarray:
    """Gaussian GARCH path of length ``T`` (after ``burn`` discarded steps)."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(T + burn)
    w = np.atleast_1d(model.w)
    zeta = np.atleast_1d(model.zeta)
    m = max(len(w), len(zeta))
    lr = model.long_run_variance
    k = np.full(T + burn + m, lr)
    l = np.zeros(T + burn + m)
    l[:m] = np.sqrt(lr) * rng.standard_normal(m)
    for t in range(m, T + burn + m):
        k[t] = model.w0 + sum(w[i] * l[t - 1 - i] ** 2 for i in range(len(w))) \
            + sum(zeta[i] * k[t - 1 - i] for i in range(len(zeta)))
        l[t] = np.sqrt(k[t]) * z[t - m]
    return l[m + burn:]


# -- stage two --------------------------------------------------------------

def q_path(eps, a: float, b: float, qbar) -> np.ndarray:
    """``Q(t)`` for every ``t``, starting from ``Q(0) = Qbar``."""
    eps = np.asarray(eps, dtype=float)
    T, d = eps.shape
    outer = eps[:, :, None] * eps[:, None, :]
    forcing = np.empty((T, d, d))
    forcing[0] = qbar
    forcing[1:] = (1 - a - b) * qbar + a * outer[:-1]
    if b > 0:
        q = lfilter([1.0], [1.0, -b], forcing[1:], axis=0,
                    zi=(b * qbar)[None])[0]
        q = np.concatenate([qbar[None], q])
    else:
        q = forcing
    return q


def correlation_path(eps, a: float, b: float, qbar) -> np.ndarray:
    """``Lambda(t) = diag(Q)^-1/2 Q diag(Q)^-1/2`` along the DCC recursion."""
    q = q_path(eps, a, b, qbar)
    d = q.shape[1]
    diag = np.sqrt(np.einsum("tii->ti", q))
    lam = q / diag[:, :, None] / diag[:, None, :]
    idx = np.arange(d)
    lam[:, idx, idx] = 1.0
    return lam


def dcc_loglik(eps, a: float, b: float, qbar, *, check: bool = True) -> float:
    """``-1/2 sum_t (log|Lambda(t)| + eps' Lambda^-1 eps)``.

    With ``check``, raises when any ``Lambda(t)`` has condition number
    above ``MAX_CONDITION``.
    """
    eps = np.ascontiguousarray(eps, dtype=float)
    qbar = np.ascontiguousarray(qbar, dtype=float)
    ll, ok = _dp.dcc_loglik_kernel(eps, float(a), float(b), qbar)
    if check:
        vals = np.linalg.eigvalsh(correlation_path(eps, a, b, qbar)) if ok else None
        if not ok or (vals[:, 0] <= 0).any() or \
                (vals[:, -1] / np.maximum(vals[:, 0], 1e-300) > MAX_CONDITION).any():
            raise SingularCorrelationError(
                f"correlation matrix singular at (a={a:.4f}, b={b:.4f})",
                module="garch_model", operation="fit_dcc")
    return float(ll)


def _feasible(a, b):
    return a >= 0 and b >= 0 and a + b < 1 - STATIONARITY_MARGIN


def fit_dcc(eps, qbar=None, *, coarse: float = 0.02, fine: float = 0.001):
    """Grid-search quasi-ML estimate of ``(a, b)``.

    A coarse grid over the feasible triangle is followed by local grids,
    first at 0.005 over +-0.02 then at ``fine`` over +-0.005, around the
    running best. Returns ``(a, b, loglik)``.
    """
    eps = np.asarray(eps, dtype=float)
    if qbar is None:
        qbar = unconditional_correlation(eps)
    best = (-np.inf, 0.0, 0.0)

    def visit(a, b):
        nonlocal best
        a, b = round(a, 10), round(b, 10)
        if not _feasible(a, b):
            return
        ll = dcc_loglik(eps, a, b, qbar, check=False)
        if ll > best[0]:
            best = (ll, a, b)

    grid = np.arange(0.0, 1.0, coarse)
    for a in grid:
        for b in grid:
            visit(a, b)
    for spacing, half in ((0.005, 0.02), (fine, 0.005)):
        a0, b0 = best[1], best[2]
        offsets = np.arange(-half, half + spacing / 2, spacing)
        for da in offsets:
            for db in offsets:
                visit(a0 + da, b0 + db)
    if not np.isfinite(best[0]):
        raise SingularCorrelationError("no feasible (a, b) gives nonsingular correlations",
                                       module="garch_model", operation="fit_dcc")
    dcc_loglik(eps, best[1], best[2], qbar)  # condition check at the optimum
    return best[1], best[2], best[0]


def unconditional_correlation(eps) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    s = eps.T @ eps / len(eps)
    dinv = 1.0 / np.sqrt(np.diag(s))
    out = s * dinv[:, None] * dinv[None, :]
    np.fill_diagonal(out, 1.0)
    return (out + out.T) / 2


def fit_dcc_garch(series, **garch_kw) -> DccGarchModel:
    """Constant mean, per-component GARCH, then DCC on the standardized residuals."""
    x = np.asarray(getattr(series, "values", series), dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    mu = x.mean(axis=0)
    resid = x - mu
    comps, eps = [], []
    for j in range(x.shape[1]):
        comp = fit_univariate_garch(resid[:, j], **garch_kw)
        k = conditional_variances(resid[:, j], comp.w0, comp.w, comp.zeta)
        comps.append(comp)
        eps.append(resid[:, j] / np.sqrt(k))
    eps = np.column_stack(eps)
    qbar = unconditional_correlation(eps)
    if x.shape[1] == 1:
        return DccGarchModel(mu, comps, 0.0, 0.0, qbar, loglik=comps[0].loglik)
    a, b, ll = fit_dcc(eps, qbar)
    return DccGarchModel(mu, comps, a, b, qbar, loglik=ll)


def simulate_dcc(components, a, b, qbar, T, seed=None, burn: int = 500) -> np.ndarray:
    """Simulate demeaned DCC-GARCH innovations ``l(t) = D(t) Lambda(t)^(1/2) z(t)``."""
    rng = np.random.default_rng(seed)
    d = len(components)
    qbar = np.asarray(qbar, dtype=float)
    q = qbar.copy()
    k = np.array([c.long_run_variance for c in components])
    eps_prev = np.zeros(d)
    l_prev = np.zeros(d)
    out = np.empty((T + burn, d))
    for t in range(T + burn):
        if t > 0:
            q = (1 - a - b) * qbar + a * np.outer(eps_prev, eps_prev) + b * q
            k = np.array([c.w0 + c.w[0] * l_prev[i] ** 2 + c.zeta[0] * k[i]
                          for i, c in enumerate(components)])
        dq = np.sqrt(np.diag(q))
        lam = q / np.outer(dq, dq)
        eps = np.linalg.cholesky(lam) @ rng.standard_normal(d)
        l_prev = np.sqrt(k) * eps
        eps_prev = eps
        out[t] = l_prev
    return out[burn:]


# -- forecasting ------------------------------------------------------------

@dataclass
class DccForecast:
    mean: np.ndarray
    variances: np.ndarray
    correlations: np.ndarray

    @property
    def values(self):
        return self.mean

    def covariances(self) -> np.ndarray:
        sd = np.sqrt(self.variances)
        return self.correlations * sd[:, :, None] * sd[:, None, :]


def forecast_dcc(model: DccGarchModel, history, h: int) -> DccForecast:
    """Constant-mean point forecasts plus conditional covariance forecasts.

    Future squared residuals are replaced by their conditional expectations
    (``E l^2 = k`` and ``E eps eps' = Q``), so variances and correlations
    relax to their long-run values as ``h`` grows.
    """
    x = np.asarray(getattr(history, "values", history), dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    need = max(max(len(c.w), len(c.zeta)) for c in model.components) + 1
    if len(x) < need:
        raise InsufficientDataError(f"history needs at least {need} rows",
                                    module="garch_model", operation="forecast_dcc")
    resid = x - model.mu
    d = model.d
    variances = np.empty((h, d))
    eps_hist = np.empty_like(resid)
    for j, comp in enumerate(model.components):
        k = conditional_variances(resid[:, j], comp.w0, comp.w, comp.zeta)
        eps_hist[:, j] = resid[:, j] / np.sqrt(k)
        w, zeta = np.atleast_1d(comp.w), np.atleast_1d(comp.zeta)
        l2 = list(resid[:, j] ** 2)
        kk = list(k)
        for i in range(h):
            nxt = comp.w0 + sum(w[m] * l2[-1 - m] for m in range(len(w))) \
                + sum(zeta[n] * kk[-1 - n] for n in range(len(zeta)))
            variances[i, j] = nxt
            kk.append(nxt)
            l2.append(nxt)
    corrs = np.empty((h, d, d))
    if d > 1:
        q_last = q_path(eps_hist, model.a, model.b, model.qbar)[-1]
        # one step ahead uses the last observed standardized residual
        q = (1 - model.a - model.b) * model.qbar + model.a * np.outer(eps_hist[-1], eps_hist[-1]) \
            + model.b * q_last
        for i in range(h):
            if i > 0:
                q = (1 - model.a - model.b) * model.qbar + (model.a + model.b) * q
            diag = np.sqrt(np.diag(q))
            corrs[i] = q / np.outer(diag, diag)
    else:
        corrs[:] = 1.0
    mean = np.tile(model.mu, (h, 1))
    return DccForecast(mean=mean, variances=variances, correlations=corrs)
