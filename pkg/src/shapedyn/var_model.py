"""Vector autoregression: least-squares fit, lag selection, simulation, forecasting."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DegenerateRegressorsError, InsufficientDataError, ShapeDynError

CRITERIA = ("aic", "bic", "hq")


@dataclass
class VarModel:
    """``x(t) = c + sum_j A[j] x(t-1-j) + e(t)``, ``e ~ N(0, sigma)``."""

    p: int
    c: np.ndarray
    A: np.ndarray  # (p, d, d)
    sigma: np.ndarray

    @property
    def d(self) -> int:
        return len(self.c)

    def companion(self) -> np.ndarray:
        d, p = self.d, self.p
        top = np.hstack(list(self.A)) if p else np.zeros((d, 0))
        comp = np.zeros((d * p, d * p))
        comp[:d] = top
        comp[d:, :-d] = np.eye(d * (p - 1))
        return comp

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))

    def stationary_mean(self) -> np.ndarray:
        return np.linalg.solve(np.eye(self.d) - self.A.sum(axis=0), self.c)

    def beta(self) -> np.ndarray:
        """Stacked ``[c; A_1^T; ...; A_p^T]`` of shape ``(d*p + 1, d)``."""
        return np.vstack([self.c[None]] + [a.T for a in self.A])

    def to_dict(self) -> dict:
        return {"p": self.p, "c": self.c.tolist(), "A": self.A.tolist(),
                "Sigma": self.sigma.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "VarModel":
        d = len(data["c"])
        return cls(p=int(data["p"]), c=np.asarray(data["c"], dtype=float),
                   A=np.asarray(data["A"], dtype=float).reshape(int(data["p"]), d, d),
                   sigma=np.asarray(data["Sigma"], dtype=float))


def _values(x) -> np.ndarray:
    vals = np.asarray(getattr(x, "values", x), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    if not np.all(np.isfinite(vals)):
        raise ShapeDynError("series has non-finite entries", module="var_model",
                            operation="fit_var", item_id=getattr(x, "source_id", None))
    return vals


def lagged_design(x: np.ndarray, p: int, start: int | None = None):
    """Regressor matrix ``Z`` (rows ``(1, x(t-1), ..., x(t-p))``) and targets ``X``.

    Rows run over ``t = start .. L-1``; ``start`` defaults to ``p``.
    """
    start = p if start is None else start
    n = len(x) - start
    cols = [np.ones((n, 1))] + [x[start - j:len(x) - j] for j in range(1, p + 1)]
    return np.hstack(cols), x[start:]


def _solve_ls(z, target, item_id=None):
    q, r, piv = linalg.qr(z, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[-1] <= max(z.shape) * np.finfo(float).eps * diag[0]:
        raise DegenerateRegressorsError(
            "degenerate regressors (rank-deficient design)",
            module="var_model", operation="fit_var", item_id=item_id)
    coef = np.empty((z.shape[1], target.shape[1]))
    coef[piv] = linalg.solve_triangular(r, q.T @ target)
    return coef


def _split_beta(beta, p, d):
    c = beta[0].copy()
    A = np.stack([beta[1 + j * d:1 + (j + 1) * d].T for j in range(p)]) if p else np.zeros((0, d, d))
    return c, A


def fit_var(x, p: int, *, start: int | None = None) -> VarModel:
    """Least-squares VAR(p) estimate.

    Solved by pivoted QR. The noise covariance uses the divisor
    ``L - (d+1)p - 1`` where ``L`` is the series length.
    """
    item_id = getattr(x, "source_id", None)
    vals = _values(x)
    length, d = vals.shape
    if p < 1:
        raise ValueError("lag must be at least 1")
    dof = length - (d + 1) * p - 1
    if length - p < d * p + 1 + d or dof <= 0:
        raise InsufficientDataError(
            f"series of length {length} too short for VAR({p}) in dimension {d}",
            module="var_model", operation="fit_var", item_id=item_id)
    z, target = lagged_design(vals, p, start)
    beta = _solve_ls(z, target, item_id)
    resid = target - z @ beta
    sigma = resid.T @ resid / dof
    c, A = _split_beta(beta, p, d)
    return VarModel(p=p, c=c, A=A, sigma=(sigma + sigma.T) / 2)


def information_criteria(x, p_max: int) -> dict:
    """AIC/BIC/HQ for every lag ``1..p_max`` on the common sample ``t >= p_max``."""
    vals = _values(x)
    length, d = vals.shape
    t_eff = length - p_max
    if p_max < 1 or t_eff < d * p_max + 1 + d:
        raise InsufficientDataError(
            f"series of length {length} too short for p_max={p_max}",
            module="var_model", operation="select_lag",
            item_id=getattr(x, "source_id", None))
    out = {name: [] for name in CRITERIA}
    for p in range(1, p_max + 1):
        z, target = lagged_design(vals, p, p_max)
        beta = _solve_ls(z, target, getattr(x, "source_id", None))
        resid = target - z @ beta
        sign, logdet = np.linalg.slogdet(resid.T @ resid / t_eff)
        if sign <= 0:
            logdet = -np.inf
        k = d * d * p + d
        out["aic"].append(logdet + 2 * k / t_eff)
        out["bic"].append(logdet + k * np.log(t_eff) / t_eff)
        out["hq"].append(logdet + 2 * k * np.log(np.log(t_eff)) / t_eff)
    return {name: np.array(v) for name, v in out.items()}


def select_lag(x, p_max: int, criterion: str = "bic") -> int:
    """Lag in ``1..p_max`` minimizing the criterion; ties go to the smaller lag."""
    criterion = criterion.lower()
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    scores = information_criteria(x, p_max)[criterion]
    return int(np.argmin(scores)) + 1  # argmin returns the first minimum


def _sqrt_psd(sigma, operation):
    sigma = np.asarray(sigma, dtype=float)
    sym = (sigma + sigma.T) / 2
    vals, vecs = np.linalg.eigh(sym)
    scale = max(1.0, float(np.abs(vals).max(initial=0.0)))
    if not np.allclose(sigma, sym, atol=1e-10 * scale) or vals.min(initial=0.0) < -1e-10 * scale:
        raise ShapeDynError("noise covariance is not symmetric positive semidefinite",
                            module="var_model", operation=operation)
    return (vecs * np.sqrt(np.clip(vals, 0, None))) @ vecs.T


def synthesize(model: VarModel, init, T: int, seed=None) -> np.ndarray:
    """Simulate ``T`` rows; the first ``p`` rows are ``init``.

    Innovations are ``Sigma^(1/2) z`` with ``z`` standard normal from
    ``numpy.random.default_rng(seed)``.
    """
    init = np.atleast_2d(np.asarray(init, dtype=float))
    if init.shape != (model.p, model.d):
        raise ValueError(f"init must have shape {(model.p, model.d)}, got {init.shape}")
    root = _sqrt_psd(model.sigma, "synthesize")
    if model.spectral_radius() >= 1:
        warnings.warn(f"VAR spectral radius {model.spectral_radius():.3f} >= 1; "
                      "simulated series may diverge", RuntimeWarning, stacklevel=2)
    rng = np.random.default_rng(seed)
    out = np.empty((T, model.d))
    out[:model.p] = init[:T]
    noise = rng.standard_normal((max(T - model.p, 0), model.d)) @ root
    for t in range(model.p, T):
        val = model.c.copy()
        for j in range(model.p):
            val += model.A[j] @ out[t - 1 - j]
        out[t] = val + noise[t - model.p]
    return out


def predict(model: VarModel, history, h: int) -> np.ndarray:
    """Recursive ``h``-step plug-in forecasts from the end of ``history`` (intercept included)."""
    hist = _values(history)
    if len(hist) < model.p:
        raise InsufficientDataError(f"history needs at least {model.p} rows",
                                    module="var_model", operation="predict")
    buf = list(hist[-model.p:])
    out = np.empty((h, model.d))
    for i in range(h):
        val = model.c.copy()
        for j in range(model.p):
            val += model.A[j] @ buf[-1 - j]
        out[i] = val
        buf.append(val)
    return out


def prediction_error(predicted, truth) -> float:
    """``(1/h) sum_i |truth_i - predicted_i|^2``."""
    a = np.atleast_2d(np.asarray(getattr(predicted, "values", predicted), dtype=float))
    b = np.atleast_2d(np.asarray(getattr(truth, "values", truth), dtype=float))
    if a.shape != b.shape:
        raise ShapeDynError(f"shape mismatch {a.shape} vs {b.shape}",
                            module="var_model", operation="prediction_error")
    return float(np.mean(np.sum((b - a) ** 2, axis=1)))


def rolling_prediction_error(x, p: int, split: int, h: int = 1, *, model=None) -> float:
    """Mean h-step error over every forecast origin from ``split`` to the end.

    The model is fitted once on rows ``< split`` (or supplied); each origin
    ``T0 >= split`` forecasts ``x[T0 : T0 + h]`` from the observed history
    ``x[:T0]``.
    """
    vals = _values(x)
    model = model or fit_var(vals[:split], p)
    errs = [prediction_error(predict(model, vals[:t0], h), vals[t0:t0 + h])
            for t0 in range(split, len(vals) - h + 1)]
    if not errs:
        raise InsufficientDataError("no forecast origins after the split",
                                    module="var_model", operation="rolling_prediction_error")
    return float(np.mean(errs))
