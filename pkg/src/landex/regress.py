"""Least squares via Householder QR, with White (HC0) robust standard errors.

The normal equations are never formed. With ``X = QR``:

    beta    = R^-1 Q'y
    (X'X)^-1 X' diag(e^2) X (X'X)^-1 = R^-1 (Q' diag(e^2) Q) R^-T

so the sandwich only needs ``Q`` scaled row-wise by the residuals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NonPositiveWeight, RankDeficient

RANK_TOL = 1e-10


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    column_labels: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionMismatch("design must be two-dimensional")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_labels", tuple(self.column_labels))
        k = values.shape[1]
        if len(self.column_labels) != k:
            raise DimensionMismatch(f"{k} columns but {len(self.column_labels)} labels")
        if len(set(self.column_labels)) != k:
            raise ValueError("column labels must be unique")
        if k < 1:
            raise DimensionMismatch("design has no columns")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RegressionResult:
    coefficients: np.ndarray
    residuals: np.ndarray
    robust_se: np.ndarray
    adj_r_squared: float
    r_squared: float
    n_obs: int
    labels: tuple[str, ...]
    hc_type: str = "HC0"
    weights: Optional[np.ndarray] = field(default=None, repr=False)

    def position(self, label: str) -> int:
        return self.labels.index(label)

    def coef(self, label: str) -> float:
        return float(self.coefficients[self.position(label)])

    def se(self, label: str) -> float:
        return float(self.robust_se[self.position(label)])


def _as_design(X, labels: Optional[Sequence[str]] = None) -> DesignMatrix:
    if isinstance(X, DesignMatrix):
        return X
    values = np.asarray(X, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if labels is None:
        labels = [f"x{j}" for j in range(values.shape[1])]
    return DesignMatrix(values, tuple(labels))


def _factor(X: DesignMatrix) -> tuple[np.ndarray, np.ndarray]:
    if X.rows < X.cols:
        raise RankDeficient(f"{X.rows} rows cannot identify {X.cols} columns", X.column_labels)
    Q, R = np.linalg.qr(X.values, mode="reduced")
    d = np.abs(np.diag(R))
    tol = RANK_TOL * d.max() if d.size and d.max() > 0 else RANK_TOL
    bad = np.flatnonzero(d <= tol)
    if bad.size:
        raise _rank_error(X, bad)
    return Q, R


def _rank_error(X: DesignMatrix, bad: np.ndarray) -> RankDeficient:
    # Unpivoted QR flags the later column of each dependent set; recover the
    # earlier columns it depends on for the message.
    j = int(bad[0])
    basis = [i for i in range(j) if i not in set(bad.tolist())]
    involved = [j]
    if basis:
        coef, *_ = np.linalg.lstsq(X.values[:, basis], X.values[:, j], rcond=None)
        scale = max(np.abs(coef).max(), 1.0)
        involved += [basis[i] for i in np.flatnonzero(np.abs(coef) > 1e-8 * scale)]
    labels = [X.column_labels[i] for i in sorted(involved)]
    flagged = [X.column_labels[i] for i in bad]
    msg = f"rank deficient design: column {X.column_labels[j]!r} is collinear with {labels}"
    if len(flagged) > 1:
        msg += f"; all flagged columns: {flagged}"
    return RankDeficient(msg, labels)


def _sandwich_se(Q: np.ndarray, R: np.ndarray, resid: np.ndarray, hc_type: str) -> np.ndarray:
    n, k = Q.shape
    Rinv = solve_triangular(R, np.eye(k))
    meat_root = Q * resid[:, None]
    meat = meat_root.T @ meat_root
    cov = Rinv @ meat @ Rinv.T
    if hc_type == "HC1":
        if n <= k:
            raise DimensionMismatch("HC1 needs n > k")
        cov = cov * (n / (n - k))
    elif hc_type != "HC0":
        raise ValueError(f"unknown robust variance flavour {hc_type!r}")
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def _fit_stats(y: np.ndarray, resid: np.ndarray, k: int) -> tuple[float, float]:
    n = y.shape[0]
    ssr = float(resid @ resid)
    centred = y - y.mean()
    sst = float(centred @ centred)
    if sst == 0.0:
        r2 = 1.0 if ssr == 0.0 else float("nan")
    else:
        r2 = 1.0 - ssr / sst
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k) if n > k else float("nan")
    return r2, adj


def ols(X, y, labels: Optional[Sequence[str]] = None, hc_type: str = "HC0") -> RegressionResult:
    """Ordinary least squares with heteroskedasticity-robust standard errors.

    Raises :class:`RankDeficient` naming the collinear columns when any
    diagonal entry of R falls below ``1e-10`` times the largest one.
    """
    X = _as_design(X, labels)
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.rows:
        raise DimensionMismatch(f"y has {y.shape[0]} entries, design has {X.rows} rows")
    Q, R = _factor(X)
    beta = solve_triangular(R, Q.T @ y)
    resid = y - X.values @ beta
    se = _sandwich_se(Q, R, resid, hc_type)
    r2, adj = _fit_stats(y, resid, X.cols)
    return RegressionResult(beta, resid, se, adj, r2, X.rows, X.column_labels, hc_type)


def wls(X, y, weights, labels: Optional[Sequence[str]] = None, hc_type: str = "HC0") -> RegressionResult:
    """Weighted least squares as OLS on rows scaled by sqrt(weight).

    Coefficients, robust SEs and R^2 come from the scaled system; the
    returned residuals are on the original scale (y - X beta).
    """
    X = _as_design(X, labels)
    y = np.asarray(y, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != X.rows:
        raise DimensionMismatch(f"{w.shape[0]} weights for {X.rows} rows")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise NonPositiveWeight("weights must be finite and strictly positive")
    sw = np.sqrt(w)
    scaled = ols(DesignMatrix(X.values * sw[:, None], X.column_labels), y * sw, hc_type=hc_type)
    resid = y - X.values @ scaled.coefficients
    return RegressionResult(
        scaled.coefficients,
        resid,
        scaled.robust_se,
        scaled.adj_r_squared,
        scaled.r_squared,
        X.rows,
        X.column_labels,
        hc_type,
        weights=w,
    )


def hc0_se(X, residuals, hc_type: str = "HC0") -> np.ndarray:
    """White sandwich standard errors for a given design and residual vector."""
    X = _as_design(X)
    e = np.asarray(residuals, dtype=float).ravel()
    if e.shape[0] != X.rows:
        raise DimensionMismatch("residual length does not match design rows")
    Q, R = _factor(X)
    return _sandwich_se(Q, R, e, hc_type)
