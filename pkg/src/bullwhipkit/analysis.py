"""Delta-method predictors for the cross-path CV of bullwhip ratios.

``delta_cv_ratio`` predicts CV(X/Y) from the CVs of X, Y and their correlation;
``delta_cv_product`` predicts the CV of a product of K ratios.  The report
functions estimate the inputs across Monte Carlo paths and compare the
predictions with the empirical CVs.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import metrics

MIN_PATHS = 30


class AnalysisError(ValueError):
    pass


class RadicandWarning(RuntimeWarning):
    """A delta-method radicand came out negative and was clamped to zero."""


def _clamped_sqrt(radicand: float) -> float:
    if radicand < 0.0:
        warnings.warn(f"negative delta-method radicand {radicand:.3g} clamped to 0", RadicandWarning,
                      stacklevel=3)
        return 0.0
    return math.sqrt(radicand)


def delta_cv_ratio(cv_x: float, cv_y: float, rho: float) -> float:
    """sqrt(cv_x^2 + cv_y^2 - 2 rho cv_x cv_y)."""
    if not (cv_x >= 0 and cv_y >= 0):
        raise AnalysisError(f"CVs must be nonnegative, got {cv_x}, {cv_y}")
    if not -1.0 <= rho <= 1.0:
        raise AnalysisError(f"rho must lie in [-1, 1], got {rho}")
    return _clamped_sqrt(cv_x * cv_x + cv_y * cv_y - 2.0 * rho * cv_x * cv_y)


def delta_cv_product(cvs, corr) -> float:
    """sqrt(sum cv_k^2 + 2 sum_{i<j} rho_ij cv_i cv_j), i.e. sqrt(cv' R cv)."""
    c = np.asarray(cvs, dtype=float)
    R = np.asarray(corr, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise AnalysisError("cvs must be a nonempty vector")
    if R.shape != (c.size, c.size):
        raise AnalysisError(f"corr must be {c.size}x{c.size}, got {R.shape}")
    if np.any(c < 0) or not np.all(np.isfinite(c)):
        raise AnalysisError("CVs must be finite and nonnegative")
    if not np.allclose(R, R.T, atol=1e-12):
        raise AnalysisError("corr must be symmetric")
    if not np.allclose(np.diag(R), 1.0, atol=1e-12):
        raise AnalysisError("corr must have a unit diagonal")
    if np.any(np.abs(R) > 1.0 + 1e-12):
        raise AnalysisError("correlations must lie in [-1, 1]")
    return _clamped_sqrt(float(c @ R @ c))


def _cv(x) -> float:
    x = np.asarray(x, dtype=float)
    m = x.mean()
    if m == 0:
        return 0.0 if np.all(x == 0) else math.nan
    return float(x.std(ddof=1) / abs(m))


def _corr(x, y) -> float:
    """Pearson correlation; 0 when either side is constant across paths."""
    sx, sy = np.std(x), np.std(y)
    if sx == 0 or sy == 0:
        return 0.0
    r = float(np.corrcoef(x, y)[0, 1])
    return min(1.0, max(-1.0, r))


def _check_paths(result):
    if result.N < MIN_PATHS:
        raise AnalysisError(f"need at least {MIN_PATHS} paths, have {result.N}")


@dataclass
class FilteringRow:
    echelon: int
    cv_x: float
    cv_y: float
    rho: float
    predicted_cv: float
    empirical_cv: float
    degenerate: bool = False


@dataclass
class FilteringReport:
    rows: list = field(default_factory=list)

    def row(self, echelon: int) -> FilteringRow:
        for r in self.rows:
            if r.echelon == echelon:
                return r
        raise KeyError(echelon)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["echelon", "cv_x", "cv_y", "rho", "predicted_cv", "empirical_cv"]
        w.writerow(cols)
        for r in self.rows:
            d = asdict(r)
            w.writerow([d["echelon"]] + [repr(float(d[c])) for c in cols[1:]])
        return buf.getvalue()


def filtering_report(result) -> FilteringReport:
    """Predicted vs empirical CV of BWR_k = Var(O_k) / Var(O_{k-1}) for k >= 2."""
    _check_paths(result)
    w = metrics._window(result)
    var = metrics.path_variance(result.orders[:, :, w])  # (N, K)
    report = FilteringReport()
    for k in range(2, result.K + 1):
        x, y = var[:, k - 1], var[:, k - 2]
        cv_x, cv_y, rho = _cv(x), _cv(y), _corr(x, y)
        ratio = metrics.bwr_per_path(result, k)
        degenerate = not (np.all(np.isfinite(ratio)) and math.isfinite(cv_x) and math.isfinite(cv_y))
        if degenerate or np.all(y == 0):
            degenerate = True
            pred = 0.0 if cv_x == 0 and cv_y == 0 else math.nan
        else:
            pred = delta_cv_ratio(cv_x, cv_y, rho)
        emp = _cv(ratio) if np.all(np.isfinite(ratio)) else math.nan
        report.rows.append(FilteringRow(k, cv_x, cv_y, rho, pred, emp, degenerate))
    return report


@dataclass
class ConcentrationReport:
    cvs: np.ndarray
    corr: np.ndarray
    predicted_cv: float
    naive_cv: float
    empirical_cv: float

    @property
    def has_negative_correlation(self) -> bool:
        iu = np.triu_indices(self.corr.shape[0], 1)
        return bool(np.any(self.corr[iu] < 0))

    def rel_error(self) -> float:
        return abs(self.predicted_cv - self.empirical_cv) / self.empirical_cv


def cumulative_concentration_report(result, k: int | None = None) -> ConcentrationReport:
    """Full-covariance and independence predictions of CV(BWR_cum) vs the empirical CV."""
    _check_paths(result)
    k = result.K if k is None else k
    ratios = np.stack([metrics.bwr_per_path(result, j) for j in range(1, k + 1)], axis=1)
    if not np.all(np.isfinite(ratios)):
        raise AnalysisError("per-echelon BWR is infinite on some path")
    cvs = np.array([_cv(ratios[:, j]) for j in range(k)])
    corr = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            corr[i, j] = corr[j, i] = _corr(ratios[:, i], ratios[:, j])
    cum = metrics.cumulative_bwr(result, k).per_path
    return ConcentrationReport(
        cvs=cvs,
        corr=corr,
        predicted_cv=delta_cv_product(cvs, corr),
        naive_cv=float(np.sqrt(np.sum(cvs ** 2))),
        empirical_cv=_cv(cum),
    )
