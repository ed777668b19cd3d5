"""Ensemble statistics over echo records and the ergodization-time relations.

Two ensemble averages of the same echo deviations carry different
information:

    G(dt) = < ln sqrt(sum_i dn_i^2) >   -> lambda_max * dt
    W(dt) = ln < sqrt(sum_i dn_i^2) >   -> Lambda * dt

The mean of logs tracks the typical realization, so its slope estimates the
largest Lyapunov exponent; the log of the mean is dominated by the
fastest-growing realizations and estimates the generalized exponent
Lambda >= lambda_max.  The variance of the log deviations across the
ensemble,

    sigma_G^2(dt) -> 2 (Lambda - lambda_max) dt,

grows diffusively exactly when the stretching-rate fluctuations decorrelate
inside the observation window: sigma_G^2/(2 dt) leveling off at
Lambda - lambda_max is the operational ergodicity criterion, and a ratio
that keeps climbing marks a lattice whose chaotic fluctuations have not
ergodized on the accessible times.

Three ergodization-time estimates are compared:

    integral route     tau = integral phi / phi(0)            (direct chains)
    fluctuation route  tau = (Lambda - lambda_max)/<dlam^2>   (echo + direct)
    empirical route    <dlam^2> ~ 4 lambda_max^2 / N_nn^2     (no extra input)

All W-type averages use max-shifted summation; averaging exp(log_deviation)
directly overflows at echo scales.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import kendalltau, kurtosis, skew

from .echo import EchoRecord
from .lyapunov import LyapunovSummary


class FitWindowError(ValueError):
    """The window policy selected no usable stretch of the curve."""


@dataclass
class EnsembleStats:
    """Per-grid-point ensemble averages of echo log deviations."""

    dt_grid: np.ndarray
    G: np.ndarray
    W: np.ndarray
    sigma_G2: np.ndarray
    count: np.ndarray
    g_stderr: np.ndarray
    w_stderr: np.ndarray
    s2_stderr: np.ndarray

    def __post_init__(self):
        if np.any(self.W < self.G):
            raise ValueError("W < G somewhere: averaging broke Jensen's inequality")
        if np.any(self.sigma_G2 < 0):
            raise ValueError("negative sigma_G2")


@dataclass(frozen=True)
class WindowPolicy:
    """Fit-window rule for the growth curves.

    The window opens at the first grid point at least ``rise`` natural-log
    units above the curve's starting value and closes at the last point at
    least ``margin`` units below the saturation plateau (mean of the final
    ``plateau_fraction`` of the curve).  ``window`` overrides both with
    explicit [t_lo, t_hi] bounds.
    """

    rise: float = 5.0
    margin: float = 3.0
    plateau_fraction: float = 0.1
    window: tuple[float, float] | None = None
    saturation_quantile: float = 0.1


@dataclass
class FitResult:
    slope: float
    intercept: float
    window: tuple[float, float]
    residual_rms: float
    slope_stderr: float


@dataclass
class VarianceRatioCurve:
    """sigma_G^2/(2 dt) against dt with its leveling diagnostics; the
    plateau is the median of the ratio over the growth-fit window, the
    drift is the fitted change across the window as a fraction of the
    plateau, and the trend fields hold a Kendall-tau monotonicity test."""

    dt_grid: np.ndarray
    ratio: np.ndarray
    window: tuple[float, float]
    plateau: float
    drift_fraction: float
    trend_tau: float
    trend_p: float


@dataclass
class GaussianityRow:
    dt: float
    skewness: float
    skew_stderr: float
    excess_kurtosis: float
    kurtosis_stderr: float
    non_gaussian: bool


def _record_matrix(records):
    records = list(records)
    if not records:
        raise ValueError("no records to aggregate")
    grid = records[0].dt_grid
    for r in records[1:]:
        if not np.array_equal(r.dt_grid, grid):
            raise ValueError("records disagree on the dt grid")
    return grid, np.stack([r.log_deviation for r in records])


def _log_mean_exp(logs, axis=0):
    shift = np.max(logs, axis=axis, keepdims=True)
    out = shift.squeeze(axis) + np.log(np.mean(np.exp(logs - shift), axis=axis))
    return out


def aggregate(records) -> EnsembleStats:
    """Ensemble averages per grid point: G (mean of logs), W (log of mean,
    max-shifted), sigma_G2 (unbiased variance of logs), with stderr bands.

    A single record gives W = G and sigma_G2 = 0.  Permutation-invariant in
    the record list up to floating-point addition order.
    """
    grid, logs = _record_matrix(records)
    m = logs.shape[0]
    g = logs.mean(axis=0)
    w = _log_mean_exp(logs, axis=0)
    if m > 1:
        s2 = logs.var(axis=0, ddof=1)
        # delta method on the shifted mean of exp(logs)
        shift = np.max(logs, axis=0)
        y = np.exp(logs - shift)
        w_err = y.std(axis=0, ddof=1) / (np.sqrt(m) * y.mean(axis=0))
        s2_err = s2 * np.sqrt(2.0 / (m - 1))
    else:
        s2 = np.zeros_like(g)
        w_err = np.zeros_like(g)
        s2_err = np.zeros_like(g)
    # the estimators satisfy W >= G analytically; enforce against rounding
    w = np.maximum(w, g)
    return EnsembleStats(
        dt_grid=grid,
        G=g,
        W=w,
        sigma_G2=s2,
        count=np.full(grid.shape, m, dtype=int),
        g_stderr=np.sqrt(s2 / m),
        w_stderr=w_err,
        s2_stderr=s2_err,
    )


def _window_indices(dt, curve, policy: WindowPolicy):
    if policy.window is not None:
        lo, hi = policy.window
        idx = np.nonzero((dt >= lo) & (dt <= hi))[0]
        if idx.size == 0:
            raise FitWindowError(f"manual window [{lo}, {hi}] contains no grid points")
        return idx
    start = curve[0]
    tail = max(1, int(round(policy.plateau_fraction * len(curve))))
    plateau = float(np.mean(curve[-tail:]))
    above = np.nonzero(curve >= start + policy.rise)[0]
    below = np.nonzero(curve <= plateau - policy.margin)[0]
    if above.size == 0 or below.size == 0 or below[-1] < above[0]:
        raise FitWindowError(
            f"window policy (rise={policy.rise}, margin={policy.margin}) selected "
            f"no points: curve spans {curve[0]:.2f}..{curve.max():.2f} with "
            f"plateau {plateau:.2f}"
        )
    return np.arange(above[0], below[-1] + 1)


def _ols(t, y):
    tbar = t.mean()
    ybar = y.mean()
    dt = t - tbar
    slope = float(np.dot(dt, y - ybar) / np.dot(dt, dt))
    intercept = float(ybar - slope * tbar)
    resid = y - (intercept + slope * t)
    rms = float(np.sqrt(np.mean(resid**2)))
    n = len(t)
    if n > 2:
        stderr = float(np.sqrt(np.dot(resid, resid) / (n - 2) / np.dot(dt, dt)))
    else:
        stderr = 0.0
    return slope, intercept, rms, stderr


def fit_growth(stats: EnsembleStats, which: str = "G", policy: WindowPolicy | None = None,
               records=None, n_boot: int = 200, boot_seed: int = 0) -> FitResult:
    """Least-squares slope of G or W over the policy window.

    With ``records`` given, the slope stderr comes from bootstrap
    resampling of whole records (n_boot resamples, fixed window), which
    respects the correlation of neighboring grid points; otherwise the
    plain OLS formula is reported.
    """
    if which not in ("G", "W"):
        raise ValueError(f"which must be 'G' or 'W', got {which!r}")
    policy = policy or WindowPolicy()
    curve = stats.G if which == "G" else stats.W
    idx = _window_indices(stats.dt_grid, curve, policy)
    if which == "W" and records is not None and policy.window is None:
        # W is carried by the fastest-growing records; once those clip at
        # their own saturation plateaus the curve bends down and the slope
        # no longer measures growth.  Cap the window at the decile of
        # per-record saturation-crossing times.
        _, logs = _record_matrix(records)
        tail = max(1, int(round(policy.plateau_fraction * logs.shape[1])))
        own_plateau = logs[:, -tail:].mean(axis=1)
        crossings = []
        for row, plat in zip(logs, own_plateau):
            hit = np.nonzero(row >= plat - policy.margin)[0]
            crossings.append(stats.dt_grid[hit[0]] if hit.size else stats.dt_grid[-1])
        t_cap = float(np.quantile(crossings, policy.saturation_quantile))
        idx = idx[stats.dt_grid[idx] <= t_cap]
    if idx.size < 10:
        raise FitWindowError(
            f"only {idx.size} grid points in the {which} fit window; need >= 10"
        )
    t = stats.dt_grid[idx]
    slope, intercept, rms, stderr = _ols(t, curve[idx])
    if records is not None:
        _, logs = _record_matrix(records)
        m = logs.shape[0]
        rng = np.random.default_rng(boot_seed)
        slopes = np.empty(n_boot)
        win_logs = logs[:, idx]
        for b in range(n_boot):
            pick = rng.integers(0, m, size=m)
            sample = win_logs[pick]
            y = sample.mean(axis=0) if which == "G" else _log_mean_exp(sample, axis=0)
            slopes[b] = _ols(t, y)[0]
        stderr = float(np.std(slopes, ddof=1))
    return FitResult(slope=slope, intercept=intercept,
                     window=(float(t[0]), float(t[-1])),
                     residual_rms=rms, slope_stderr=stderr)


def variance_ratio_curve(stats: EnsembleStats, policy: WindowPolicy | None = None) -> VarianceRatioCurve:
    """sigma_G^2/(2 dt) with plateau and drift diagnostics over the window
    the G curve selects (the echo's own growth regime)."""
    policy = policy or WindowPolicy()
    ratio = stats.sigma_G2 / (2.0 * stats.dt_grid)
    idx = _window_indices(stats.dt_grid, stats.G, policy)
    t = stats.dt_grid[idx]
    r = ratio[idx]
    plateau = float(np.median(r))
    slope, _, _, _ = _ols(t, r)
    drift = abs(slope) * (t[-1] - t[0]) / plateau if plateau > 0 else np.inf
    tau, p = kendalltau(t, r)
    return VarianceRatioCurve(
        dt_grid=stats.dt_grid,
        ratio=ratio,
        window=(float(t[0]), float(t[-1])),
        plateau=plateau,
        drift_fraction=float(drift),
        trend_tau=float(tau),
        trend_p=float(p),
    )


def ergodic_verdict(ratio: VarianceRatioCurve, lambda_max: float, Lambda: float) -> str:
    """Deterministic verdict from the ratio diagnostics.

    ergodic: plateau within 50% of Lambda - lambda_max and drift across the
    window below 30% of the level.  not-ergodized: the ratio trends
    monotonically (Kendall p < 0.01) with drift above 30%.  Anything else
    is inconclusive.
    """
    expected = Lambda - lambda_max
    if expected > 0 and abs(ratio.plateau - expected) <= 0.5 * expected \
            and ratio.drift_fraction <= 0.3:
        return "ergodic"
    if ratio.trend_p < 0.01 and ratio.drift_fraction > 0.3:
        return "not-ergodized"
    return "inconclusive"


def tau_erg_eq9(lambda_max: float, Lambda: float, var_dlambda: float,
                stderrs=(0.0, 0.0, 0.0)) -> tuple[float, float]:
    """(Lambda - lambda_max)/<dlambda^2> with first-order error propagation
    from (lambda_max, Lambda, var) standard errors."""
    if var_dlambda <= 0:
        raise ValueError(f"var_dlambda must be positive, got {var_dlambda}")
    s_lam, s_big, s_var = stderrs
    value = (Lambda - lambda_max) / var_dlambda
    err = np.sqrt(
        (s_lam**2 + s_big**2) / var_dlambda**2
        + (value * s_var / var_dlambda) ** 2
    )
    return float(value), float(err)


def var_empirical_eq10(lambda_max: float, n_nn: int) -> float:
    """Empirical stretching-rate variance 4 lambda_max^2 / N_nn^2: one
    strong fluctuation when the perturbation reaches a site's neighbors."""
    if n_nn < 1:
        raise ValueError(f"N_nn must be >= 1, got {n_nn}")
    return 4.0 * lambda_max**2 / n_nn**2


def tau_erg_eq11(lambda_max: float, Lambda: float, n_nn: int) -> float:
    """Run-free ergodization estimate (Lambda - lambda_max) N_nn^2/(4 lambda_max^2),
    the fluctuation route with the empirical variance substituted in."""
    if lambda_max <= 0:
        raise ValueError(f"lambda_max must be positive, got {lambda_max}")
    return (Lambda - lambda_max) * n_nn**2 / (4.0 * lambda_max**2)


def anderson_weiss_check(series, t: float):
    """Gaussian-fluctuation consistency: window averages of
    (1/t) ln <exp(integral dlambda)> against the autocorrelation integral.

    Splits the series into non-overlapping windows of length t, forms
    lhs = (1/t) ln mean_w exp(sum_w dlambda dt_r) with max-shifted
    summation, and compares with rhs = integral of phi (the same integral
    tau_erg uses, before normalization).  Also returns the finite-time
    constant C = exp(-integral t' phi dt') entering the corrected growth
    law.  For a Gaussian process with short memory and t well past the
    correlation time, lhs -> rhs.
    """
    from .lyapunov import StretchSeries, autocorrelation, tau_erg_integral

    if not isinstance(series, StretchSeries):
        raise TypeError("anderson_weiss_check expects a single StretchSeries")
    dt_r = series.dt_r
    w = round(t / dt_r)
    if w < 1 or abs(w * dt_r - t) > 1e-9 * t:
        raise ValueError(f"t={t} must be an integer multiple of dt_r={dt_r}")
    rates = series.rates
    n_win = len(rates) // w
    if n_win < 2:
        raise ValueError(f"series too short for even two windows of {w} samples")
    if n_win < 100:
        warnings.warn(
            f"only {n_win} windows of length t={t}; lhs estimate will be noisy",
            stacklevel=2,
        )
    d = rates - rates.mean()
    sums = d[: n_win * w].reshape(n_win, w).sum(axis=1) * dt_r
    shift = sums.max()
    lhs = (shift + np.log(np.mean(np.exp(sums - shift)))) / t

    max_lag = (len(rates) - 1) // 10
    phi = autocorrelation(series, min(max_lag, 1000))
    if phi[0] <= 0:
        return float(lhs), 0.0, 1.0
    res = tau_erg_integral(phi, dt_r)
    lags_t = np.arange(res.cutoff_lag + 1) * dt_r
    moment = np.trapezoid(lags_t * phi[: res.cutoff_lag + 1], dx=dt_r)
    return float(lhs), float(res.integral), float(np.exp(-moment))


def gaussianity_check(records, dt_values) -> list[GaussianityRow]:
    """Skewness and excess kurtosis of the log deviations at chosen dt,
    flagging |skewness| > 3 stderr as non-Gaussian."""
    grid, logs = _record_matrix(records)
    m = logs.shape[0]
    if m < 50:
        raise ValueError(f"need at least 50 records for moment tests, got {m}")
    ses = np.sqrt(6.0 * m * (m - 1) / ((m - 2) * (m + 1) * (m + 3)))
    sek = 2.0 * ses * np.sqrt((m**2 - 1) / ((m - 3) * (m + 5)))
    rows = []
    for dt in dt_values:
        near = np.abs(grid - dt)
        idx = int(np.argmin(near))
        if near[idx] > 1e-9 * max(1.0, abs(dt)):
            raise ValueError(f"dt={dt} is not on the record grid")
        sample = logs[:, idx]
        sk = float(skew(sample, bias=False))
        ku = float(kurtosis(sample, bias=False))
        rows.append(GaussianityRow(
            dt=float(grid[idx]),
            skewness=sk,
            skew_stderr=float(ses),
            excess_kurtosis=ku,
            kurtosis_stderr=float(sek),
            non_gaussian=bool(abs(sk) > 3.0 * ses),
        ))
    return rows


@dataclass
class ErgodizationReport:
    """Every number the ergodicity comparison needs, with the verdict the
    deterministic rules produce from them.  errors maps field names to
    standard errors where one is defined."""

    lambda_max_echo: float
    Lambda: float
    lambda_max_direct: float
    var_dlambda_direct: float
    var_dlambda_empirical: float
    tau_erg_eq4: float
    tau_erg_eq9: float
    tau_erg_eq11: float
    plateau_level: float
    plateau_expected: float
    ergodic_verdict: str
    errors: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = (self.Lambda - self.lambda_max_direct) / self.var_dlambda_direct
        if self.tau_erg_eq9 != expected:
            raise ValueError("tau_erg_eq9 does not equal its defining ratio")


def ergodization_report(direct: LyapunovSummary, fit_g: FitResult, fit_w: FitResult,
                        n_nn: int, ratio: VarianceRatioCurve) -> ErgodizationReport:
    """Assemble the cross-method report: echo slopes, direct statistics,
    the three ergodization times, and the plateau verdict.

    Eq.-9-style quantities use the direct lambda_max (the tighter
    estimate); the expected plateau is Lambda - lambda_max_direct, the
    same difference the fluctuation route integrates.
    """
    lam = direct.lambda_max
    big = fit_w.slope
    var = direct.var_dlambda
    eq9, eq9_err = tau_erg_eq9(lam, big, var,
                               stderrs=(direct.lambda_stderr, fit_w.slope_stderr,
                                        direct.var_stderr))
    eq10 = var_empirical_eq10(lam, n_nn)
    eq11 = tau_erg_eq11(lam, big, n_nn)
    # d(eq11)/dLambda and d(eq11)/dlambda for first-order propagation
    pref = n_nn**2 / (4.0 * lam**2)
    d_big = pref
    d_lam = -pref * (1.0 + 2.0 * (big - lam) / lam)
    eq11_err = float(np.sqrt((d_big * fit_w.slope_stderr) ** 2
                             + (d_lam * direct.lambda_stderr) ** 2))
    verdict = ergodic_verdict(ratio, lam, big)
    return ErgodizationReport(
        lambda_max_echo=fit_g.slope,
        Lambda=big,
        lambda_max_direct=lam,
        var_dlambda_direct=var,
        var_dlambda_empirical=eq10,
        tau_erg_eq4=direct.tau_erg_eq4,
        tau_erg_eq9=eq9,
        tau_erg_eq11=eq11,
        plateau_level=ratio.plateau,
        plateau_expected=big - lam,
        ergodic_verdict=verdict,
        errors={
            "lambda_max_echo": fit_g.slope_stderr,
            "Lambda": fit_w.slope_stderr,
            "lambda_max_direct": direct.lambda_stderr,
            "var_dlambda_direct": direct.var_stderr,
            "var_dlambda_empirical": 8.0 * lam * direct.lambda_stderr / n_nn**2,
            "tau_erg_eq4": direct.tau_stderr,
            "tau_erg_eq9": eq9_err,
            "tau_erg_eq11": eq11_err,
        },
    )
