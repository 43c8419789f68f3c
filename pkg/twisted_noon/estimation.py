"""
Analysis chain for rotation scans.

Fringes are fitted with A/2 (1 - cos(2 N l phi - c)) + D, phi in radians,
by weighted least squares. Everything downstream (Fisher information, angular
uncertainty, Cramer-Rao comparison, sensitivities) works from that fit.
Angles are radians internally and degrees in every returned table.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.optimize import least_squares, minimize_scalar
from scipy.signal import lombscargle

from .converters import ScanConverter
from .exceptions import (
    DomainError,
    FitConvergenceError,
    InsufficientDataError,
    PeriodAliasError,
    detect_and_raise_error,
)
from .fock import check_ell, check_photons
from .simulation import LossModel

logger = logging.getLogger(__name__)

MIN_ANGLES = 8
N_STARTS = 8
SIN_FLOOR = 1e-3
ALIAS_TOLERANCE = 0.3
THEORY_VISIBILITY = 0.9999
DEG = math.pi / 180.0


def _weighted_data(dataset, position_column):
    frame = ScanConverter().convert_metrics(dataset.summary_frame())
    positions = frame[position_column].to_numpy(dtype=float)
    mean = frame["mean"].to_numpy(dtype=float)
    variance = frame["variance"].to_numpy(dtype=float)
    floor = np.maximum(1.0, mean)
    sigma = np.sqrt(np.maximum(variance, floor) / dataset.repetitions)
    return positions, mean, sigma


def _multistart(residuals, jac, starts, lower, upper, what):
    """
    Run a bounded trust-region fit from every start and keep the lowest cost.
    """
    results = []
    for x0 in starts:
        x0 = np.clip(np.asarray(x0, dtype=float), lower, upper)
        result = least_squares(
            residuals,
            x0,
            jac=jac,
            bounds=(lower, upper),
            method="trf",
            x_scale="jac",
            ftol=1e-12,
            xtol=1e-12,
            gtol=1e-12,
            max_nfev=2000,
        )
        logger.debug(
            "%s start %s -> cost %.6g (status %d)",
            what,
            np.round(x0, 4),
            result.cost,
            result.status,
        )
        results.append(result)
    converged = [r for r in results if r.success]
    if not converged:
        detect_and_raise_error(min(results, key=lambda r: r.cost), what)
    return min(converged, key=lambda r: r.cost)


def _polish(params, residuals, jac, lower, upper, steps=3):
    """Plain Gauss-Newton steps from a converged optimum while the cost drops."""
    params = np.asarray(params, dtype=float)
    cost = np.sum(residuals(params) ** 2)
    for _ in range(steps):
        r = residuals(params)
        j = jac(params)
        step = np.linalg.lstsq(j, -r, rcond=None)[0]
        trial = params + step
        if np.any(trial < lower) or np.any(trial > upper):
            break
        trial_cost = np.sum(residuals(trial) ** 2)
        if not trial_cost <= cost:
            break
        params, cost = trial, trial_cost
    return params


def _covariance(j):
    cov = np.linalg.pinv(j.T @ j)
    return (cov + cov.T) / 2.0


def fringe_model(phi, amplitude, offset, background, n_photons, ell):
    """Expected counts at rotation ``phi`` (rad)."""
    u = 2 * n_photons * abs(ell) * np.asarray(phi) - offset
    return amplitude / 2.0 * (1.0 - np.cos(u)) + background


@dataclass(frozen=True, eq=False)
class FringeFit:
    """
    Fitted fringe. ``covariance`` is ordered (A, c, D); c is in radians and
    wrapped to [-pi, pi).
    """

    n_photons: int
    ell: int
    A: float
    c: float
    D: float
    covariance: np.ndarray
    chi2: float
    n_points: int
    optimality: float = 0.0

    @property
    def k(self):
        return 2 * self.n_photons * abs(self.ell)

    @property
    def se(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def period_deg(self):
        return 180.0 / (self.n_photons * abs(self.ell))

    @property
    def visibility(self):
        return self.A / (self.A + 2.0 * self.D)

    @property
    def visibility_se(self):
        denominator = (self.A + 2.0 * self.D) ** 2
        gradient = np.array([2.0 * self.D, -2.0 * self.A]) / denominator
        cov = self.covariance[np.ix_([0, 2], [0, 2])]
        return float(math.sqrt(max(gradient @ cov @ gradient, 0.0)))

    def phase(self, phi):
        return self.k * np.asarray(phi) - self.c

    def model(self, phi):
        return fringe_model(phi, self.A, self.c, self.D, self.n_photons, self.ell)

    def derivative(self, phi):
        """d(model)/d(phi) per radian."""
        return self.A * self.n_photons * abs(self.ell) * np.sin(self.phase(phi))

    def to_dict(self):
        se_a, se_c, se_d = self.se
        return {
            "n_photons": self.n_photons,
            "ell": self.ell,
            "A": self.A,
            "A_se": se_a,
            "c": self.c,
            "c_se": se_c,
            "D": self.D,
            "D_se": se_d,
            "visibility": self.visibility,
            "visibility_se": self.visibility_se,
            "period_deg": self.period_deg,
            "chi2": self.chi2,
            "n_points": self.n_points,
            "covariance": self.covariance.tolist(),
        }


def _check_coverage(phi, n_photons, ell):
    if phi.size < MIN_ANGLES:
        raise InsufficientDataError(
            f"fringe fit needs at least {MIN_ANGLES} angles, got {phi.size}"
        )
    period = 2 * math.pi / (2 * n_photons * abs(ell))
    step = float(np.median(np.diff(phi)))
    if (phi[-1] - phi[0]) + step < period * (1.0 - 1e-9):
        raise InsufficientDataError(
            f"angles span {math.degrees(phi[-1] - phi[0] + step):.6g} deg, "
            f"less than one fringe period of {math.degrees(period):.6g} deg"
        )


def lomb_scargle_period(phi, counts, k):
    """Period (rad) of the strongest periodogram peak within [k/4, 4k]."""
    freqs = np.linspace(0.25 * k, 4.0 * k, 4000)
    power = lombscargle(phi, counts - counts.mean(), freqs)
    return 2 * math.pi / freqs[int(np.argmax(power))]


def _check_aliasing(phi, counts, n_photons, ell):
    k = 2 * n_photons * abs(ell)
    expected = 180.0 / (n_photons * abs(ell))
    estimated = math.degrees(lomb_scargle_period(phi, counts, k))
    if abs(estimated - expected) > ALIAS_TOLERANCE * expected:
        raise PeriodAliasError(expected, estimated)
    return estimated


def _fringe_problem(phi, counts, sigma, k):
    def residuals(p):
        a, c, d = p
        return (a / 2.0 * (1.0 - np.cos(k * phi - c)) + d - counts) / sigma

    def jac(p):
        a, c, _ = p
        u = k * phi - c
        return np.column_stack(
            [(1.0 - np.cos(u)) / 2.0 / sigma, -a / 2.0 * np.sin(u) / sigma, 1.0 / sigma]
        )

    return residuals, jac


def fit_fringe(dataset, n_photons=None, ell=None, check_aliasing=True):
    """
    Weighted least-squares fit of the fringe model to a rotation scan.

    Per-angle means are weighted by the reciprocal of the measured variance
    (floored at max(1, mean)) divided by the repetition count. The period is
    fixed by N and l; the fit restarts from eight phase offsets.

    :param dataset: rotation scan
    :type dataset: ScanDataset

    :param n_photons: photon number, defaults to the dataset's
    :type n_photons: int

    :param ell: OAM value, defaults to the dataset's
    :type ell: int

    :param check_aliasing: compare the periodogram peak with the expected period
    :type check_aliasing: bool

    :raises InsufficientDataError: fewer than 8 angles or less than one period
    :raises PeriodAliasError: periodogram period off by more than 30%
    :raises FitConvergenceError: no restart converged
    """
    n_photons = check_photons(n_photons or dataset.n_photons)
    ell = check_ell(ell or dataset.ell)
    phi, counts, sigma = _weighted_data(dataset, "angle_rad")
    _check_coverage(phi, n_photons, ell)
    if check_aliasing:
        _check_aliasing(phi, counts, n_photons, ell)

    k = 2 * n_photons * abs(ell)
    residuals, jac = _fringe_problem(phi, counts, sigma, k)
    a0 = max(counts.max() - counts.min(), 1e-9)
    d0 = max(counts.min(), 1e-6 * a0)
    phases = np.linspace(-math.pi, math.pi, N_STARTS, endpoint=False)
    starts = [(a0, c0, d0) for c0 in phases]
    lower = np.array([0.0, -np.inf, 0.0])
    upper = np.full(3, np.inf)
    best = _multistart(residuals, jac, starts, lower, upper, "fringe fit")
    params = _polish(best.x, residuals, jac, lower, upper)

    a, c, d = params
    if not a > 0:
        raise FitConvergenceError(
            "fringe fit found no fringe amplitude", 2.0 * best.cost
        )
    r = residuals(params)
    j = jac(params)
    fit = FringeFit(
        n_photons,
        ell,
        float(a),
        float((c + math.pi) % (2 * math.pi) - math.pi),
        float(d),
        _covariance(j),
        float(r @ r),
        int(phi.size),
        float(np.max(np.abs(j.T @ r))),
    )
    logger.debug(
        "fringe fit N=%d l=%d: A=%.6g c=%.4f D=%.6g V=%.5f",
        n_photons,
        ell,
        fit.A,
        fit.c,
        fit.D,
        fit.visibility,
    )
    return fit


@dataclass(frozen=True)
class PeriodEstimate:
    period_deg: float
    period_se_deg: float
    periodogram_deg: float


def estimate_period(dataset, n_photons=None, ell=None):
    """
    Fit the fringe with a free period, seeded from the periodogram peak.
    """
    n_photons = check_photons(n_photons or dataset.n_photons)
    ell = check_ell(ell or dataset.ell)
    phi, counts, sigma = _weighted_data(dataset, "angle_rad")
    _check_coverage(phi, n_photons, ell)
    k0 = 2 * math.pi / lomb_scargle_period(phi, counts, 2 * n_photons * abs(ell))

    def residuals(p):
        a, k, c, d = p
        return (a / 2.0 * (1.0 - np.cos(k * phi - c)) + d - counts) / sigma

    def jac(p):
        a, k, c, _ = p
        s = a / 2.0 * np.sin(k * phi - c) / sigma
        return np.column_stack(
            [(1.0 - np.cos(k * phi - c)) / 2.0 / sigma, s * phi, -s, 1.0 / sigma]
        )

    a0 = max(counts.max() - counts.min(), 1e-9)
    d0 = max(counts.min(), 1e-6 * a0)
    phases = np.linspace(-math.pi, math.pi, N_STARTS, endpoint=False)
    starts = [(a0, k0, c0, d0) for c0 in phases]
    lower = np.array([0.0, 0.0, -np.inf, 0.0])
    upper = np.full(4, np.inf)
    best = _multistart(residuals, jac, starts, lower, upper, "period fit")
    k = best.x[1]
    k_se = math.sqrt(max(_covariance(jac(best.x))[1, 1], 0.0))
    period = 360.0 / k
    return PeriodEstimate(period, period * k_se / k, 360.0 / k0)


@dataclass(eq=False)
class AngularUncertainty:
    """
    Per-angle uncertainty Delta phi (deg) from the spread of the repetitions.
    Flagged angles (fringe extrema or zero spread) hold NaN.
    """

    n_photons: int
    ell: int
    angle_deg: np.ndarray
    delta_phi_deg: np.ndarray
    usable: np.ndarray
    sin_phase: np.ndarray
    poisson_delta_phi_deg: np.ndarray

    def best(self, count=4):
        """Indices of the ``count`` smallest usable uncertainties."""
        idx = np.flatnonzero(self.usable)
        return idx[np.argsort(self.delta_phi_deg[idx], kind="stable")[:count]]

    def to_frame(self):
        return pd.DataFrame(
            {
                "angle_deg": self.angle_deg,
                "delta_phi_deg": self.delta_phi_deg,
                "poisson_delta_phi_deg": self.poisson_delta_phi_deg,
                "sin_phase": self.sin_phase,
                "usable": self.usable,
            }
        )


def poisson_uncertainty(fit, angles_deg, sin_floor=SIN_FLOOR):
    """Delta phi (deg) if the count spread were exactly Poissonian around the fit."""
    phi = np.deg2rad(np.asarray(angles_deg, dtype=float))
    sin_u = np.abs(np.sin(fit.phase(phi)))
    out = np.full(phi.shape, np.nan)
    ok = sin_u >= sin_floor
    slope = fit.A * fit.n_photons * abs(fit.ell) * DEG * sin_u[ok]
    out[ok] = np.sqrt(np.maximum(fit.model(phi[ok]), 0.0)) / slope
    return out


def angular_uncertainty(dataset, fit, n_photons=None, ell=None, sin_floor=SIN_FLOOR):
    """
    Delta phi = Delta M / (A N l (pi/180) |sin(2 N l phi - c)|), in degrees.

    :param dataset: rotation scan with at least two repetitions per angle
    :type dataset: ScanDataset

    :param fit: fringe fit of the same scan
    :type fit: FringeFit
    """
    n_photons = n_photons or fit.n_photons
    ell = ell or fit.ell
    if n_photons != fit.n_photons or abs(ell) != abs(fit.ell):
        raise DomainError("photon number and OAM value must match the fit")
    if dataset.repetitions < 2:
        raise InsufficientDataError(
            "angular uncertainty needs at least two repetitions"
        )
    phi = dataset.angles_rad()
    std = dataset.std
    sin_u = np.sin(fit.phase(phi))
    usable = (np.abs(sin_u) >= sin_floor) & (std > 0)
    delta = np.full(phi.shape, np.nan)
    slope = fit.A * n_photons * abs(ell) * DEG * np.abs(sin_u[usable])
    delta[usable] = std[usable] / slope
    flagged = int(np.count_nonzero(~usable))
    if flagged:
        logger.debug("%d angles flagged as unusable for the uncertainty", flagged)
    return AngularUncertainty(
        n_photons,
        ell,
        dataset.angles_deg(),
        delta,
        usable,
        sin_u,
        poisson_uncertainty(fit, dataset.angles_deg(), sin_floor),
    )


def _eta(loss, n_photons):
    eta = loss.total_eta(n_photons) if isinstance(loss, LossModel) else float(loss)
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"efficiency must lie in (0, 1], got {eta}")
    return eta


def total_trials(fit, eta):
    """M_T = (A + D) / eta."""
    return (fit.A + fit.D) / eta


def detection_probability(fit, eta, phi):
    """P1(phi) = eta f(phi) / (A + D); phi in radians."""
    return eta * fit.model(phi) / (fit.A + fit.D)


def detection_probability_derivative(fit, eta, phi):
    return eta * fit.derivative(phi) / (fit.A + fit.D)


@dataclass(eq=False)
class FisherCurve:
    """
    Two-outcome Fisher information per trial (rad^-2) on a degree grid.
    Points where P1 reaches 0 or 1 are flagged and hold NaN.
    """

    angle_deg: np.ndarray
    information: np.ndarray
    valid: np.ndarray
    phase: np.ndarray
    p1: np.ndarray
    total_trials: float
    eta: float

    def to_frame(self):
        return pd.DataFrame(
            {
                "angle_deg": self.angle_deg,
                "p1": self.p1,
                "fisher": self.information,
                "fisher_x_trials": self.information * self.total_trials,
                "valid": self.valid,
            }
        )


def fisher_information(fit, loss, n_photons=None, ell=None, phi_grid=None):
    """
    F(phi) = sum over the outcomes {detected, lost} of (dP/dphi)^2 / P.

    :param fit: fringe fit
    :type fit: FringeFit

    :param loss: loss model, or the total efficiency eta directly
    :type loss: LossModel or float

    :param phi_grid: angles in degrees, one fringe period at 0.1% steps when None
    :type phi_grid: array-like
    """
    n_photons = n_photons or fit.n_photons
    ell = ell or fit.ell
    if n_photons != fit.n_photons or abs(ell) != abs(fit.ell):
        raise DomainError("photon number and OAM value must match the fit")
    eta = _eta(loss, n_photons)
    if phi_grid is None:
        phi_grid = np.linspace(0.0, fit.period_deg, 1001)
    angle_deg = np.asarray(phi_grid, dtype=float)
    phi = np.deg2rad(angle_deg)
    p1 = detection_probability(fit, eta, phi)
    dp1 = detection_probability_derivative(fit, eta, phi)
    valid = (p1 > 0.0) & (p1 < 1.0)
    information = np.full(phi.shape, np.nan)
    slope = dp1[valid] ** 2
    information[valid] = slope / p1[valid] + slope / (1.0 - p1[valid])
    if not np.all(valid):
        logger.warning(
            "%d Fisher points flagged: P1 at 0 or 1", int(np.count_nonzero(~valid))
        )
    return FisherCurve(
        angle_deg, information, valid, fit.phase(phi), p1, total_trials(fit, eta), eta
    )


@dataclass(eq=False)
class CrbReport:
    """
    ratio = 1 / (Var M_T F) per shared angle; values at or below 1 respect the bound.
    """

    angle_deg: np.ndarray
    ratio: np.ndarray
    near_midpoint: np.ndarray
    tolerance: float

    @property
    def fraction_within(self):
        ok = ~np.isnan(self.ratio)
        if not ok.any():
            return math.nan
        return float(np.mean(self.ratio[ok] <= 1.0 + self.tolerance))

    @property
    def median_midpoint(self):
        sel = self.near_midpoint & ~np.isnan(self.ratio)
        return float(np.median(self.ratio[sel])) if sel.any() else math.nan

    def to_frame(self):
        return pd.DataFrame(
            {
                "angle_deg": self.angle_deg,
                "ratio": self.ratio,
                "near_midpoint": self.near_midpoint,
            }
        )

    def summary(self):
        return {
            "points": int(np.count_nonzero(~np.isnan(self.ratio))),
            "fraction_within": self.fraction_within,
            "median_midpoint_ratio": self.median_midpoint,
            "tolerance": self.tolerance,
        }


def crb_check(fisher, uncertainties, tolerance=0.1):
    """
    Compare measured variances with the Cramer-Rao bound 1 / (M_T F).

    :param fisher: Fisher curve evaluated on the measured angles
    :type fisher: FisherCurve

    :param uncertainties: per-angle uncertainties
    :type uncertainties: AngularUncertainty
    """
    left = pd.DataFrame(
        {
            "key": np.round(fisher.angle_deg, 9),
            "angle_deg": fisher.angle_deg,
            "fisher": fisher.information,
            "cos_phase": np.cos(fisher.phase),
        }
    )
    right = pd.DataFrame(
        {
            "key": np.round(uncertainties.angle_deg, 9),
            "delta_phi_deg": uncertainties.delta_phi_deg,
        }
    )
    merged = left.merge(right, on="key", how="inner")
    if merged.empty:
        raise InsufficientDataError("Fisher grid and uncertainty angles do not overlap")
    variance = np.deg2rad(merged["delta_phi_deg"].to_numpy()) ** 2
    ratio = 1.0 / (variance * fisher.total_trials * merged["fisher"].to_numpy())
    return CrbReport(
        merged["angle_deg"].to_numpy(),
        ratio,
        np.abs(merged["cos_phase"].to_numpy()) <= 0.5,
        tolerance,
    )


@dataclass(frozen=True)
class SensitivityPoint:
    n_photons: int
    ell: int
    phi_at_best: float
    delta_phi: float
    normalized_sensitivity: float

    def to_dict(self):
        return {
            "n_photons": self.n_photons,
            "ell": self.ell,
            "phi_at_best_deg": self.phi_at_best,
            "delta_phi_deg": self.delta_phi,
            "normalized_sensitivity": self.normalized_sensitivity,
        }


def sensitivity_table(runs, n_best=4):
    """
    Four smallest uncertainties of each run, normalized by sqrt(A + D) / A.

    :param runs: (dataset, fit) pairs
    :type runs: iterable
    """
    points = []
    for dataset, fit in runs:
        unc = angular_uncertainty(dataset, fit)
        best = unc.best(n_best)
        if best.size < n_best:
            logger.warning(
                "N=%d l=%d: only %d usable uncertainty points",
                fit.n_photons,
                fit.ell,
                best.size,
            )
        scale = fit.A / math.sqrt(fit.A + fit.D)
        for i in best:
            normalized = unc.delta_phi_deg[i] * scale
            points.append(
                SensitivityPoint(
                    fit.n_photons,
                    fit.ell,
                    float(unc.angle_deg[i]),
                    float(unc.delta_phi_deg[i]),
                    float(1.0 / normalized),
                )
            )
    return points


def sensitivity_frame(points):
    return pd.DataFrame([p.to_dict() for p in points])


def theory_sensitivity(n_photons, ell, visibility=THEORY_VISIBILITY):
    """
    Best normalized sensitivity (1/deg) of the fringe model under Poisson
    count noise at the given visibility.
    """
    if not 0.0 < visibility <= 1.0:
        raise DomainError(f"visibility must lie in (0, 1], got {visibility}")
    nl = n_photons * abs(ell)
    background = (1.0 - visibility) / (2.0 * visibility)

    def normalized_uncertainty(u):
        f = (1.0 - math.cos(u)) / 2.0 + background
        slope = nl * DEG * abs(math.sin(u))
        return math.sqrt(f) / slope / math.sqrt(1.0 + background)

    best = minimize_scalar(
        normalized_uncertainty,
        bounds=(1e-6, math.pi - 1e-6),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return 1.0 / best.fun


def theory_curve(n_photons, ells, visibility=THEORY_VISIBILITY):
    return pd.DataFrame(
        {
            "n_photons": n_photons,
            "ell": list(ells),
            "theory_sensitivity": [
                theory_sensitivity(n_photons, e, visibility) for e in ells
            ],
        }
    )


@dataclass
class ScalingReport:
    """Log-log slope of sensitivity vs l per N and the N=2 / N=1 ratio per l."""

    slopes: dict
    ratios: dict
    table: pd.DataFrame = field(repr=False)

    def to_dict(self):
        return {
            "slopes": {str(k): v for k, v in self.slopes.items()},
            "ratios": {str(k): v for k, v in self.ratios.items()},
        }


def scaling_report(points):
    frame = sensitivity_frame(points)
    if frame.empty:
        raise InsufficientDataError("no sensitivity points")
    table = (
        frame.groupby(["n_photons", "ell"], as_index=False)["normalized_sensitivity"]
        .mean()
        .sort_values(["n_photons", "ell"])
    )
    slopes = {}
    for n_photons, group in table.groupby("n_photons"):
        if len(group) < 2:
            logger.warning("N=%d: need two l values for a slope", n_photons)
            continue
        slope, _ = np.polyfit(
            np.log(group["ell"].abs()), np.log(group["normalized_sensitivity"]), 1
        )
        slopes[int(n_photons)] = float(slope)
    wide = table.pivot(
        index="ell", columns="n_photons", values="normalized_sensitivity"
    )
    ratios = {}
    if 1 in wide.columns and 2 in wide.columns:
        shared = wide.dropna(subset=[1, 2])
        ratios = {int(ell): float(row[2] / row[1]) for ell, row in shared.iterrows()}
    return ScalingReport(slopes, ratios, table)


@dataclass(frozen=True, eq=False)
class HomDipFit:
    """Gaussian dip B (1 - V exp(-(tau - tau0)^2 / (2 sigma^2))).

    The covariance is over (B, V, tau0, sigma).
    """

    baseline: float
    visibility: float
    tau0_fs: float
    sigma_fs: float
    covariance: np.ndarray
    chi2: float

    @property
    def se(self):
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def model(self, delays_fs):
        t = np.asarray(delays_fs, dtype=float)
        dip = np.exp(-((t - self.tau0_fs) ** 2) / (2.0 * self.sigma_fs**2))
        return self.baseline * (1.0 - self.visibility * dip)

    def to_dict(self):
        b_se, v_se, t_se, s_se = self.se
        return {
            "baseline": self.baseline,
            "baseline_se": b_se,
            "visibility": self.visibility,
            "visibility_se": v_se,
            "tau0_fs": self.tau0_fs,
            "tau0_se_fs": t_se,
            "sigma_fs": self.sigma_fs,
            "sigma_se_fs": s_se,
            "chi2": self.chi2,
        }


def fit_hom_dip(dataset):
    """
    Fit the Gaussian dip model to a delay scan.

    :param dataset: delay scan from :func:`hom_scan`
    :type dataset: ScanDataset
    """
    if dataset.axis != "delay":
        raise DomainError("dip fit needs a delay scan")
    tau, counts, sigma = _weighted_data(dataset, "delay_fs")
    if tau.size < 5:
        raise InsufficientDataError(f"dip fit needs at least 5 delays, got {tau.size}")

    def residuals(p):
        b, v, t0, s = p
        dip = np.exp(-((tau - t0) ** 2) / (2 * s**2))
        return (b * (1.0 - v * dip) - counts) / sigma

    def jac(p):
        b, v, t0, s = p
        e = np.exp(-((tau - t0) ** 2) / (2 * s**2))
        return np.column_stack(
            [
                (1.0 - v * e) / sigma,
                -b * e / sigma,
                -b * v * e * (tau - t0) / s**2 / sigma,
                -b * v * e * (tau - t0) ** 2 / s**3 / sigma,
            ]
        )

    b0 = max(counts.max(), 1e-9)
    t0 = tau[int(np.argmin(counts))]
    v0 = min(max(1.0 - counts.min() / b0, 0.01), 1.0)
    span = tau[-1] - tau[0]
    starts = [(b0, v0, t0, span * f) for f in (0.05, 0.1, 0.2)]
    lower = np.array([0.0, 0.0, -np.inf, 1e-3])
    upper = np.array([np.inf, 2.0, np.inf, np.inf])
    best = _multistart(residuals, jac, starts, lower, upper, "dip fit")
    r = residuals(best.x)
    b, v, t0, s = best.x
    fit = HomDipFit(
        float(b),
        float(v),
        float(t0),
        float(s),
        _covariance(jac(best.x)),
        float(r @ r),
    )
    logger.debug("dip fit: V=%.4f sigma=%.2f fs tau0=%.2f fs", fit.visibility, s, t0)
    return fit
