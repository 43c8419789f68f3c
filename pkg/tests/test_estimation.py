import math

import numpy as np
import pytest

from twisted_noon.config import ScanConfig
from twisted_noon.estimation import (
    THEORY_VISIBILITY,
    angular_uncertainty,
    crb_check,
    detection_probability,
    detection_probability_derivative,
    estimate_period,
    fisher_information,
    fit_fringe,
    lomb_scargle_period,
    poisson_uncertainty,
    scaling_report,
    sensitivity_frame,
    sensitivity_table,
    theory_curve,
    theory_sensitivity,
    total_trials,
)
from twisted_noon.exceptions import DomainError, InsufficientDataError, PeriodAliasError
from twisted_noon.simulation import (
    LossModel,
    SourceModel,
    fringe_angles,
    measured_loss_model,
    simulate_scan,
)

from .synthetic import fringe_dataset, make_fit, no_accidentals, rescaled


@pytest.mark.parametrize(
    "n_photons, ell, A, c, D",
    [
        (2, 1, 1000.0, 0.7, 20.0),
        (1, 10, 250.0, -2.0, 5.0),
        (2, 100, 5e4, math.pi - 0.1, 0.0),
    ],
)
def test_noiseless_fit_recovers_parameters(n_photons, ell, A, c, D):
    dataset = fringe_dataset(n_photons, ell, A, c, D)
    fit = fit_fringe(dataset)
    assert fit.A == pytest.approx(A, rel=1e-6)
    assert fit.D == pytest.approx(D, abs=1e-6 * A)
    assert math.cos(fit.c - c) == pytest.approx(1.0, abs=1e-9)
    assert fit.chi2 < 1e-6
    assert fit.k == 2 * n_photons * ell
    assert fit.period_deg == pytest.approx(180.0 / (n_photons * ell))


def test_fit_optimality():
    dataset = fringe_dataset(2, 3, 800.0, 1.0, 10.0, seed=1)
    fit = fit_fringe(dataset)
    assert fit.optimality < 1e-8 * max(1.0, math.sqrt(fit.chi2))
    assert fit.visibility == pytest.approx(800.0 / 820.0, abs=0.02)
    assert fit.visibility_se > 0


def test_degrees_and_radians_agree():
    dataset = fringe_dataset(2, 5, 3000.0, 0.4, 30.0, seed=12)
    in_rad = dataset.with_angle_unit("rad")
    fit_deg = fit_fringe(dataset)
    fit_rad = fit_fringe(in_rad)
    assert fit_deg.visibility == fit_rad.visibility
    unc_deg = angular_uncertainty(dataset, fit_deg)
    unc_rad = angular_uncertainty(in_rad, fit_rad)
    assert np.array_equal(unc_deg.delta_phi_deg, unc_rad.delta_phi_deg, equal_nan=True)


def test_ideal_visibility_high_ell():
    cfg = ScanConfig(n_photons=2, ell=10, integration_time_s=1.0)
    # 1e4 expected counts at the fringe maximum
    source = SourceModel(pair_rate=4e4)
    angles = fringe_angles(2, 10)
    dataset = simulate_scan(cfg, angles, no_accidentals(), source, seed=10)
    fit = fit_fringe(dataset)
    assert fit.visibility >= 0.997 - fit.visibility_se


def test_too_few_angles():
    dataset = fringe_dataset(2, 1, angles_deg=np.linspace(1.0, 80.0, 7))
    with pytest.raises(InsufficientDataError):
        fit_fringe(dataset)


def test_less_than_one_period():
    dataset = fringe_dataset(2, 1, angles_deg=np.linspace(1.0, 40.0, 20))
    with pytest.raises(InsufficientDataError):
        fit_fringe(dataset)


def test_period_alias():
    dataset = fringe_dataset(2, 1, 1000.0, 0.3, 10.0, seed=2)
    with pytest.raises(PeriodAliasError) as e:
        fit_fringe(dataset, ell=3)
    assert e.value.expected_period == pytest.approx(30.0)
    assert e.value.estimated_period == pytest.approx(90.0, rel=0.1)


def test_lomb_scargle_period():
    phi = np.deg2rad(fringe_angles(2, 2, periods=2))
    counts = 100 * (1 - np.cos(8 * phi - 0.5))
    period = lomb_scargle_period(phi, counts, 8)
    assert period == pytest.approx(2 * math.pi / 8, rel=0.01)


def test_estimate_period():
    dataset = fringe_dataset(2, 2, 2000.0, 0.2, 10.0, seed=4, periods=2)
    estimate = estimate_period(dataset)
    tolerance = 5 * estimate.period_se_deg + 1e-6
    assert estimate.period_deg == pytest.approx(45.0, abs=tolerance)
    assert estimate.periodogram_deg == pytest.approx(45.0, rel=0.05)


def test_uncertainty_flags_extremum():
    angles = np.arange(0.0, 95.0, 5.0)
    dataset = fringe_dataset(2, 1, 1000.0, 0.0, 5.0, seed=6, angles_deg=angles)
    fit = make_fit(2, 1, 1000.0, 0.0, 5.0)
    unc = angular_uncertainty(dataset, fit)
    assert not unc.usable[0]
    assert math.isnan(unc.delta_phi_deg[0])
    assert not unc.usable[9]
    assert unc.usable[4]
    assert set(unc.best(4)).isdisjoint({0, 9, 18})


def test_uncertainty_needs_repetitions():
    dataset = fringe_dataset(2, 1, repetitions=1)
    with pytest.raises(InsufficientDataError):
        angular_uncertainty(dataset, make_fit(2, 1, 1000.0, 0.0, 0.0))
    with pytest.raises(DomainError):
        angular_uncertainty(
            fringe_dataset(2, 1), make_fit(2, 1, 1000.0, 0.0, 0.0), ell=2
        )


def test_uncertainty_matches_poisson_curve():
    dataset = fringe_dataset(2, 1, 5e4, 0.5, 100.0, repetitions=100, seed=21)
    fit = fit_fringe(dataset)
    unc = angular_uncertainty(dataset, fit)
    near_midpoint = unc.usable & (np.abs(unc.sin_phase) > 0.7)
    ratio = unc.delta_phi_deg[near_midpoint] / unc.poisson_delta_phi_deg[near_midpoint]
    assert near_midpoint.sum() >= 8
    assert np.mean(ratio) == pytest.approx(1.0, abs=0.1)


def test_doubling_ell_halves_uncertainty():
    base = fringe_dataset(2, 1, 2000.0, 0.3, 20.0, seed=8)
    doubled = fringe_dataset(
        2, 2, 2000.0, 0.3, 20.0, seed=8, angles_deg=base.angles_deg() / 2.0
    )
    unc_1 = angular_uncertainty(base, fit_fringe(base))
    unc_2 = angular_uncertainty(doubled, fit_fringe(doubled))
    ok = unc_1.usable & unc_2.usable
    assert np.allclose(
        unc_2.delta_phi_deg[ok], unc_1.delta_phi_deg[ok] / 2.0, rtol=1e-9
    )


def test_poisson_uncertainty_formula():
    fit = make_fit(1, 1, 400.0, 0.0, 0.0)
    # phase pi/2: f = A/2, slope A N l (pi/180)
    value = poisson_uncertainty(fit, [45.0])[0]
    assert value == pytest.approx(math.sqrt(200.0) / (400.0 * math.pi / 180.0))
    assert math.isnan(poisson_uncertainty(fit, [0.0])[0])


def test_total_trials():
    eta = LossModel(0.026, (0.75, 0.74)).total_eta(1)
    fit = make_fit(1, 1, 250.0, 0.0, 10.0)
    assert total_trials(fit, eta) == pytest.approx(18018.0, abs=0.5)
    curve = fisher_information(fit, LossModel(0.026, (0.75, 0.74)))
    assert curve.total_trials == pytest.approx(18018.0, abs=0.5)
    assert curve.eta == pytest.approx(0.014430)


def test_fisher_derivative_matches_finite_differences():
    fit = make_fit(2, 10, 180.0, 0.4, 3.0)
    eta = 0.3
    phi = np.deg2rad(np.linspace(0.0, fit.period_deg, 401))
    sin_u = np.abs(np.sin(fit.phase(phi)))
    phi = phi[sin_u > 1e-2]
    h = 1e-6
    upper = detection_probability(fit, eta, phi + h)
    lower = detection_probability(fit, eta, phi - h)
    numeric = (upper - lower) / (2 * h)
    analytic = detection_probability_derivative(fit, eta, phi)
    assert np.max(np.abs(numeric - analytic) / np.abs(analytic)) < 1e-6


def test_fisher_ideal_is_flat():
    # eta = 1, D = 0: F = (2 N l)^2 away from the flagged extrema
    fit = make_fit(2, 3, 500.0, 0.0, 0.0)
    curve = fisher_information(fit, 1.0, phi_grid=np.linspace(0.1, 29.9, 50))
    assert np.all(curve.valid)
    assert np.allclose(curve.information, 12.0**2, rtol=1e-9)


def test_fisher_non_negative():
    rng = np.random.default_rng(0)
    for _ in range(10_000 // 100):
        fit = make_fit(
            int(rng.integers(1, 3)),
            int(rng.integers(1, 101)),
            rng.uniform(1.0, 1e4),
            rng.uniform(-math.pi, math.pi),
            rng.uniform(0.0, 1e3),
        )
        eta = rng.uniform(1e-4, 1.0)
        curve = fisher_information(fit, eta, phi_grid=rng.uniform(0, 180, 100))
        assert np.all(curve.information[curve.valid] >= 0.0)


def test_fisher_flags_extrema():
    fit = make_fit(1, 1, 100.0, 0.0, 0.0)
    curve = fisher_information(fit, 1.0, phi_grid=[0.0, 45.0, 90.0])
    assert list(curve.valid) == [False, True, False]
    assert math.isnan(curve.information[0])
    frame = curve.to_frame()
    assert list(frame.columns) == [
        "angle_deg",
        "p1",
        "fisher",
        "fisher_x_trials",
        "valid",
    ]


def test_fisher_rejects_bad_eta():
    with pytest.raises(DomainError):
        fisher_information(make_fit(1, 1, 100.0, 0.0, 0.0), 1.5)


@pytest.mark.slow
def test_crb_attained_with_measured_losses():
    loss = measured_loss_model(1, 2)
    cfg = ScanConfig(n_photons=2, ell=1, integration_time_s=3.0, repetitions=1000)
    dataset = simulate_scan(cfg, fringe_angles(2, 1), loss, SourceModel(), seed=31)
    fit = fit_fringe(dataset)
    unc = angular_uncertainty(dataset, fit)
    fisher = fisher_information(fit, loss, phi_grid=unc.angle_deg)
    report = crb_check(fisher, unc)
    assert 0.7 <= report.median_midpoint <= 1.1
    assert report.summary()["points"] == int(np.count_nonzero(unc.usable))


def test_crb_no_overlap():
    fit = make_fit(2, 1, 100.0, 0.0, 0.0)
    dataset = fringe_dataset(2, 1, 100.0, seed=3)
    unc = angular_uncertainty(dataset, fit)
    fisher = fisher_information(fit, 0.5, phi_grid=[1000.0, 1001.0])
    with pytest.raises(InsufficientDataError):
        crb_check(fisher, unc)


def _ideal_runs(photon_numbers, ells, repetitions=200, seed=100):
    seeds = np.random.SeedSequence(seed).spawn(len(photon_numbers) * len(ells))
    runs = []
    for (n_photons, ell), child in zip(
        [(n, ell) for n in photon_numbers for ell in ells], seeds
    ):
        cfg = ScanConfig(
            n_photons=n_photons,
            ell=ell,
            integration_time_s=1.0,
            repetitions=repetitions,
        )
        dataset = simulate_scan(
            cfg,
            fringe_angles(n_photons, ell),
            no_accidentals(),
            SourceModel(),
            int(child.generate_state(1)[0]),
        )
        runs.append((dataset, fit_fringe(dataset)))
    return runs


@pytest.mark.slow
def test_sensitivity_scaling():
    ells = [1, 2, 3, 5, 10, 25, 50, 100]
    points = sensitivity_table(_ideal_runs([1, 2], ells))
    assert len(points) == 4 * 16
    report = scaling_report(points)
    assert report.slopes[1] == pytest.approx(1.0, abs=0.05)
    assert report.slopes[2] == pytest.approx(1.0, abs=0.05)
    assert np.mean(list(report.ratios.values())) == pytest.approx(2.0, abs=0.1)
    assert set(report.to_dict()) == {"slopes", "ratios"}


def test_sensitivity_normalization_removes_counts():
    dataset = fringe_dataset(2, 3, 4000.0, 0.2, 40.0, seed=15)
    bright = rescaled(dataset, 4.0)
    base = sensitivity_table([(dataset, fit_fringe(dataset))])
    scaled = sensitivity_table([(bright, fit_fringe(bright))])
    for a, b in zip(base, scaled):
        assert a.phi_at_best == b.phi_at_best
        expected = pytest.approx(a.normalized_sensitivity, rel=0.01)
        assert b.normalized_sensitivity == expected
    frame = sensitivity_frame(base)
    assert list(frame.columns) == [
        "n_photons",
        "ell",
        "phi_at_best_deg",
        "delta_phi_deg",
        "normalized_sensitivity",
    ]


def test_theory_curve():
    ideal = 2 * 2 * 10 * math.pi / 180.0
    assert theory_sensitivity(2, 10, 1.0) == pytest.approx(ideal, rel=1e-4)
    assert theory_sensitivity(2, 10) < ideal
    curve = theory_curve(1, [1, 10, 100], THEORY_VISIBILITY)
    values = curve["theory_sensitivity"].to_numpy()
    assert values[1] / values[0] == pytest.approx(10.0, rel=1e-6)
    with pytest.raises(DomainError):
        theory_sensitivity(1, 1, 0.0)


@pytest.mark.slow
def test_best_uncertainty_reaches_scaling_law():
    for dataset, fit in _ideal_runs([1, 2], [1, 10, 100], repetitions=1000):
        unc = angular_uncertainty(dataset, fit)
        best = np.deg2rad(unc.delta_phi_deg[unc.best(4)])
        scale = 2 * math.sqrt(fit.A + fit.D) * fit.n_photons * fit.ell
        assert 0.9 <= np.mean(best) * scale <= 1.1


@pytest.mark.slow
def test_simulated_periods():
    for dataset, fit in _ideal_runs([1, 2], [1, 10, 100], repetitions=25):
        expected = 180.0 / (dataset.n_photons * dataset.ell)
        assert estimate_period(dataset).period_deg == pytest.approx(expected, rel=0.01)


@pytest.mark.slow
def test_fit_pulls_are_standard_normal():
    A, c, D = 1000.0, 0.6, 50.0
    pulls = []
    for seed in range(500):
        fit = fit_fringe(fringe_dataset(2, 1, A, c, D, seed=seed))
        se = fit.se
        pulls.append(
            [(A - fit.A) / se[0], np.angle(np.exp(1j * (c - fit.c))) / se[1]]
        )
    mean_abs = np.mean(np.abs(pulls), axis=0)
    assert np.all(np.abs(mean_abs - math.sqrt(2 / math.pi)) < 3 / math.sqrt(500))


@pytest.mark.slow
def test_partial_distinguishability_falls_short_of_ideal_bound():
    loss = measured_loss_model(1, 2)
    cfg = ScanConfig(n_photons=2, ell=1, integration_time_s=3.0, repetitions=1000)
    angles = fringe_angles(2, 1)
    ideal = simulate_scan(cfg, angles, loss, SourceModel(), seed=41)
    mixed_source = SourceModel(indistinguishability=0.9)
    mixed = simulate_scan(cfg, angles, loss, mixed_source, seed=42)
    unc = angular_uncertainty(mixed, fit_fringe(mixed))
    bound = fisher_information(fit_fringe(ideal), loss, phi_grid=unc.angle_deg)
    # 1 / r = Var M_T F exceeds 1 against the x = 1 curve
    assert 1.0 / crb_check(bound, unc).median_midpoint > 1.05
