import logging

import numpy as np
import pandas as pd

from twisted_noon import (
    LossModel,
    SourceModel,
    crb_check,
    fisher_information,
    fit_fringe,
    simulate_scan,
    writers,
)
from twisted_noon.config import ScanConfig
from twisted_noon.estimation import angular_uncertainty, estimate_period
from twisted_noon.simulation import fringe_angles, measured_loss_model


def scan(n_photons, ell, loss, seed=7):
    cfg = ScanConfig(n_photons=n_photons, ell=ell, integration_time_s=3.0)
    angles = fringe_angles(n_photons, ell, periods=2)
    return simulate_scan(cfg, angles, loss, SourceModel(), seed)


def compare_photon_numbers(ell):
    rows = []
    for n_photons in (1, 2):
        fit = fit_fringe(scan(n_photons, ell, LossModel()))
        rows.append(
            {
                "n_photons": n_photons,
                "period_deg": fit.period_deg,
                "visibility": fit.visibility,
            }
        )
    return pd.DataFrame(rows)


def cramer_rao(ell):
    loss = measured_loss_model(ell, 2)
    dataset = scan(2, ell, loss)
    fit = fit_fringe(dataset)
    period = estimate_period(dataset)
    print(f"period {period.period_deg:.4f} +- {period.period_se_deg:.4f} deg")

    unc = angular_uncertainty(dataset, fit)
    curve = fisher_information(fit, loss, phi_grid=unc.angle_deg)
    report = crb_check(curve, unc)
    print(f"peak Fisher information {np.nanmax(curve.information):.3g}")
    writers.tableize(report.to_frame().dropna())


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    writers.tableize(compare_photon_numbers(ell=10))
    cramer_rao(ell=1)
