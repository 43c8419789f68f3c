import math

import numpy as np

from twisted_noon.estimation import FringeFit, fringe_model
from twisted_noon.simulation import LossModel, ScanDataset, fringe_angles


def no_accidentals():
    return LossModel(coincidence_window_ns=0.0)


def make_fit(n_photons, ell, A, c, D):
    return FringeFit(n_photons, ell, A, c, D, np.zeros((3, 3)), 0.0, 40)


def fringe_dataset(
    n_photons=2,
    ell=1,
    A=1000.0,
    c=0.0,
    D=0.0,
    repetitions=25,
    seed=None,
    points_per_period=40,
    periods=1.0,
    angles_deg=None,
):
    """
    Scan following the fringe model exactly; with a seed every repetition is
    a Poisson draw around it, without one all repetitions equal the model.
    """
    if angles_deg is None:
        angles_deg = fringe_angles(n_photons, ell, periods, points_per_period)
    angles_deg = np.asarray(angles_deg, dtype=float)
    expected = fringe_model(np.deg2rad(angles_deg), A, c, D, n_photons, ell)
    if seed is None:
        counts = np.repeat(expected[:, None], repetitions, axis=1)
    else:
        rng = np.random.default_rng(seed)
        counts = rng.poisson(expected[:, None], size=(angles_deg.size, repetitions))
    return ScanDataset(
        n_photons, ell, angles_deg, counts, np.zeros(angles_deg.size), 1.0, seed=seed
    )


def rescaled(dataset, factor):
    """Counts with the mean scaled by ``factor`` and the spread by sqrt(factor)."""
    counts = dataset.raw_counts.astype(float)
    mean = counts.mean(axis=1, keepdims=True)
    scaled = factor * mean + math.sqrt(factor) * (counts - mean)
    return ScanDataset(
        dataset.n_photons,
        dataset.ell,
        dataset.positions,
        scaled,
        dataset.accidentals,
        dataset.integration_time_s,
        seed=dataset.seed,
    )
