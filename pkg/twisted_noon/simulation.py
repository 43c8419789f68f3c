"""
Monte-Carlo model of the rotation experiment.

Pairs are prepared in the petal modes M1, M2 and overlapped on a beamsplitter
(Hadamard transform), which bunches them into a N00N state of +l / -l. The
state is rotated, split probabilistically onto two arms and each arm projects
onto one mode. Partial distinguishability mixes the quantum and the classical
two-photon probabilities with weight x. Counting is Poissonian with losses and
accidental coincidences.
"""
import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .exceptions import ConfigError, DomainError
from .fock import (
    ModeKind,
    ModeLabel,
    check_ell,
    check_photons,
    hadamard_mub,
    lift_and_apply,
    make_fock,
    projection_probability,
    projection_state,
    rotation_unitary,
)

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299792458.0
FWHM_TO_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))

DEFAULT_PAIR_RATE = 5.0e5
DEFAULT_REPETITIONS = 25

# single-photon channel, two-photon channel average
MEASURED_CHANNEL_ETA = {1: (0.026, 0.0201), 100: (0.0063, 0.0029)}
MEASURED_DETECTOR_ETA = (0.74, 0.75)
MEASURED_WINDOW_NS = 1.0

# l -> (single-photon seconds, two-photon seconds)
DEFAULT_INTEGRATION_TIMES = {1: (2.0, 3.0), 10: (1.0, 3.0), 100: (2.0, 8.0)}


class Scheme(enum.Enum):
    ORTHOGONAL = "orthogonal"
    IDENTICAL = "identical"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(
                f"unknown projection scheme {value!r}, "
                "expected 'orthogonal' or 'identical'"
            ) from None


def coherence_sigma_from_bandwidth(bandwidth_nm=3.0, wavelength_nm=810.0):
    """
    Gaussian width (fs) of the indistinguishability-vs-delay curve for
    transform-limited photons behind a bandpass filter of the given FWHM.
    """
    if bandwidth_nm <= 0 or wavelength_nm <= 0:
        raise DomainError("bandwidth and wavelength must be positive")
    delta_nu = SPEED_OF_LIGHT * bandwidth_nm * 1e-9 / (wavelength_nm * 1e-9) ** 2
    sigma_omega = 2 * math.pi * delta_nu / FWHM_TO_SIGMA
    return 1e15 / (math.sqrt(2.0) * sigma_omega)


@dataclass(frozen=True)
class SourceModel:
    """
    Pair source.

    :param pair_rate: pairs per second entering the setup
    :type pair_rate: float

    :param indistinguishability: x in [0, 1], used when ``delay_fs`` is None
    :type indistinguishability: float

    :param delay_fs: relative photon delay; sets x through the Gaussian curve
    :type delay_fs: float

    :param coherence_sigma_fs: width of that curve
    :type coherence_sigma_fs: float

    :param heralded: single-photon runs herald one photon on its partner
    :type heralded: bool
    """

    pair_rate: float = DEFAULT_PAIR_RATE
    indistinguishability: float = 1.0
    delay_fs: float = None
    coherence_sigma_fs: float = field(default_factory=coherence_sigma_from_bandwidth)
    heralded: bool = True

    def __post_init__(self):
        if self.pair_rate < 0:
            raise DomainError(f"pair rate must be non-negative, got {self.pair_rate}")
        if not 0.0 <= self.indistinguishability <= 1.0:
            raise DomainError(
                "indistinguishability must lie in [0, 1], "
                f"got {self.indistinguishability}"
            )
        if self.coherence_sigma_fs <= 0:
            raise DomainError("coherence sigma must be positive")

    @property
    def x(self):
        if self.delay_fs is None:
            return self.indistinguishability
        return indistinguishability_at(self.delay_fs, self.coherence_sigma_fs)

    def at_delay(self, delay_fs):
        return SourceModel(
            self.pair_rate,
            self.indistinguishability,
            delay_fs,
            self.coherence_sigma_fs,
            self.heralded,
        )


def indistinguishability_at(delay_fs, coherence_sigma_fs):
    return math.exp(-(delay_fs**2) / (2.0 * coherence_sigma_fs**2))


@dataclass(frozen=True)
class LossModel:
    """
    Transmission and detection.

    Heralded single photons see ``channel_eta`` times both detector
    efficiencies (signal and herald); unheralded ones only the first detector.
    Pairs see ``channel_eta`` squared times both.

    :param channel_eta: system efficiency of one photon path
    :type channel_eta: float

    :param detector_eta: efficiencies of the two detectors
    :type detector_eta: tuple

    :param coincidence_window_ns: coincidence window
    :type coincidence_window_ns: float

    :param dark_rate: background counts per second on each detector
    :type dark_rate: float
    """

    channel_eta: float = 1.0
    detector_eta: tuple = (1.0, 1.0)
    coincidence_window_ns: float = MEASURED_WINDOW_NS
    dark_rate: float = 0.0

    def __post_init__(self):
        detectors = tuple(float(d) for d in self.detector_eta)
        object.__setattr__(self, "detector_eta", detectors)
        if len(self.detector_eta) != 2:
            raise DomainError("detector_eta needs exactly two entries")
        for name, eta in [("channel_eta", self.channel_eta)] + [
            (f"detector_eta[{i}]", d) for i, d in enumerate(self.detector_eta)
        ]:
            if not 0.0 < eta <= 1.0:
                raise DomainError(f"{name} must lie in (0, 1], got {eta}")
        if self.coincidence_window_ns < 0 or self.dark_rate < 0:
            raise DomainError("coincidence window and dark rate must be non-negative")

    def total_eta(self, n_photons, heralded=True):
        d1, d2 = self.detector_eta
        if n_photons == 1:
            return self.channel_eta * d1 * (d2 if heralded else 1.0)
        if n_photons == 2:
            return self.channel_eta**2 * d1 * d2
        raise DomainError(f"losses are modelled for N = 1 or 2, got {n_photons}")

    def singles_rates(self, pair_rate):
        """Per-detector singles: half the arriving photons pass the projection."""
        return tuple(
            pair_rate * self.channel_eta * d * 0.5 + self.dark_rate
            for d in self.detector_eta
        )

    def accidental_rate(self, pair_rate):
        s1, s2 = self.singles_rates(pair_rate)
        return s1 * s2 * self.coincidence_window_ns * 1e-9

    def background_rate(self, pair_rate, n_photons=2, heralded=True):
        """Accidental coincidences; dark counts for unheralded single photons."""
        if n_photons == 1 and not heralded:
            return self.dark_rate
        return self.accidental_rate(pair_rate)


def measured_loss_model(ell, n_photons):
    """
    Loss model with the efficiencies measured for l = 1 and l = 100.
    """
    ell = abs(check_ell(ell))
    if ell not in MEASURED_CHANNEL_ETA:
        raise DomainError(
            "measured efficiencies exist for l in "
            f"{sorted(MEASURED_CHANNEL_ETA)}, got {ell}"
        )
    single, pair = MEASURED_CHANNEL_ETA[ell]
    channel = single if check_photons(n_photons) == 1 else pair
    return LossModel(channel, MEASURED_DETECTOR_ETA, MEASURED_WINDOW_NS)


def default_integration_time(ell, n_photons):
    """Integration time (s) of the largest tabulated l not above |l|."""
    ell = abs(check_ell(ell))
    key = max([k for k in DEFAULT_INTEGRATION_TIMES if k <= ell] or [1])
    single, pair = DEFAULT_INTEGRATION_TIMES[key]
    return single if n_photons == 1 else pair


def fringe_period_deg(n_photons, ell):
    return 180.0 / (n_photons * abs(ell))


def fringe_angles(n_photons, ell, periods=1.0, points_per_period=40, offset=0.5):
    """
    Angle grid (deg) covering whole fringe periods, shifted by ``offset`` steps
    so that no point sits exactly on an extremum.
    """
    if points_per_period < 1 or periods <= 0:
        raise DomainError("need at least one point and a positive number of periods")
    step = fringe_period_deg(n_photons, ell) / points_per_period
    count = int(round(periods * points_per_period))
    return (np.arange(count) + offset) * step


def _mode_vector(kind):
    return ModeLabel(kind, 1).vector


def _prepared_photons():
    h = hadamard_mub().entries
    return h[:, 0], h[:, 1]


def _pair_probability(state, photons, proj_a, proj_b, x):
    """
    Probability of one photon per arm with arm A projecting on ``proj_a`` and
    arm B on ``proj_b``, after a 50:50 split. ``photons`` are the single-photon
    states used for the distinguishable part.
    """
    psi = state.symmetric_wavefunction()
    amplitude = np.conj(proj_a) @ psi @ np.conj(proj_b) / math.sqrt(2.0)
    quantum = abs(amplitude) ** 2
    first, second = photons
    classical = 0.25 * (
        abs(np.vdot(proj_a, first) * np.vdot(proj_b, second)) ** 2
        + abs(np.vdot(proj_a, second) * np.vdot(proj_b, first)) ** 2
    )
    return x * quantum + (1.0 - x) * classical


def _rotated_pair(ell, phi):
    rotation = rotation_unitary(ell, phi)
    bunched = lift_and_apply(hadamard_mub(), make_fock(1, 2, ell))
    state = lift_and_apply(rotation, bunched)
    photons = tuple(rotation.apply_single(p) for p in _prepared_photons())
    return state, photons


def coincidence_probability(n_photons, ell, phi, scheme=Scheme.ORTHOGONAL, x=1.0):
    """
    Detection probability per prepared pair (N = 2) or heralded photon (N = 1).

    :param n_photons: 1 or 2
    :type n_photons: int

    :param ell: OAM value
    :type ell: int

    :param phi: rotation in radians
    :type phi: float

    :param scheme: arms project on M1 and M2 (orthogonal) or both on M1 (identical)
    :type scheme: Scheme

    :param x: indistinguishability of the two photons
    :type x: float
    """
    n_photons = check_photons(n_photons)
    ell = check_ell(ell)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"indistinguishability must lie in [0, 1], got {x}")
    if n_photons == 1:
        prepared = lift_and_apply(hadamard_mub(), make_fock(0, 1, ell))
        rotated = lift_and_apply(rotation_unitary(ell, phi), prepared)
        return projection_probability(rotated, projection_state(1, ell))
    if n_photons > 2:
        raise DomainError("the splitting model supports N <= 2")
    scheme = Scheme.parse(scheme)
    state, photons = _rotated_pair(ell, phi)
    proj_a = _mode_vector(ModeKind.PETAL_M1)
    proj_b = _mode_vector(
        ModeKind.PETAL_M2 if scheme is Scheme.ORTHOGONAL else ModeKind.PETAL_M1
    )
    p = _pair_probability(state, photons, proj_a, proj_b, x)
    return float(min(max(p, 0.0), 1.0))


def hom_probability(x, ell=1):
    """Coincidences with arm A projecting on +l and arm B on -l, no rotation."""
    state, photons = _rotated_pair(ell, 0.0)
    return _pair_probability(
        state,
        photons,
        _mode_vector(ModeKind.OAM_PLUS),
        _mode_vector(ModeKind.OAM_MINUS),
        x,
    )


@dataclass(eq=False)
class ScanDataset:
    """
    Repeated counts along a scan axis (rotation angle or photon delay).

    ``raw_counts`` has one row per position and one column per repetition;
    ``accidentals`` holds the expected accidental counts per position, which
    :attr:`counts` subtracts when ``accidentals_subtracted`` is set.
    Delay scans carry no projection scheme and no angle unit.
    """

    n_photons: int
    ell: int
    positions: np.ndarray
    raw_counts: np.ndarray
    accidentals: np.ndarray
    integration_time_s: float
    scheme: str = Scheme.ORTHOGONAL.value
    accidentals_subtracted: bool = True
    axis: str = "angle"
    angle_unit: str = "deg"
    seed: int = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.raw_counts = np.asarray(self.raw_counts)
        self.accidentals = np.broadcast_to(
            np.asarray(self.accidentals, dtype=float), self.positions.shape
        ).copy()
        if self.raw_counts.ndim != 2 or self.raw_counts.shape[0] != self.positions.size:
            raise DomainError("raw_counts must have one row per scan position")
        if np.any(self.raw_counts < 0):
            raise DomainError("counts must be non-negative")
        if np.any(np.diff(self.positions) <= 0):
            raise DomainError("scan positions must be strictly increasing")
        if self.axis not in ("angle", "delay"):
            raise DomainError(f"unknown scan axis {self.axis!r}")
        if self.axis == "delay":
            self.angle_unit = None
            self.scheme = None
        elif self.angle_unit not in ("deg", "rad"):
            raise DomainError(f"unknown angle unit {self.angle_unit!r}")

    @property
    def repetitions(self):
        return self.raw_counts.shape[1]

    @property
    def counts(self):
        if self.accidentals_subtracted:
            return self.raw_counts - self.accidentals[:, None]
        return self.raw_counts

    @property
    def mean(self):
        return self.counts.mean(axis=1)

    @property
    def variance(self):
        if self.repetitions < 2:
            return np.zeros(self.positions.size)
        return self.counts.var(axis=1, ddof=1)

    @property
    def std(self):
        return np.sqrt(self.variance)

    @property
    def position_column(self):
        if self.axis == "delay":
            return "delay_fs"
        return f"angle_{self.angle_unit}"

    def angles_rad(self):
        if self.axis != "angle":
            raise DomainError("dataset is not an angle scan")
        if self.angle_unit == "rad":
            return self.positions
        return np.deg2rad(self.positions)

    def angles_deg(self):
        if self.axis != "angle":
            raise DomainError("dataset is not an angle scan")
        if self.angle_unit == "deg":
            return self.positions
        return np.rad2deg(self.positions)

    def with_angle_unit(self, unit):
        """Copy with positions expressed in ``unit``."""
        if unit == self.angle_unit:
            return self
        positions = self.angles_rad() if unit == "rad" else self.angles_deg()
        return ScanDataset(
            self.n_photons,
            self.ell,
            positions,
            self.raw_counts,
            self.accidentals,
            self.integration_time_s,
            self.scheme,
            self.accidentals_subtracted,
            self.axis,
            unit,
            self.seed,
            dict(self.meta),
        )

    def to_frame(self):
        """Long format: position, rep_index, counts, raw_counts."""
        n_pos, n_rep = self.raw_counts.shape
        return pd.DataFrame(
            {
                self.position_column: np.repeat(self.positions, n_rep),
                "rep_index": np.tile(np.arange(n_rep), n_pos),
                "counts": self.counts.ravel(),
                "raw_counts": self.raw_counts.ravel(),
            }
        )

    def summary_frame(self):
        """One row per position: mean, variance, std, expected accidentals."""
        return pd.DataFrame(
            {
                self.position_column: self.positions,
                "mean": self.mean,
                "variance": self.variance,
                "std": self.std,
                "accidentals": self.accidentals,
            }
        )

    def sidecar(self):
        return {
            "n_photons": self.n_photons,
            "ell": self.ell,
            "scheme": self.scheme,
            "integration_time_s": self.integration_time_s,
            "repetitions": self.repetitions,
            "accidentals_subtracted": self.accidentals_subtracted,
            "accidentals": self.accidentals.tolist(),
            "axis": self.axis,
            "angle_unit": self.angle_unit,
            "seed": self.seed,
            "meta": self.meta,
        }

    def to_files(self, csv_path, json_path):
        from .export.writers import save_csv, save_json

        save_csv(self.to_frame(), csv_path)
        save_json(self.sidecar(), json_path)

    @classmethod
    def from_files(cls, csv_path, json_path):
        from .export.writers import load_json

        side = load_json(json_path)
        frame = pd.read_csv(csv_path, float_precision="round_trip")
        axis = side["axis"]
        column = "delay_fs" if axis == "delay" else f"angle_{side['angle_unit']}"
        frame = frame.sort_values([column, "rep_index"])
        positions = frame[column].drop_duplicates().to_numpy()
        raw = frame["raw_counts"].to_numpy().reshape(positions.size, -1)
        return cls(
            side["n_photons"],
            side["ell"],
            positions,
            raw,
            side["accidentals"],
            side["integration_time_s"],
            side["scheme"],
            side["accidentals_subtracted"],
            axis,
            side["angle_unit"],
            side["seed"],
            side.get("meta", {}),
        )


def _streams(seed, count):
    if seed is None:
        raise ConfigError("seed", "a seed is required for every simulation")
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def _draw(rng, signal_mean, accidental_mean, repetitions):
    signal = rng.poisson(signal_mean, size=repetitions)
    accidental = rng.poisson(accidental_mean, size=repetitions)
    return signal + accidental


def simulate_scan(config, angles, loss, source, seed):
    """
    Simulate repeated counts for each rotation angle.

    :param config: scan settings (n_photons, ell, scheme, integration_time_s,
        repetitions, subtract_accidentals)
    :type config: ScanConfig

    :param angles: rotation angles in degrees, strictly increasing
    :type angles: array-like

    :param loss: losses and accidentals
    :type loss: LossModel

    :param source: pair rate and indistinguishability
    :type source: SourceModel

    :param seed: root seed; every angle gets its own spawned stream
    :type seed: int
    """
    angles = np.asarray(angles, dtype=float)
    if angles.size == 0:
        raise DomainError("no scan angles given")
    n_photons = check_photons(config.n_photons)
    heralded = source.heralded
    eta = loss.total_eta(n_photons, heralded)
    trials = source.pair_rate * config.integration_time_s
    background = loss.background_rate(source.pair_rate, n_photons, heralded)
    accidental_mean = background * config.integration_time_s
    if trials < 0 or accidental_mean < 0:
        raise DomainError("rates must be non-negative")
    x = source.x
    logger.debug(
        "scan N=%d l=%d: eta=%.6g, %.6g pairs per point, x=%.6g, accidentals %.3g",
        n_photons,
        config.ell,
        eta,
        trials,
        x,
        accidental_mean,
    )

    raw = np.empty((angles.size, config.repetitions), dtype=np.int64)
    streams = _streams(seed, angles.size)
    for i, (phi, rng) in enumerate(zip(np.deg2rad(angles), streams)):
        p = coincidence_probability(n_photons, config.ell, phi, config.scheme, x)
        raw[i] = _draw(rng, trials * eta * p, accidental_mean, config.repetitions)

    return ScanDataset(
        n_photons,
        config.ell,
        angles,
        raw,
        np.full(angles.size, accidental_mean),
        config.integration_time_s,
        Scheme.parse(config.scheme).value,
        config.subtract_accidentals,
        "angle",
        "deg",
        seed,
        {
            "eta": eta,
            "pair_rate": source.pair_rate,
            "indistinguishability": x,
            "heralded": heralded,
        },
    )


def hom_scan(delays, source, loss, integration_time_s, repetitions, seed, ell=1):
    """
    Delay scan with the arms projecting onto +l and -l.

    :param delays: relative delays in fs, strictly increasing
    :type delays: array-like
    """
    delays = np.asarray(delays, dtype=float)
    if delays.size == 0:
        raise DomainError("no delays given")
    eta = loss.total_eta(2)
    trials = source.pair_rate * integration_time_s
    accidental_mean = loss.accidental_rate(source.pair_rate) * integration_time_s

    raw = np.empty((delays.size, repetitions), dtype=np.int64)
    for i, (delay, rng) in enumerate(zip(delays, _streams(seed, delays.size))):
        x = source.at_delay(delay).x
        mean = trials * eta * hom_probability(x, ell)
        raw[i] = _draw(rng, mean, accidental_mean, repetitions)

    return ScanDataset(
        2,
        ell,
        delays,
        raw,
        np.full(delays.size, accidental_mean),
        integration_time_s,
        None,
        True,
        "delay",
        None,
        seed,
        {
            "eta": eta,
            "pair_rate": source.pair_rate,
            "coherence_sigma_fs": source.coherence_sigma_fs,
            "baseline": trials * eta * hom_probability(0.0, ell),
        },
    )


def _mub_bases():
    s = 1.0 / math.sqrt(2.0)
    return {
        "oam": (np.array([1.0 + 0j, 0.0]), np.array([0.0 + 0j, 1.0])),
        "petal": (_mode_vector(ModeKind.PETAL_M1), _mode_vector(ModeKind.PETAL_M2)),
        "circular": (np.array([s, 1j * s]), np.array([s, -1j * s])),
    }


def _witness_probabilities(config, vec_a, vec_b):
    ell = check_ell(config.ell)
    phi = math.radians(config.phi_deg)
    if config.preparation == "noon":
        state, photons = _rotated_pair(ell, phi)
    elif config.preparation == "product":
        rotation = rotation_unitary(ell, phi)
        state = lift_and_apply(rotation, make_fock(1, 2, ell))
        photons = (
            rotation.apply_single(_mode_vector(ModeKind.OAM_PLUS)),
            rotation.apply_single(_mode_vector(ModeKind.OAM_MINUS)),
        )
    else:
        raise ConfigError(
            "preparation",
            f"expected 'noon' or 'product', got {config.preparation!r}",
        )

    # product state: no bunching, distinguishable term only
    x = config.indistinguishability if config.preparation == "noon" else 0.0
    pure = _pair_probability(state, photons, vec_a, vec_b, x)
    if config.dephasing == 0:
        return pure
    # dephasing removes the coherence between number states, photon vectors unchanged
    dephased = 0.0
    for n, weight in enumerate(state.probabilities()):
        if weight > 0:
            fock = make_fock(n, 2, ell)
            dephased += weight * _pair_probability(fock, photons, vec_a, vec_b, x)
    return (1.0 - config.dephasing) * pure + config.dephasing * dephased


@dataclass
class WitnessResult:
    w: float
    table: pd.DataFrame


def witness_scan(config, seed):
    """
    Two-photon correlation visibilities in the three mutually unbiased bases
    of the +l / -l space and their absolute sum w. Ideal N00N states give 3,
    separable states at most 1. The product preparation ignores
    ``config.indistinguishability``.

    ``config.counts_per_setting`` > 0 draws Poisson counts with that mean per
    setting; 0 evaluates the exact probabilities.
    """
    if not 0.0 <= config.dephasing <= 1.0:
        raise ConfigError("dephasing", "must lie in [0, 1]")
    if not 0.0 <= config.indistinguishability <= 1.0:
        raise ConfigError("indistinguishability", "must lie in [0, 1]")
    bases = _mub_bases()
    rngs = _streams(seed, len(bases))
    rows = []
    for (name, vectors), rng in zip(bases.items(), rngs):
        p = np.array(
            [
                [_witness_probabilities(config, va, vb) for vb in vectors]
                for va in vectors
            ]
        )
        if p.sum() <= 0:
            raise DomainError(f"no coincidences in the {name} basis")
        if config.counts_per_setting > 0:
            p = rng.poisson(p * config.counts_per_setting / p.mean()).astype(float)
        total = p.sum()
        if total <= 0:
            raise DomainError(f"no coincidences counted in the {name} basis")
        e = (p[0, 0] + p[1, 1] - p[0, 1] - p[1, 0]) / total
        rows.append(
            {
                "basis": name,
                "p11": p[0, 0],
                "p12": p[0, 1],
                "p21": p[1, 0],
                "p22": p[1, 1],
                "correlation": e,
            }
        )
    table = pd.DataFrame(rows)
    w = float(table["correlation"].abs().sum())
    logger.info("witness w = %.4f (%s preparation)", w, config.preparation)
    return WitnessResult(w, table)
