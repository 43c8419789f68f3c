"""
Run configuration records.

Each command reads one record, loadable from JSON and overridable field by
field. :func:`resolve` fills every derived default so that the stored
``config.json`` reproduces a run exactly.
"""
import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DomainError
from .simulation import (
    DEFAULT_PAIR_RATE,
    DEFAULT_REPETITIONS,
    LossModel,
    Scheme,
    SourceModel,
    coherence_sigma_from_bandwidth,
    default_integration_time,
    fringe_angles,
    measured_loss_model,
)

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20200101
DEFAULT_ELLS = [1, 2, 3, 5, 10, 25, 50, 100]


@dataclass
class SourceConfig:
    pair_rate: float = DEFAULT_PAIR_RATE
    indistinguishability: float = 1.0
    delay_fs: float = None
    bandwidth_nm: float = 3.0
    wavelength_nm: float = 810.0
    coherence_sigma_fs: float = None
    heralded: bool = True

    def validate(self):
        if self.pair_rate is None or self.pair_rate <= 0:
            raise ConfigError("source.pair_rate", "must be positive")
        if not 0.0 <= self.indistinguishability <= 1.0:
            raise ConfigError("source.indistinguishability", "must lie in [0, 1]")
        if self.bandwidth_nm <= 0 or self.wavelength_nm <= 0:
            raise ConfigError(
                "source.bandwidth_nm", "bandwidth and wavelength must be positive"
            )

    def resolve(self):
        if self.coherence_sigma_fs is None:
            sigma = coherence_sigma_from_bandwidth(
                self.bandwidth_nm, self.wavelength_nm
            )
            return dataclasses.replace(self, coherence_sigma_fs=sigma)
        return self

    def to_model(self):
        resolved = self.resolve()
        return SourceModel(
            resolved.pair_rate,
            resolved.indistinguishability,
            resolved.delay_fs,
            resolved.coherence_sigma_fs,
            resolved.heralded,
        )


@dataclass
class LossConfig:
    """
    ``preset`` "measured" replaces the efficiencies with the measured ones for
    the run's l and N; "ideal" uses the fields as given.
    """

    preset: str = "ideal"
    channel_eta: float = 1.0
    detector_eta: list = field(default_factory=lambda: [1.0, 1.0])
    coincidence_window_ns: float = 1.0
    dark_rate: float = 0.0

    def validate(self):
        if self.preset not in ("ideal", "measured"):
            raise ConfigError(
                "loss.preset", f"expected 'ideal' or 'measured', got {self.preset!r}"
            )
        if not 0.0 < self.channel_eta <= 1.0:
            raise ConfigError("loss.channel_eta", "must lie in (0, 1]")
        detectors = self.detector_eta
        if len(detectors) != 2 or not all(0.0 < d <= 1.0 for d in detectors):
            raise ConfigError("loss.detector_eta", "needs two efficiencies in (0, 1]")
        if self.coincidence_window_ns < 0 or self.dark_rate < 0:
            raise ConfigError(
                "loss.dark_rate", "window and dark rate must be non-negative"
            )

    def resolve(self, ell, n_photons):
        if self.preset != "measured":
            return self
        try:
            model = measured_loss_model(ell, n_photons)
        except DomainError as e:
            raise ConfigError("loss.preset", str(e))
        return dataclasses.replace(
            self,
            channel_eta=model.channel_eta,
            detector_eta=list(model.detector_eta),
            coincidence_window_ns=model.coincidence_window_ns,
        )

    def to_model(self, ell, n_photons):
        resolved = self.resolve(ell, n_photons)
        return LossModel(
            resolved.channel_eta,
            tuple(resolved.detector_eta),
            resolved.coincidence_window_ns,
            resolved.dark_rate,
        )


def _check_ell(name, ell):
    if ell is None or int(ell) != ell or ell == 0:
        raise ConfigError(name, f"must be a non-zero integer, got {ell}")


@dataclass
class ScanConfig:
    n_photons: int = 2
    ell: int = 1
    scheme: str = Scheme.ORTHOGONAL.value
    integration_time_s: float = None
    repetitions: int = DEFAULT_REPETITIONS
    periods: float = 1.0
    points_per_period: int = 40
    offset: float = 0.5
    angles_deg: list = None
    subtract_accidentals: bool = True
    source: SourceConfig = field(default_factory=SourceConfig)
    loss: LossConfig = field(default_factory=LossConfig)

    def validate(self):
        if self.n_photons not in (1, 2):
            raise ConfigError("n_photons", f"must be 1 or 2, got {self.n_photons}")
        _check_ell("ell", self.ell)
        try:
            Scheme.parse(self.scheme)
        except DomainError as e:
            raise ConfigError("scheme", str(e))
        if self.integration_time_s is not None and self.integration_time_s <= 0:
            raise ConfigError("integration_time_s", "must be positive")
        if self.repetitions < 2:
            raise ConfigError("repetitions", "at least two repetitions are needed")
        if self.periods <= 0 or self.points_per_period < 1:
            raise ConfigError(
                "periods", "periods and points_per_period must be positive"
            )
        if self.angles_deg is not None and np.any(np.diff(self.angles_deg) <= 0):
            raise ConfigError("angles_deg", "angles must be strictly increasing")
        self.source.validate()
        self.loss.validate()

    def resolve(self):
        time = self.integration_time_s
        if time is None:
            time = default_integration_time(self.ell, self.n_photons)
        angles = self.angles_deg
        if angles is None:
            angles = fringe_angles(
                self.n_photons,
                self.ell,
                self.periods,
                self.points_per_period,
                self.offset,
            ).tolist()
        return dataclasses.replace(
            self,
            scheme=Scheme.parse(self.scheme).value,
            integration_time_s=float(time),
            angles_deg=[float(a) for a in angles],
            source=self.source.resolve(),
            loss=self.loss.resolve(self.ell, self.n_photons),
        )

    def for_run(self, n_photons, ell):
        """Copy for another (N, l) with the angle grid and timing re-derived."""
        return dataclasses.replace(
            self, n_photons=n_photons, ell=ell, angles_deg=None, integration_time_s=None
        )


@dataclass
class FisherConfig:
    scan: ScanConfig = field(default_factory=ScanConfig)
    grid_points: int = 721
    crb_tolerance: float = 0.1

    def validate(self):
        self.scan.validate()
        if self.grid_points < 2:
            raise ConfigError("grid_points", "need at least two points")
        if self.crb_tolerance < 0:
            raise ConfigError("crb_tolerance", "must be non-negative")

    def resolve(self):
        return dataclasses.replace(self, scan=self.scan.resolve())


@dataclass
class SensitivityConfig:
    """
    Sweep over N and l; every run uses ``scan`` with its N, l, grid and
    timing replaced.
    """

    photon_numbers: list = field(default_factory=lambda: [1, 2])
    ells: list = field(default_factory=lambda: list(DEFAULT_ELLS))
    scan: ScanConfig = field(default_factory=ScanConfig)
    n_best: int = 4
    theory_visibility: float = 0.9999
    workers: int = 4

    def validate(self):
        if not self.photon_numbers or any(n not in (1, 2) for n in self.photon_numbers):
            raise ConfigError("photon_numbers", "entries must be 1 or 2")
        if not self.ells:
            raise ConfigError("ells", "need at least one l")
        for ell in self.ells:
            _check_ell("ells", ell)
        if self.n_best < 1:
            raise ConfigError("n_best", "must be positive")
        if not 0.0 < self.theory_visibility <= 1.0:
            raise ConfigError("theory_visibility", "must lie in (0, 1]")
        if self.workers < 1:
            raise ConfigError("workers", "must be positive")
        self.scan.validate()

    def runs(self):
        return [
            self.scan.for_run(n, ell).resolve()
            for n in self.photon_numbers
            for ell in self.ells
        ]

    def resolve(self):
        scan = dataclasses.replace(self.scan, source=self.scan.source.resolve())
        return dataclasses.replace(self, scan=scan)


@dataclass
class HomConfig:
    ell: int = 1
    delays_fs: list = None
    delay_span_fs: float = 1000.0
    delay_points: int = 41
    integration_time_s: float = 1.0
    repetitions: int = DEFAULT_REPETITIONS
    source: SourceConfig = field(default_factory=SourceConfig)
    loss: LossConfig = field(default_factory=LossConfig)

    def validate(self):
        _check_ell("ell", self.ell)
        if self.delays_fs is not None:
            if len(self.delays_fs) == 0:
                raise ConfigError("delays_fs", "delay list is empty")
            if np.any(np.diff(self.delays_fs) <= 0):
                raise ConfigError("delays_fs", "delays must be strictly increasing")
        if self.delay_points < 5 or self.delay_span_fs <= 0:
            raise ConfigError(
                "delay_points", "need at least 5 points over a positive span"
            )
        if self.integration_time_s <= 0:
            raise ConfigError("integration_time_s", "must be positive")
        if self.repetitions < 2:
            raise ConfigError("repetitions", "at least two repetitions are needed")
        self.source.validate()
        self.loss.validate()

    def resolve(self):
        delays = self.delays_fs
        if delays is None:
            span = self.delay_span_fs
            delays = np.linspace(-span, span, self.delay_points)
        return dataclasses.replace(
            self,
            delays_fs=[float(d) for d in delays],
            source=self.source.resolve(),
            loss=self.loss.resolve(self.ell, 2),
        )


@dataclass
class HoloConfig:
    ell: int = 2
    mode: str = "M1"
    grid_px: int = 1024
    aperture_mm: float = 4.0
    grating_period: int = 8
    phase_depth: float = 2 * math.pi
    amplitude_masking: str = "none"
    image_format: str = "pgm"
    mub_check: bool = True

    def validate(self):
        _check_ell("ell", self.ell)
        if self.mode not in ("oam", "M1", "M2"):
            raise ConfigError(
                "mode", f"expected 'oam', 'M1' or 'M2', got {self.mode!r}"
            )
        if self.grid_px < 2:
            raise ConfigError("grid_px", "must be at least 2")
        if self.grating_period < 2:
            raise ConfigError("grating_period", "must be at least 2 px")
        if not 0 < self.phase_depth <= 2 * math.pi:
            raise ConfigError("phase_depth", "must lie in (0, 2 pi]")
        if self.amplitude_masking not in ("none", "carve"):
            raise ConfigError("amplitude_masking", "expected 'none' or 'carve'")
        if self.image_format not in ("pgm", "png"):
            raise ConfigError("image_format", "expected 'pgm' or 'png'")

    def resolve(self):
        return self


@dataclass
class WitnessConfig:
    ell: int = 1
    preparation: str = "noon"
    indistinguishability: float = 1.0
    dephasing: float = 0.0
    counts_per_setting: float = 0.0
    phi_deg: float = 0.0

    def validate(self):
        _check_ell("ell", self.ell)
        if self.preparation not in ("noon", "product"):
            raise ConfigError("preparation", "expected 'noon' or 'product'")
        if not 0.0 <= self.indistinguishability <= 1.0:
            raise ConfigError("indistinguishability", "must lie in [0, 1]")
        if not 0.0 <= self.dephasing <= 1.0:
            raise ConfigError("dephasing", "must lie in [0, 1]")
        if self.counts_per_setting < 0:
            raise ConfigError("counts_per_setting", "must be non-negative")

    def resolve(self):
        return self


@dataclass
class VerifyConfig:
    def validate(self):
        pass

    def resolve(self):
        return self


COMMAND_CONFIGS = {
    "scan": ScanConfig,
    "fisher": FisherConfig,
    "sensitivity": SensitivityConfig,
    "hom": HomConfig,
    "holo": HoloConfig,
    "witness": WitnessConfig,
    "noon-verify": VerifyConfig,
}


@dataclass
class RunConfig:
    """What a run directory's config.json holds."""

    command: str
    seed: int = DEFAULT_SEED
    params: object = None

    def to_dict(self):
        return {
            "command": self.command,
            "seed": self.seed,
            "params": dataclasses.asdict(self.params),
        }


def from_dict(cls, data, prefix=""):
    """
    Build a config dataclass from a dict, recursing into nested records.

    :raises ConfigError: on unknown keys or malformed nested records
    """
    if not isinstance(data, dict):
        raise ConfigError(prefix or cls.__name__, "expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if key not in known:
            raise ConfigError(name, "unknown setting")
        kind = known[key].type
        if dataclasses.is_dataclass(kind) and value is not None:
            value = from_dict(kind, value, f"{name}.")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(prefix or cls.__name__, str(e))


def run_config_from_dict(data, command=None):
    data = dict(data)
    stored = data.pop("command", command)
    if command is not None and stored != command:
        raise ConfigError("command", f"config is for {stored!r}, not {command!r}")
    if stored not in COMMAND_CONFIGS:
        raise ConfigError("command", f"unknown command {stored!r}")
    seed = data.pop("seed", DEFAULT_SEED)
    params = from_dict(COMMAND_CONFIGS[stored], data.pop("params", {}) or {}, "params.")
    if data:
        raise ConfigError(sorted(data)[0], "unknown setting")
    return RunConfig(stored, seed, params)


def apply_override(config, path, value):
    """
    Return a copy of ``config`` with the dotted ``path`` set to ``value``.
    """
    head, _, rest = path.partition(".")
    names = {f.name for f in dataclasses.fields(config)}
    if head not in names:
        raise ConfigError(path, "unknown setting")
    if rest:
        return dataclasses.replace(
            config, **{head: apply_override(getattr(config, head), rest, value)}
        )
    return dataclasses.replace(config, **{head: value})


def finalize(run_config):
    """Validate and resolve; the result is what gets echoed to config.json."""
    seed = run_config.seed
    if seed is None or int(seed) != seed or seed < 0:
        raise ConfigError("seed", f"must be a non-negative integer, got {seed}")
    run_config.params.validate()
    resolved = run_config.params.resolve()
    resolved.validate()
    logger.debug(
        "resolved %s config: %s", run_config.command, dataclasses.asdict(resolved)
    )
    return RunConfig(run_config.command, int(run_config.seed), resolved)
