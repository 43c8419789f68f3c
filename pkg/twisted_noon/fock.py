"""
Two-mode N-photon state algebra in the {+l, -l} OAM basis.

Amplitude index n of a :class:`TwoModeFockState` holds the coefficient of
|n, N-n>, i.e. n photons in +l and N-n photons in -l. All angles are radians.
"""
import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb, factorial

from .exceptions import DomainError, NonUnitaryError

logger = logging.getLogger(__name__)

MAX_PHOTONS = 8
UNITARY_TOL = 1e-9
NORM_TOL = 1e-9

_ORDERS = np.arange(MAX_PHOTONS + 1)
_SQRT_FACTORIAL = np.sqrt(factorial(_ORDERS))
_BINOMIAL = comb(_ORDERS[:, None], _ORDERS[None, :])


def check_ell(ell):
    if int(ell) != ell or ell == 0:
        raise DomainError(f"OAM value must be a non-zero integer, got {ell}")
    return int(ell)


def check_photons(n_photons):
    if int(n_photons) != n_photons or n_photons < 1:
        raise DomainError(f"photon number must be a positive integer, got {n_photons}")
    if n_photons > MAX_PHOTONS:
        raise DomainError(f"photon number {n_photons} exceeds the cap of {MAX_PHOTONS}")
    return int(n_photons)


class ModeKind(enum.Enum):
    OAM_PLUS = "oam_plus"
    OAM_MINUS = "oam_minus"
    PETAL_M1 = "petal_m1"
    PETAL_M2 = "petal_m2"


@dataclass(frozen=True)
class ModeLabel:
    """
    One of the four single-photon modes spanned by +l and -l.

    :param kind: which mode
    :type kind: ModeKind

    :param ell: OAM quanta, non-zero
    :type ell: int
    """

    kind: ModeKind
    ell: int

    def __post_init__(self):
        object.__setattr__(self, "kind", ModeKind(self.kind))
        object.__setattr__(self, "ell", check_ell(self.ell))

    @property
    def signed_ell(self):
        """OAM carried by the mode, None for the petal superpositions."""
        if self.kind is ModeKind.OAM_PLUS:
            return self.ell
        if self.kind is ModeKind.OAM_MINUS:
            return -self.ell
        return None

    @property
    def vector(self):
        """Single-photon amplitudes of the mode in the {+l, -l} basis."""
        s = 1.0 / math.sqrt(2.0)
        return {
            ModeKind.OAM_PLUS: np.array([1.0, 0.0], dtype=complex),
            ModeKind.OAM_MINUS: np.array([0.0, 1.0], dtype=complex),
            ModeKind.PETAL_M1: np.array([s, s], dtype=complex),
            ModeKind.PETAL_M2: np.array([s, -s], dtype=complex),
        }[self.kind]


@dataclass(frozen=True, eq=False)
class TwoModeFockState:
    """
    Pure N-photon state of the two modes +l and -l.

    :param n_photons: total photon number N
    :type n_photons: int

    :param ell: OAM value labelling the mode pair
    :type ell: int

    :param amplitudes: N+1 complex amplitudes, index n -> |n, N-n>
    :type amplitudes: array-like
    """

    n_photons: int
    ell: int
    amplitudes: np.ndarray

    def __post_init__(self):
        n_photons = check_photons(self.n_photons)
        amplitudes = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amplitudes.size != n_photons + 1:
            raise DomainError(
                f"{n_photons}-photon state needs {n_photons + 1} amplitudes, "
                f"got {amplitudes.size}"
            )
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1.0) > NORM_TOL:
            raise DomainError(f"state is not normalized (norm {norm:.12g})")
        amplitudes.flags.writeable = False
        object.__setattr__(self, "n_photons", n_photons)
        object.__setattr__(self, "ell", check_ell(self.ell))
        object.__setattr__(self, "amplitudes", amplitudes)

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def symmetric_wavefunction(self):
        """
        First-quantized amplitude matrix psi[m1, m2] of a two-photon state,
        rows and columns ordered (+l, -l). Sum of |psi|^2 is one.
        """
        if self.n_photons != 2:
            raise DomainError("symmetric wavefunction is only defined for N = 2")
        a = self.amplitudes
        off = a[1] / math.sqrt(2.0)
        return np.array([[a[2], off], [off, a[0]]], dtype=complex)

    def to_dict(self):
        return {
            "n_photons": self.n_photons,
            "ell": self.ell,
            "re": self.amplitudes.real.tolist(),
            "im": self.amplitudes.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        re = np.asarray(d["re"], dtype=float)
        im = np.asarray(d["im"], dtype=float)
        return cls(d["n_photons"], d["ell"], re + 1j * im)


@dataclass(frozen=True, eq=False)
class ModeUnitary:
    """
    2x2 unitary acting on the single-photon pair (+l, -l).
    Construction fails with :class:`NonUnitaryError` if ||U^dagger U - I|| > 1e-9.
    """

    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.shape != (2, 2):
            raise DomainError(f"mode unitary must be 2x2, got shape {entries.shape}")
        error = unitarity_error(entries)
        if error > UNITARY_TOL:
            raise NonUnitaryError(f"matrix is not unitary (deviation {error:.3g})")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    def compose(self, other):
        """Matrix product self . other (other acts first)."""
        return ModeUnitary(self.entries @ other.entries)

    def dagger(self):
        return ModeUnitary(self.entries.conj().T)

    def apply_single(self, vector):
        return self.entries @ np.asarray(vector, dtype=complex)


def unitarity_error(entries):
    entries = np.asarray(entries, dtype=complex)
    return float(np.linalg.norm(entries.conj().T @ entries - np.eye(2)))


def make_state(amplitudes, ell):
    """
    Build a normalized state from arbitrary (non-zero) amplitudes.
    """
    amplitudes = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm = np.linalg.norm(amplitudes)
    if norm == 0:
        raise DomainError("cannot normalize the zero vector")
    return TwoModeFockState(amplitudes.size - 1, ell, amplitudes / norm)


def make_fock(n, n_photons, ell):
    """The number state |n, N-n>."""
    n_photons = check_photons(n_photons)
    if not 0 <= n <= n_photons:
        raise DomainError(f"occupation {n} outside 0..{n_photons}")
    amplitudes = np.zeros(n_photons + 1, dtype=complex)
    amplitudes[n] = 1.0
    return TwoModeFockState(n_photons, ell, amplitudes)


def make_noon(n_photons, ell, phi):
    """
    Rotated N00N state (|N,0> - exp(-2i N l phi)|0,N>)/sqrt(2).

    :param n_photons: photon number N >= 1
    :type n_photons: int

    :param ell: OAM value, non-zero
    :type ell: int

    :param phi: rotation angle in radians
    :type phi: float
    """
    n_photons = check_photons(n_photons)
    ell = check_ell(ell)
    amplitudes = np.zeros(n_photons + 1, dtype=complex)
    amplitudes[n_photons] = 1.0 / math.sqrt(2.0)
    amplitudes[0] -= np.exp(-2j * n_photons * ell * phi) / math.sqrt(2.0)
    return TwoModeFockState(n_photons, ell, amplitudes)


def projection_state(n_photons, ell):
    """psi_0 = (|N,0> + |0,N>)/sqrt(2), the state the rotated N00N is projected onto."""
    n_photons = check_photons(n_photons)
    amplitudes = np.zeros(n_photons + 1, dtype=complex)
    amplitudes[0] += 1.0 / math.sqrt(2.0)
    amplitudes[n_photons] += 1.0 / math.sqrt(2.0)
    return TwoModeFockState(n_photons, ell, amplitudes)


def rotation_unitary(ell, phi):
    """diag(exp(i l phi), exp(-i l phi)) for a rotation by phi radians."""
    ell = check_ell(ell)
    return ModeUnitary(np.diag([np.exp(1j * ell * phi), np.exp(-1j * ell * phi)]))


def hadamard_mub():
    """Transform from the OAM basis to the petal basis {M1, M2}."""
    return ModeUnitary(np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0))


def random_unitary(rng):
    """Haar-random 2x2 unitary from the QR decomposition of a Ginibre matrix."""
    re, im = rng.standard_normal((2, 2, 2))
    z = (re + 1j * im) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return ModeUnitary(q * (d / np.abs(d)))


def _as_unitary(u):
    if isinstance(u, ModeUnitary):
        return u
    return ModeUnitary(u)


def lift_matrix(u, n_photons):
    """
    Matrix of the N-photon representation of u in the |n, N-n> basis.

    Creation operators transform as a1 -> u11 a1 + u21 a2, a2 -> u12 a1 + u22 a2;
    |n, m> = a1^n a2^m |0> / sqrt(n! m!) is expanded binomially.
    """
    u = _as_unitary(u)
    n_photons = check_photons(n_photons)
    (u11, u12), (u21, u22) = u.entries
    lifted = np.zeros((n_photons + 1, n_photons + 1), dtype=complex)
    for n in range(n_photons + 1):
        m = n_photons - n
        j = np.arange(n + 1)[:, None]
        k = np.arange(m + 1)[None, :]
        coeff = (
            _BINOMIAL[n, j]
            * _BINOMIAL[m, k]
            * u11**j
            * u21 ** (n - j)
            * u12**k
            * u22 ** (m - k)
        )
        p = np.broadcast_to(j + k, coeff.shape)
        weights = (
            coeff
            * _SQRT_FACTORIAL[p]
            * _SQRT_FACTORIAL[n_photons - p]
            / (_SQRT_FACTORIAL[n] * _SQRT_FACTORIAL[m])
        )
        column = np.zeros(n_photons + 1, dtype=complex)
        np.add.at(column, p.ravel(), weights.ravel())
        lifted[:, n] = column
    return lifted


def lift_and_apply(u, state):
    """
    Apply the N-photon lift of a mode unitary to a state.

    :param u: mode transform (a raw 2x2 array is validated first)
    :type u: ModeUnitary

    :param state: input state
    :type state: TwoModeFockState
    """
    amplitudes = lift_matrix(u, state.n_photons) @ state.amplitudes
    return TwoModeFockState(state.n_photons, state.ell, amplitudes)


def projection_probability(state, target):
    """|<target|state>|^2 for two states of equal photon number and mode pair."""
    if state.n_photons != target.n_photons:
        raise DomainError(
            f"photon numbers differ: {state.n_photons} vs {target.n_photons}"
        )
    if abs(state.ell) != abs(target.ell):
        raise DomainError(f"mode pairs differ: l={state.ell} vs l={target.ell}")
    p = abs(np.vdot(target.amplitudes, state.amplitudes)) ** 2
    return float(min(max(p, 0.0), 1.0))


def sample_projection_counts(state, target, m, rng, size=None):
    """
    Number of successful projections out of m independent copies, each copy
    an independent Bernoulli trial with the single-copy projection probability.
    """
    p = projection_probability(state, target)
    return rng.binomial(int(m), p, size=size)


@dataclass(frozen=True)
class AnalyticPrediction:
    """
    Closed-form detection statistics for M repetitions of an N-photon,
    l-quanta N00N measurement. Angles in radians.
    """

    m_repetitions: int
    n_photons: int
    ell: int

    def expectation(self, phi):
        return self.m_repetitions / 2.0 * (
            1.0 - np.cos(2 * self.n_photons * self.ell * np.asarray(phi))
        )

    def variance(self, phi):
        s2 = np.sin(self.n_photons * self.ell * np.asarray(phi)) ** 2
        return self.m_repetitions * s2 * (1.0 - s2)

    @property
    def delta_phi(self):
        return 1.0 / (
            2.0 * math.sqrt(self.m_repetitions) * self.n_photons * abs(self.ell)
        )


def analytic_prediction(m, n_photons, ell):
    if int(m) != m or m < 1:
        raise DomainError(f"repetition count must be a positive integer, got {m}")
    return AnalyticPrediction(int(m), check_photons(n_photons), check_ell(ell))


def verify_identities(seed=0):
    """
    Run the state-algebra invariant suite and return one row per check with
    the largest error seen, the tolerance and whether it passed.
    """
    rng = np.random.default_rng(seed)
    rows = []

    def record(check, error, tolerance):
        rows.append(
            {
                "check": check,
                "max_error": float(error),
                "tolerance": tolerance,
                "passed": bool(error < tolerance),
            }
        )

    bunched = lift_and_apply(hadamard_mub(), make_fock(1, 2, 1))
    expected = np.array([-1.0, 0.0, 1.0]) / math.sqrt(2.0)
    record(
        "H2|1,1> = (|2,0> - |0,2>)/sqrt(2)",
        np.max(np.abs(bunched.amplitudes - expected)),
        1e-12,
    )

    norm_error = 0.0
    composition_error = 0.0
    inverse_error = 0.0
    for _ in range(100):
        for n_photons in (1, 2, 3):
            re, im = rng.standard_normal((2, n_photons + 1))
            state = make_state(re + 1j * im, 1)
            u, v = random_unitary(rng), random_unitary(rng)
            once = lift_and_apply(u, state)
            norm_error = max(norm_error, abs(np.linalg.norm(once.amplitudes) - 1.0))
            composed = lift_and_apply(u.compose(v), state)
            stepwise = lift_and_apply(u, lift_and_apply(v, state))
            gap = np.max(np.abs(composed.amplitudes - stepwise.amplitudes))
            composition_error = max(composition_error, gap)
            back = lift_and_apply(u.dagger(), once)
            inverse_error = max(
                inverse_error, np.max(np.abs(back.amplitudes - state.amplitudes))
            )
    record("norm preservation", norm_error, 1e-12)
    record("lift(u v) = lift(u) lift(v)", composition_error, 1e-10)
    record("lift(u^dagger) undoes lift(u)", inverse_error, 1e-10)

    phis = np.deg2rad(np.linspace(0.0, 360.0, 721))
    oracle_error = 0.0
    phase_error = 0.0
    for n_photons in (1, 2):
        for ell in (1, 2, 3, 5, 10, 25, 50, 100):
            start = make_noon(n_photons, ell, 0.0)
            target = projection_state(n_photons, ell)
            expected = analytic_prediction(1, n_photons, ell).expectation(phis)
            for phi, p_expected in zip(phis, expected):
                rotated = lift_and_apply(rotation_unitary(ell, phi), start)
                p = projection_probability(rotated, target)
                oracle_error = max(oracle_error, abs(p - p_expected))
                direct = make_noon(n_photons, ell, phi)
                gap = np.abs(np.abs(rotated.amplitudes) - np.abs(direct.amplitudes))
                phase_error = max(phase_error, np.max(gap))
    record("rotate-then-project = (1 - cos 2Nl phi)/2", oracle_error, 1e-10)
    record("rotation = N00N phase (up to global phase)", phase_error, 1e-12)

    for row in rows:
        logger.debug(
            "%s: max error %.3g (%s)", row["check"], row["max_error"], row["passed"]
        )
    return rows
