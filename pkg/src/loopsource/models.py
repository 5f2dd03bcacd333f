"""Domain models and elementary probability kernels for a loop-multiplexed
heralded single-photon source.

A pulsed down-conversion source emits photon pairs into a herald arm
(watched by a detector) and a signal arm (stored in a switchable fibre
loop).  The types here describe the pieces of that apparatus: thermal
photon statistics of the source, the detector response, the switch and
fibre losses, and the protocol configuration shared by the closed-form
and Monte Carlo code paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Photon-number series are truncated once the cumulative thermal mass
# reaches 1 - TAIL_MASS, but never below TRUNCATION_FLOOR terms.
TAIL_MASS = 1e-12
TRUNCATION_FLOOR = 64


class UndefinedConditionalError(ValueError):
    """A conditional quantity was requested but the conditioning event has
    probability zero (for example a heralding-conditioned fidelity when the
    source can never herald)."""


class DetectorKind(Enum):
    NUMBER_RESOLVED = "resolved"
    BUCKET = "bucket"


class DetectorOutcome(Enum):
    """Detection outcomes; ZERO/ONE apply to number-resolved detectors,
    NO_CLICK/CLICK to bucket detectors."""

    ZERO = "zero"
    ONE = "one"
    NO_CLICK = "no_click"
    CLICK = "click"


def _check_probability(value: float, name: str) -> None:
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class SourceModel:
    """Single-mode down-conversion source with thermal photon-number
    statistics of mean ``mean_photon_number``."""

    mean_photon_number: float

    def __post_init__(self) -> None:
        nbar = self.mean_photon_number
        if not (math.isfinite(nbar) and nbar >= 0.0):
            raise ValueError(f"mean photon number must be finite and >= 0, got {nbar}")


@dataclass(frozen=True)
class DetectorModel:
    """Herald detector with quantum efficiency ``efficiency``, either
    photon-number resolving or a bucket (click/no-click) detector."""

    kind: DetectorKind
    efficiency: float

    def __post_init__(self) -> None:
        if not isinstance(self.kind, DetectorKind):
            raise ValueError(f"kind must be a DetectorKind, got {self.kind!r}")
        _check_probability(self.efficiency, "detector efficiency")


@dataclass(frozen=True)
class LossModel:
    """Switch and fibre-loop transmissions of the storage loop."""

    switch_efficiency: float
    fibre_efficiency: float

    def __post_init__(self) -> None:
        _check_probability(self.switch_efficiency, "switch efficiency")
        _check_probability(self.fibre_efficiency, "fibre efficiency")


@dataclass(frozen=True)
class ConstantPump:
    """The same mean photon number in every time-bin."""

    mean_photon_number: float

    def __post_init__(self) -> None:
        nbar = self.mean_photon_number
        if not (math.isfinite(nbar) and nbar >= 0.0):
            raise ValueError(f"mean photon number must be finite and >= 0, got {nbar}")

    def bin_means(self, time_bins: int) -> np.ndarray:
        return np.full(time_bins, self.mean_photon_number)


@dataclass(frozen=True)
class PerBinPump:
    """One mean photon number per time-bin, indexed in reverse
    chronological order: entry 0 is the final bin (zero loops before
    output), entry t-1 is the earliest bin."""

    mean_photon_numbers: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "mean_photon_numbers", tuple(float(x) for x in self.mean_photon_numbers)
        )
        if len(self.mean_photon_numbers) == 0:
            raise ValueError("per-bin pump schedule must have at least one entry")
        for nbar in self.mean_photon_numbers:
            if not (math.isfinite(nbar) and nbar >= 0.0):
                raise ValueError(f"mean photon number must be finite and >= 0, got {nbar}")

    def bin_means(self, time_bins: int) -> np.ndarray:
        if len(self.mean_photon_numbers) != time_bins:
            raise ValueError(
                f"schedule has {len(self.mean_photon_numbers)} entries "
                f"but the protocol has {time_bins} time-bins"
            )
        return np.asarray(self.mean_photon_numbers, dtype=float)


PumpSchedule = ConstantPump | PerBinPump


@dataclass(frozen=True)
class ProtocolConfig:
    """Full description of one loop-source run: how many time-bins the
    source is pumped for, the pump schedule, and the detector and loss
    models."""

    time_bins: int
    pump: PumpSchedule
    detector: DetectorModel
    loss: LossModel

    def __post_init__(self) -> None:
        if not (isinstance(self.time_bins, int) and self.time_bins >= 1):
            raise ValueError(f"time_bins must be a positive integer, got {self.time_bins}")
        if isinstance(self.pump, PerBinPump):
            if len(self.pump.mean_photon_numbers) != self.time_bins:
                raise ValueError(
                    f"per-bin schedule length {len(self.pump.mean_photon_numbers)} "
                    f"does not match time_bins={self.time_bins}"
                )
        elif not isinstance(self.pump, ConstantPump):
            raise ValueError(f"pump must be ConstantPump or PerBinPump, got {self.pump!r}")

    def bin_means(self) -> np.ndarray:
        """Mean photon number per bin, indexed by loops before output."""
        return self.pump.bin_means(self.time_bins)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probability mass over 'the last herald happened l loops before the
    output' for l in 0..t-1, plus the no-herald event at index t."""

    probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probabilities)
        object.__setattr__(self, "probabilities", probs)
        if len(probs) < 2:
            raise ValueError("need at least one time-bin entry plus the no-herald entry")
        for p in probs:
            if not (-1e-15 <= p <= 1.0 + 1e-12):
                raise ValueError(f"probability entry out of range: {p}")
        total = math.fsum(probs)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities must sum to 1 within 1e-12, got {total}")

    @property
    def time_bins(self) -> int:
        return len(self.probabilities) - 1

    @property
    def no_herald(self) -> float:
        return self.probabilities[-1]

    @property
    def herald_probability(self) -> float:
        return 1.0 - self.probabilities[-1]


def thermal_pmf(source: SourceModel, n: int) -> float:
    """Probability that the source emits exactly n photon pairs in one bin.

    The single-mode thermal law (1/(nbar+1)) * (nbar/(nbar+1))**n.
    """
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    nbar = source.mean_photon_number
    if nbar == 0.0:
        return 1.0 if n == 0 else 0.0
    ratio = nbar / (nbar + 1.0)
    return ratio**n / (nbar + 1.0)


def thermal_truncation(source: SourceModel) -> int:
    """Smallest series length whose thermal tail mass is below TAIL_MASS,
    floored at TRUNCATION_FLOOR terms.

    The tail beyond n is ratio**(n+1), so the cutoff is closed-form.
    """
    nbar = source.mean_photon_number
    if nbar == 0.0:
        return TRUNCATION_FLOOR
    ratio = nbar / (nbar + 1.0)
    cutoff = math.ceil(math.log(TAIL_MASS) / math.log(ratio)) - 1
    return max(TRUNCATION_FLOOR, cutoff)


def detect_prob(det: DetectorModel, outcome: DetectorOutcome, n: int) -> float:
    """Conditional probability of a detection outcome given n photons hit
    the detector.  ZERO/ONE are only defined for number-resolved detectors
    and NO_CLICK/CLICK only for bucket detectors; by convention the
    one-photon outcome has probability 0 when n = 0.
    """
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    eta = det.efficiency
    miss = 1.0 - eta
    if det.kind is DetectorKind.NUMBER_RESOLVED:
        if outcome is DetectorOutcome.ZERO:
            return miss**n
        if outcome is DetectorOutcome.ONE:
            if n == 0:
                return 0.0
            return eta * n * miss ** (n - 1)
        raise ValueError(f"outcome {outcome} is not defined for a number-resolved detector")
    if outcome is DetectorOutcome.NO_CLICK:
        return miss**n
    if outcome is DetectorOutcome.CLICK:
        return 1.0 - miss**n
    raise ValueError(f"outcome {outcome} is not defined for a bucket detector")


def herald_outcome(kind: DetectorKind) -> DetectorOutcome:
    """The outcome that counts as a successful herald for each detector."""
    if kind is DetectorKind.NUMBER_RESOLVED:
        return DetectorOutcome.ONE
    return DetectorOutcome.CLICK


def transmission(loss: LossModel, loops: int) -> float:
    """Net transmission of a photon stored for ``loops`` round trips: one
    switch pass to enter plus a switch and a fibre pass per loop."""
    if loops < 0:
        raise ValueError(f"loop count must be >= 0, got {loops}")
    return loss.switch_efficiency ** (loops + 1) * loss.fibre_efficiency**loops


def loss_thinning_pmf(n_in: int, transmission: float, n_out: int) -> float:
    """Probability that n_out of n_in photons survive a transmission,
    each photon surviving independently."""
    if n_in < 0 or n_out < 0:
        raise ValueError("photon numbers must be >= 0")
    _check_probability(transmission, "transmission")
    if n_out > n_in:
        return 0.0
    return (
        math.comb(n_in, n_out)
        * transmission**n_out
        * (1.0 - transmission) ** (n_in - n_out)
    )
