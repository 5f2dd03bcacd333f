"""Closed-form heralding probabilities and fidelities for the loop source.

Every quantity here has two implementations: a closed form (primary) and
a truncated photon-number series (functions with an ``_oracle`` suffix).
The series evaluate the defining sums directly from the elementary
kernels in :mod:`loopsource.models`, so the two routes are independent
and the test suite can hold them against each other.

Heralding on the detector arm projects the stored signal arm onto a
photon-number mixture.  A herald that fired l loops before the output
leaves the photon to survive transmission tau_l, so the chance that
exactly one photon emerges (the single-photon fidelity) depends on the
heralded photon-number distribution and on the loss chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import (
    DetectorKind,
    DetectorModel,
    LossModel,
    OutcomeDistribution,
    ProtocolConfig,
    SourceModel,
    UndefinedConditionalError,
    detect_prob,
    herald_outcome,
    thermal_pmf,
    thermal_truncation,
    transmission,
)


@dataclass(frozen=True)
class HeraldStats:
    """Single-shot and whole-train heralding probabilities."""

    single_shot: float
    train: float
    detector_kind: DetectorKind


@dataclass(frozen=True)
class FidelityReport:
    """Herald-conditioned fidelity, unconditional fidelity, and the
    per-loop fidelities they are built from (index = loops before
    output).  Bins that can never herald carry zero weight; their
    per-loop entry is reported as 0."""

    conditional: float
    unconditional: float
    per_loop: tuple[float, ...]


def _single_shot_array(nbars, eta_d: float, kind: DetectorKind):
    x = np.asarray(nbars, dtype=float) * eta_d
    if kind is DetectorKind.NUMBER_RESOLVED:
        return x / (1.0 + x) ** 2
    return x / (1.0 + x)


def _loop_fidelity_array(nbars, eta_d: float, taus, kind: DetectorKind):
    """Single-photon fidelity of a herald with mean photon number
    ``nbars`` whose output survives transmission ``taus`` (elementwise)."""
    nbar = np.asarray(nbars, dtype=float)
    tau = np.asarray(taus, dtype=float)
    if kind is DetectorKind.NUMBER_RESOLVED:
        shrink = nbar * (1.0 - eta_d) * (1.0 - tau)
        return (
            tau * (1.0 + eta_d * nbar) ** 2 * (1.0 + nbar + shrink)
            / (1.0 + nbar - shrink) ** 3
        )
    num = tau * (1.0 + eta_d * nbar) * (
        1.0 + 2.0 * nbar + nbar**2 * eta_d + nbar**2 * tau * (1.0 - eta_d) * (2.0 - tau)
    )
    den = (1.0 + nbar * tau) ** 2 * (1.0 + nbar * ((1.0 - eta_d) * tau + eta_d)) ** 2
    return num / den


def herald_single_shot(source: SourceModel, det: DetectorModel) -> float:
    """Probability that a single pump pulse produces a successful herald.

    For a number-resolved detector the herald is exactly one count,
    x/(1+x)^2 with x = nbar*eta_d; for a bucket detector any click
    heralds, x/(1+x).
    """
    return float(_single_shot_array(source.mean_photon_number, det.efficiency, det.kind))


def herald_single_shot_oracle(source: SourceModel, det: DetectorModel) -> float:
    """Series evaluation of the single-shot herald probability,
    sum over n of p_detect(herald|n) * p_thermal(n)."""
    n = np.arange(1, thermal_truncation(source) + 1)
    return float(np.sum(_thermal_vector(source, n) * _herald_vector(det, n)))


def herald_train(source: SourceModel, det: DetectorModel, time_bins: int) -> float:
    """Probability of at least one herald across a train of pulses."""
    if time_bins < 1:
        raise ValueError(f"time_bins must be >= 1, got {time_bins}")
    single = herald_single_shot(source, det)
    return 1.0 - (1.0 - single) ** time_bins


def prep_pmf(source: SourceModel, det: DetectorModel, n: int) -> float:
    """Photon-number distribution of the stored arm given a herald.

    A herald biases the thermal statistics toward the photon numbers the
    detector is likely to flag, so this differs from the bare source law.
    """
    if n < 1:
        raise ValueError(f"heralded photon number must be >= 1, got {n}")
    nbar = source.mean_photon_number
    eta = det.efficiency
    single = herald_single_shot(source, det)
    if single == 0.0:
        raise UndefinedConditionalError(
            "heralding probability is zero; the post-herald state is undefined"
        )
    if det.kind is DetectorKind.NUMBER_RESOLVED:
        # (nbar*(1-eta)/(1+nbar))**(n-1) keeps the evaluation overflow-safe
        # for large nbar; algebraically identical to the direct power form.
        base = nbar * (1.0 - eta) / (1.0 + nbar)
        return n * base ** (n - 1) * (1.0 + eta * nbar) ** 2 / (1.0 + nbar) ** 2
    base = nbar / (1.0 + nbar)
    click = 1.0 - (1.0 - eta) ** n
    return base ** (n - 1) * click * (1.0 + eta * nbar) / (eta * (1.0 + nbar) ** 2)


def prep_pmf_oracle(source: SourceModel, det: DetectorModel, n: int) -> float:
    """Bayes-ratio evaluation of the heralded photon-number distribution:
    p_detect(herald|n) * p_thermal(n) / (series herald probability)."""
    if n < 1:
        raise ValueError(f"heralded photon number must be >= 1, got {n}")
    single = herald_single_shot_oracle(source, det)
    if single == 0.0:
        raise UndefinedConditionalError(
            "heralding probability is zero; the post-herald state is undefined"
        )
    return detect_prob(det, herald_outcome(det.kind), n) * thermal_pmf(source, n) / single


def fidelity_after_loops(
    source: SourceModel, det: DetectorModel, loss: LossModel, loops: int
) -> float:
    """Probability that exactly one photon reaches the output when the
    herald fired ``loops`` round trips before extraction."""
    single = herald_single_shot(source, det)
    if single == 0.0:
        raise UndefinedConditionalError(
            "heralding probability is zero; the per-loop fidelity is undefined"
        )
    tau = transmission(loss, loops)
    return float(
        _loop_fidelity_array(source.mean_photon_number, det.efficiency, tau, det.kind)
    )


def fidelity_after_loops_oracle(
    source: SourceModel, det: DetectorModel, loss: LossModel, loops: int
) -> float:
    """Series evaluation of the per-loop fidelity: the heralded
    photon-number distribution folded with binomial survival of exactly
    one photon."""
    single = herald_single_shot_oracle(source, det)
    if single == 0.0:
        raise UndefinedConditionalError(
            "heralding probability is zero; the per-loop fidelity is undefined"
        )
    tau = transmission(loss, loops)
    n = np.arange(1, thermal_truncation(source) + 1)
    prep = _thermal_vector(source, n) * _herald_vector(det, n) / single
    survive_one = n * tau * (1.0 - tau) ** (n - 1)
    return float(np.sum(prep * survive_one))


def detector_limited_fidelity(source: SourceModel, det: DetectorModel) -> float:
    """Herald-conditioned fidelity when the switch and fibre are lossless,
    leaving the detector as the only imperfection.  Independent of the
    number of time-bins."""
    nbar = source.mean_photon_number
    eta = det.efficiency
    if det.kind is DetectorKind.NUMBER_RESOLVED:
        return ((1.0 + eta * nbar) / (1.0 + nbar)) ** 2
    return (1.0 + eta * nbar) / (1.0 + nbar) ** 2


def detector_limited_fidelity_oracle(source: SourceModel, det: DetectorModel) -> float:
    """Series route to the lossless-loop fidelity (zero loops through a
    perfect switch)."""
    return fidelity_after_loops_oracle(source, det, LossModel(1.0, 1.0), 0)


def large_nbar_asymptote(eta: float, nbar: float) -> float:
    """Rough high-pump scaling eta**2/nbar of the unconditional bucket
    fidelity with every efficiency equal to eta.  A test reference only;
    see the README note on its accuracy."""
    if not (0.0 <= eta <= 1.0):
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if nbar <= 0.0:
        raise ValueError(f"nbar must be > 0, got {nbar}")
    return eta * eta / nbar


def herald_stats(source: SourceModel, det: DetectorModel, time_bins: int) -> HeraldStats:
    return HeraldStats(
        single_shot=herald_single_shot(source, det),
        train=herald_train(source, det, time_bins),
        detector_kind=det.kind,
    )


def outcome_distribution(config: ProtocolConfig) -> OutcomeDistribution:
    """Distribution of 'the last herald fired l loops before output'.

    The switch keeps the most recent heralded bin, so the final bin wins
    whenever it heralds and earlier bins only matter if every later bin
    failed: p(l) = S_l * prod_{k<l}(1 - S_k), with the leftover product
    as the no-herald mass.
    """
    singles = _single_shot_array(
        config.bin_means(), config.detector.efficiency, config.detector.kind
    )
    no_later_herald = np.concatenate(([1.0], np.cumprod(1.0 - singles)))
    probs = singles * no_later_herald[:-1]
    return OutcomeDistribution(tuple(probs) + (float(no_later_herald[-1]),))


def _per_loop_fidelities(config: ProtocolConfig) -> np.ndarray:
    nbars = config.bin_means()
    taus = _transmission_chain(config.loss, config.time_bins)
    values = _loop_fidelity_array(nbars, config.detector.efficiency, taus, config.detector.kind)
    # Bins that can never herald get zero probability weight; report 0
    # rather than a conditional value for an impossible event.
    singles = _single_shot_array(nbars, config.detector.efficiency, config.detector.kind)
    return np.where(singles > 0.0, values, 0.0)


def _transmission_chain(loss: LossModel, time_bins: int) -> np.ndarray:
    per_loop = loss.switch_efficiency * loss.fibre_efficiency
    return loss.switch_efficiency * per_loop ** np.arange(time_bins)


def unconditional_fidelity(config: ProtocolConfig) -> float:
    """Average single-photon fidelity over every trial, counting trials
    with no herald (which deliver vacuum) as fidelity zero."""
    dist = outcome_distribution(config)
    weights = np.asarray(dist.probabilities[:-1])
    return float(np.sum(weights * _per_loop_fidelities(config)))


def conditional_fidelity(config: ProtocolConfig) -> float:
    """Average single-photon fidelity over heralded trials only."""
    dist = outcome_distribution(config)
    herald_prob = dist.herald_probability
    if herald_prob == 0.0:
        raise UndefinedConditionalError(
            "the train never heralds; the conditional fidelity is undefined"
        )
    weights = np.asarray(dist.probabilities[:-1])
    return float(np.sum(weights * _per_loop_fidelities(config)) / herald_prob)


def fidelity_report(config: ProtocolConfig) -> FidelityReport:
    dist = outcome_distribution(config)
    herald_prob = dist.herald_probability
    if herald_prob == 0.0:
        raise UndefinedConditionalError(
            "the train never heralds; the conditional fidelity is undefined"
        )
    per_loop = _per_loop_fidelities(config)
    weights = np.asarray(dist.probabilities[:-1])
    unconditional = float(np.sum(weights * per_loop))
    return FidelityReport(
        conditional=unconditional / herald_prob,
        unconditional=unconditional,
        per_loop=tuple(float(f) for f in per_loop),
    )


def _thermal_vector(source: SourceModel, n: np.ndarray) -> np.ndarray:
    nbar = source.mean_photon_number
    ratio = nbar / (nbar + 1.0)
    return ratio ** n.astype(float) / (nbar + 1.0)


def _herald_vector(det: DetectorModel, n: np.ndarray) -> np.ndarray:
    """Herald probability per photon number for n >= 1."""
    eta = det.efficiency
    nf = n.astype(float)
    if det.kind is DetectorKind.NUMBER_RESOLVED:
        return eta * nf * (1.0 - eta) ** (nf - 1.0)
    return 1.0 - (1.0 - eta) ** nf
