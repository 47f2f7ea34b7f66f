"""Per-pulse stochastic simulation of the Alice -> channel -> Bob chain.

The engine draws Poissonian photon numbers per pulse, propagates each
photon through the full link budget (channel + setup loss + detector
efficiency), models the passive 50/50 basis choice at Bob, detector
errors and frame-wise background clicks, and resolves multi-click
frames by squashing to a single detection.

Summaries count post-gate statistics: the configured background
suppression factor stands in for the downstream software gate, scaling
the per-frame background probability and, in emitted streams, confining
background arrival times to the corresponding slice of the frame.  Runs
meant to feed the raw (ungated) analysis pipeline should set
``background_suppression = 1``, which spreads background arrivals
uniformly over the whole frame and leaves the gating to the analysis.

Frames are simulated in independent blocks whose generators derive from
(seed, block index), so results are reproducible and block merging is
associative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .config import LinkConfig, Polarization, ProtocolConfig, SourceConfig
from .decoy import ChannelObservables, transmittance
from .timetag import CLASS_LABELS, TICK_SECONDS, AliceLog, TimeTagStream

DEFAULT_BLOCK_FRAMES = 1 << 20


@dataclass(frozen=True)
class PulseEmission:
    """One pulse leaving Alice."""

    frame: int
    polarization: Polarization
    intensity_label: str
    mean_photons: float
    photons: int


@dataclass(frozen=True)
class DetectionEvent:
    """At most one of these per frame survives squashing."""

    frame: int
    channel: int  # 0=H 1=V 2=D 3=A
    arrival_offset_s: float
    origin: str  # "signal" or "background"


@dataclass(frozen=True)
class RunSummary:
    """Per-class counters of a simulation run; addition merges blocks."""

    frames: int
    simulated_s: float
    sent: np.ndarray  # (3,) pulses per intensity class
    detected: np.ndarray  # (3,) frames with a detection
    sifted: np.ndarray  # (3,) detections whose measured basis matched
    errors: np.ndarray  # (3,) sifted detections with the wrong bit

    def __add__(self, other: "RunSummary") -> "RunSummary":
        return RunSummary(
            frames=self.frames + other.frames,
            simulated_s=self.simulated_s + other.simulated_s,
            sent=self.sent + other.sent,
            detected=self.detected + other.detected,
            sifted=self.sifted + other.sifted,
            errors=self.errors + other.errors,
        )

    def gain_class(self, i: int) -> float:
        return float(self.detected[i] / self.sent[i]) if self.sent[i] else float("nan")

    def qber_class(self, i: int) -> float:
        return float(self.errors[i] / self.sifted[i]) if self.sifted[i] else float("nan")

    def as_text(self) -> str:
        lines = [f"frames = {self.frames}", f"simulated_s = {self.simulated_s!r}"]
        for i, label in enumerate(CLASS_LABELS):
            lines += [
                f"sent_{label} = {int(self.sent[i])}",
                f"detected_{label} = {int(self.detected[i])}",
                f"sifted_{label} = {int(self.sifted[i])}",
                f"errors_{label} = {int(self.errors[i])}",
                f"gain_{label} = {self.gain_class(i)!r}",
                f"qber_{label} = {self.qber_class(i)!r}",
            ]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunResult:
    summary: RunSummary
    stream: TimeTagStream | None = None
    alice_log: AliceLog | None = None
    dropped_records: int = 0


def sample_pulse(source: SourceConfig, rng: np.random.Generator, frame: int = 0) -> PulseEmission:
    """Draw one pulse: intensity class, polarization, Poisson photon number."""
    idx = rng.choice(3, p=source.class_probs)
    pol = Polarization(rng.choice(4, p=source.pol_probs))
    mean = (source.mu, source.nu1, source.nu2)[idx]
    return PulseEmission(
        frame=frame,
        polarization=pol,
        intensity_label=CLASS_LABELS[idx],
        mean_photons=mean,
        photons=int(rng.poisson(mean)),
    )


def transmit_detect(
    pulse: PulseEmission,
    link: LinkConfig,
    rng: np.random.Generator,
    source_error: float = 0.0,
    background_suppression: float = 1.0,
    period_s: float = 1e-8,
) -> DetectionEvent | None:
    """Propagate one pulse to Bob; at most one detection per frame.

    Each photon independently survives the full link budget; a surviving
    photon picks a basis 50/50 and, in the matched basis, clicks the
    wrong detector with probability detection_error + source_error.  A
    background click occurs with probability Y0 * suppression on a
    uniformly random detector.  If both fire, one is kept at random.
    """
    eta = transmittance(link, include_detector=True)
    err = link.detection_error + source_error

    survivors = int(rng.binomial(pulse.photons, eta)) if pulse.photons else 0
    signal_channel = None
    if survivors >= 1:
        # i.i.d. photons: picking a uniform clicked detector is
        # distribution-identical to drawing one photon's outcome
        bob_basis = int(rng.integers(0, 2))
        if bob_basis == (pulse.polarization.value >> 1):
            bit = pulse.polarization.value & 1
            if rng.random() < err:
                bit ^= 1
        else:
            bit = int(rng.integers(0, 2))
        signal_channel = bob_basis * 2 + bit

    background_channel = None
    if rng.random() < link.background_yield * background_suppression:
        background_channel = int(rng.integers(0, 4))

    if signal_channel is None and background_channel is None:
        return None
    if signal_channel is not None and background_channel is not None:
        use_signal = rng.random() < 0.5
    else:
        use_signal = signal_channel is not None

    if use_signal:
        offset = float(rng.normal(0.0, link.jitter_sigma_s))
    else:
        half = background_suppression * period_s / 2.0
        offset = float(rng.uniform(-half, half))
    return DetectionEvent(
        frame=pulse.frame,
        channel=signal_channel if use_signal else background_channel,
        arrival_offset_s=offset,
        origin="signal" if use_signal else "background",
    )


def _block_sizes(frames: int, block_frames: int) -> Iterator[tuple[int, int]]:
    start = 0
    block = 0
    while start < frames:
        n = min(block_frames, frames - start)
        yield block, n
        start += n
        block += 1


def run(
    source: SourceConfig,
    link: LinkConfig,
    proto: ProtocolConfig,
    frames: int,
    seed: int,
    emit_ttags: bool = False,
    phase_ticks: int = 0,
    throughput_cap_mcps: float | None = 10.0,
    block_frames: int = DEFAULT_BLOCK_FRAMES,
) -> RunResult:
    """Simulate ``frames`` pulses; deterministic for a given seed.

    The summary is identical whether or not a stream is emitted (stream
    offsets are drawn after all summary variates within each block).
    Emitted records are time-ordered; when the record rate exceeds the
    throughput cap the tail is dropped, like a saturated DMA transfer.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    period_s = 1.0 / source.pulse_rate_hz
    period_ticks_f = period_s / TICK_SECONDS
    period_ticks = int(round(period_ticks_f))
    if emit_ttags and abs(period_ticks_f - period_ticks) > 1e-6:
        raise ValueError(
            f"pulse period {period_s} s is not an integer number of {TICK_SECONDS} s ticks"
        )

    means = np.array([source.mu, source.nu1, source.nu2])
    probs = np.array(source.class_probs, dtype=float)
    pol_probs = np.array(source.pol_probs, dtype=float)
    eta = transmittance(link, include_detector=True)
    suppression = link.suppression(source)
    y0_eff = link.background_yield * suppression
    e_eff = link.detection_error + source.source_error
    sigma_ticks = link.jitter_sigma_s / TICK_SECONDS
    # background arrivals land within the gate slice the suppression models
    bg_width = max(1, int(round(suppression * period_ticks))) if emit_ttags else 1

    summary = RunSummary(
        frames=0,
        simulated_s=0.0,
        sent=np.zeros(3, dtype=np.int64),
        detected=np.zeros(3, dtype=np.int64),
        sifted=np.zeros(3, dtype=np.int64),
        errors=np.zeros(3, dtype=np.int64),
    )
    tick_chunks: list[np.ndarray] = []
    chan_chunks: list[np.ndarray] = []
    log_chunks: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []

    base = 0
    for block, n in _block_sizes(frames, block_frames):
        rng = np.random.default_rng(np.random.SeedSequence([seed, block]))

        cls = rng.choice(3, size=n, p=probs)
        pol = rng.choice(4, size=n, p=pol_probs)
        nph = rng.poisson(means[cls])
        surv = rng.binomial(nph, eta)
        bob_basis = rng.integers(0, 2, size=n)
        flip = (rng.random(n) < e_eff).astype(np.int64)
        rand_bit = rng.integers(0, 2, size=n)
        bg = rng.random(n) < y0_eff
        bg_ch = rng.integers(0, 4, size=n)
        pick_signal = rng.random(n) < 0.5

        alice_basis = pol >> 1
        alice_bit = pol & 1
        matched_basis = bob_basis == alice_basis
        sig_bit = np.where(matched_basis, alice_bit ^ flip, rand_bit)
        sig_ch = bob_basis * 2 + sig_bit

        sig_click = surv >= 1
        click = sig_click | bg
        use_sig = sig_click & (~bg | pick_signal)
        channel = np.where(use_sig, sig_ch, bg_ch)

        summary = summary + _count_block(n, source, cls, click, channel, alice_basis, alice_bit)

        if emit_ttags:
            idx = np.nonzero(click)[0]
            n_ev = len(idx)
            jitter = np.rint(rng.normal(0.0, sigma_ticks, size=n_ev)).astype(np.int64)
            bg_off = rng.integers(-(bg_width // 2), (bg_width - 1) // 2 + 1, size=n_ev)
            offs = np.where(use_sig[idx], jitter, bg_off) + phase_ticks
            ticks = (base + idx.astype(np.int64)) * period_ticks + offs
            np.clip(ticks, 0, None, out=ticks)
            order = np.argsort(ticks, kind="stable")
            tick_chunks.append(ticks[order].astype(np.uint64))
            chan_chunks.append(channel[idx][order].astype(np.uint8))
            log_chunks.append((alice_bit.astype(np.uint8), alice_basis.astype(np.uint8), cls.astype(np.uint8)))

        base += n

    stream = None
    alice_log = None
    dropped = 0
    if emit_ttags:
        ticks = np.concatenate(tick_chunks) if tick_chunks else np.empty(0, dtype=np.uint64)
        chans = np.concatenate(chan_chunks) if chan_chunks else np.empty(0, dtype=np.uint8)
        if throughput_cap_mcps is not None:
            cap = int(throughput_cap_mcps * 1e6 * frames * period_s)
            if len(ticks) > cap:
                dropped = len(ticks) - cap
                ticks, chans = ticks[:cap], chans[:cap]
        stream = TimeTagStream(ticks, chans)
        bits = np.concatenate([c[0] for c in log_chunks])
        bases = np.concatenate([c[1] for c in log_chunks])
        classes = np.concatenate([c[2] for c in log_chunks])
        alice_log = AliceLog(
            frame=np.arange(frames, dtype=np.int64), bit=bits, basis=bases, cls=classes
        )

    return RunResult(summary=summary, stream=stream, alice_log=alice_log, dropped_records=dropped)


def _count_block(n, source, cls, click, channel, alice_basis, alice_bit) -> RunSummary:
    sifted_mask = click & ((channel >> 1) == alice_basis)
    error_mask = sifted_mask & ((channel & 1) != alice_bit)
    return RunSummary(
        frames=n,
        simulated_s=n / source.pulse_rate_hz,
        sent=np.bincount(cls, minlength=3),
        detected=np.bincount(cls[click], minlength=3),
        sifted=np.bincount(cls[sifted_mask], minlength=3),
        errors=np.bincount(cls[error_mask], minlength=3),
    )


def estimate_observables(summary: RunSummary) -> ChannelObservables:
    """Empirical gains and error rates, in the decoy module's types.

    Raises when an intensity class was never sent.  Classes with zero
    sifted detections get a NaN error rate; empirical error rates are
    clamped into the model's [0, 0.5] domain.
    """
    if np.any(summary.sent == 0):
        missing = [CLASS_LABELS[i] for i in range(3) if summary.sent[i] == 0]
        raise ValueError(f"undefined observables: no pulses sent for class(es) {missing}")

    def _e(i: int) -> float:
        e = summary.qber_class(i)
        return min(e, 0.5) if e == e else float("nan")

    return ChannelObservables(
        q_mu=summary.gain_class(0),
        q_nu1=summary.gain_class(1),
        q_nu2=summary.gain_class(2),
        e_mu=_e(0),
        e_nu1=_e(1),
        eta=None,
    )


__all__ = [
    "DEFAULT_BLOCK_FRAMES",
    "PulseEmission",
    "DetectionEvent",
    "RunSummary",
    "RunResult",
    "sample_pulse",
    "transmit_detect",
    "run",
    "estimate_observables",
]
