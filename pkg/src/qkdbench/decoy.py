"""Analytic decoy-state BB84 model.

Channel transmittance, per-class gains and QBER for a Poissonian faint
pulse source, vacuum+weak-decoy bounds on the single-photon yield and
error rate, and the asymptotic secure-key-rate lower bound

    R >= q (N_mu/t) { -Q_mu f(E_mu) H2(E_mu) + Q1 [1 - H2(e1)] }

with the hard cutoff R = 0 once E_mu exceeds 0.11.

Two gain conventions are supported and must be chosen explicitly by
pipelines.  ``attenuation-only`` uses eta = 10^(-attenuation/10) and
reproduces the benchmark 6 dB observables (Q_mu = 1.18e-1 etc.);
``full-budget`` additionally applies the setup loss and detector
efficiency and matches what the Monte Carlo engine simulates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

from .config import LinkConfig, ProtocolConfig, SourceConfig
from .entropy import h2

#: QBER above which the secure rate is forced to zero.
QBER_CUTOFF = 0.11

GAIN_CONVENTIONS = ("attenuation-only", "full-budget")


@dataclass(frozen=True)
class ChannelObservables:
    """Measured or modeled per-class gains and error rates."""

    q_mu: float
    q_nu1: float
    q_nu2: float
    e_mu: float
    e_nu1: float
    eta: float | None = None

    def __post_init__(self):
        for name in ("q_mu", "q_nu1", "q_nu2"):
            q = getattr(self, name)
            if not (0.0 <= q <= 1.0):
                raise ValueError(f"{name}: gain must lie in [0, 1], got {q!r}")
        for name in ("e_mu", "e_nu1"):
            e = getattr(self, name)
            if not (0.0 <= e <= 0.5) and not math.isnan(e):
                raise ValueError(f"{name}: QBER must lie in [0, 0.5], got {e!r}")


@dataclass(frozen=True)
class DecoyEstimates:
    """Single-photon bounds derived from the decoy observables."""

    y1_lower: float
    q1_lower: float
    e1_upper: float
    clamped: bool = False


@dataclass(frozen=True)
class KeyRateReport:
    """Everything the rate pipeline produces for one channel setting."""

    observables: ChannelObservables
    estimates: DecoyEstimates
    raw_key_rate_bps: float
    secure_key_rate_bps: float
    qber_cutoff_hit: bool
    leakage_adjusted_bps: float | None = None
    attenuation_db: float | None = None


def transmittance(link: LinkConfig, include_detector: bool = True) -> float:
    """Overall transmittance: channel + setup loss, optionally detector.

    eta = 10^(-(attenuation + setup_loss)/10) * efficiency.
    """
    eta = 10.0 ** (-(link.attenuation_db + link.setup_loss_db) / 10.0)
    if include_detector:
        eta *= link.detector_efficiency
    return eta


def link_eta(link: LinkConfig, gain_convention: str) -> float:
    """Transmittance under the named gain convention."""
    if gain_convention == "attenuation-only":
        return 10.0 ** (-link.attenuation_db / 10.0)
    if gain_convention == "full-budget":
        return transmittance(link, include_detector=True)
    raise ValueError(f"unknown gain convention {gain_convention!r}; use one of {GAIN_CONVENTIONS}")


def gain(mean_photons: float, eta: float, y0: float) -> float:
    """Detection probability per sent pulse of one intensity class.

    Q = Y0 + 1 - exp(-eta * mean), the threshold-detector gain of a
    Poissonian pulse over a channel with background yield Y0.
    """
    return y0 - math.expm1(-eta * mean_photons)


def qber(mean_photons: float, eta: float, y0: float, e0: float, e_det: float) -> float:
    """Error rate of one intensity class.

    E = [e0 Y0 + e_det (1 - exp(-eta*mean))] / Q: background errors are
    random (e0), transmitted photons err at the intrinsic rate e_det.
    """
    q = gain(mean_photons, eta, y0)
    return (e0 * y0 - e_det * math.expm1(-eta * mean_photons)) / q


def channel_observables(source: SourceConfig, link: LinkConfig, gain_convention: str) -> ChannelObservables:
    """Model-generated observables for a source/link pair.

    The background yield is scaled by the configured gating suppression
    factor (set ``background_suppression = 1`` to disable).
    """
    eta = link_eta(link, gain_convention)
    y0 = link.background_yield * link.suppression(source)
    e0, edet = link.background_error, link.detection_error
    return ChannelObservables(
        q_mu=gain(source.mu, eta, y0),
        q_nu1=gain(source.nu1, eta, y0),
        q_nu2=gain(source.nu2, eta, y0),
        e_mu=qber(source.mu, eta, y0, e0, edet),
        e_nu1=qber(source.nu1, eta, y0, e0, edet),
        eta=eta,
    )


def _y1_lower_raw(obs: ChannelObservables, mu: float, nu1: float, y0: float) -> float:
    if not mu > nu1 > 0:
        raise ValueError(f"degenerate intensities: require mu > nu1 > 0, got mu={mu}, nu1={nu1}")
    bracket = (
        obs.q_nu1 * math.exp(nu1)
        - obs.q_mu * math.exp(mu) * nu1**2 / mu**2
        - (mu**2 - nu1**2) / mu**2 * y0
    )
    return mu / (mu * nu1 - nu1**2) * bracket


def y1_lower(obs: ChannelObservables, mu: float, nu1: float, y0: float) -> float:
    """Vacuum+weak-decoy lower bound on the single-photon yield Y1.

    Y1 >= mu/(mu*nu1 - nu1^2) * [ Q_nu1 e^nu1 - Q_mu e^mu nu1^2/mu^2
                                  - (mu^2 - nu1^2)/mu^2 * Y0 ]
    clamped into [0, 1].
    """
    return min(max(_y1_lower_raw(obs, mu, nu1, y0), 0.0), 1.0)


def e1_upper(obs: ChannelObservables, estimates: DecoyEstimates, nu1: float, y0: float, e0: float) -> float:
    """Upper bound on the single-photon error rate e1.

    e1 <= [E_nu1 Q_nu1 e^nu1 - e0 Y0] / (Y1_lower * nu1), clamped into
    [0, 0.5].  Undefined when the yield bound is zero.
    """
    if not estimates.y1_lower > 0:
        raise ValueError("undefined bound: e1_upper requires Y1_lower > 0")
    raw = (obs.e_nu1 * obs.q_nu1 * math.exp(nu1) - e0 * y0) / (estimates.y1_lower * nu1)
    return min(max(raw, 0.0), 0.5)


def decoy_estimates(obs: ChannelObservables, mu: float, nu1: float, y0: float, e0: float = 0.5) -> DecoyEstimates:
    """Chain the single-photon bounds; Q1_lower = mu e^-mu Y1_lower."""
    y1l_raw = _y1_lower_raw(obs, mu, nu1, y0)
    y1l = min(max(y1l_raw, 0.0), 1.0)
    if y1l > 0:
        e1u_raw = (obs.e_nu1 * obs.q_nu1 * math.exp(nu1) - e0 * y0) / (y1l * nu1)
        e1u = min(max(e1u_raw, 0.0), 0.5)
    else:
        e1u_raw = 0.5
        e1u = 0.5  # no usable single-photon signal; maximally pessimistic
    clamped = (y1l != y1l_raw) or (y1l > 0 and e1u != e1u_raw)
    return DecoyEstimates(
        y1_lower=y1l,
        q1_lower=mu * math.exp(-mu) * y1l,
        e1_upper=e1u,
        clamped=clamped,
    )


def estimate_background_yield(obs: ChannelObservables, mu: float, nu2: float, conservative: bool = False) -> float:
    """Estimate Y0 from the decoy-2 gain.

    decoy 2 is not exactly vacuum, so its gain carries a residual-signal
    term: Y0 ~= Q_nu2 - nu2 * eta.  eta is inverted from the signal gain
    (one refinement pass).  ``conservative`` returns Q_nu2 unchanged,
    which can only overestimate the background.
    """
    if conservative or nu2 == 0.0:
        return obs.q_nu2
    eta_est = -math.log(max(1.0 - obs.q_mu, 1e-300)) / mu
    y0_est = max(0.0, obs.q_nu2 - nu2 * eta_est)
    eta_est = -math.log(max(1.0 - obs.q_mu + y0_est, 1e-300)) / mu
    return max(0.0, obs.q_nu2 - nu2 * eta_est)


def key_rate_lower_bound(
    obs: ChannelObservables,
    estimates: DecoyEstimates,
    proto: ProtocolConfig,
    signal_pulses_per_s: float,
    f_ec: Callable[[float], float] | None = None,
    attenuation_db: float | None = None,
) -> KeyRateReport:
    """Asymptotic secure-key-rate lower bound in bits per second.

    R = max(0, q (N_mu/t) [ -Q_mu f(E_mu) H2(E_mu) + Q1_lower (1 - H2(e1_upper)) ])

    forced to zero when E_mu > 0.11.  ``f_ec`` overrides the constant
    error-correction efficiency from the protocol config.
    """
    q = proto.sifting_q
    rate = q * signal_pulses_per_s
    raw = rate * obs.q_mu
    f_val = f_ec(obs.e_mu) if f_ec is not None else proto.error_correction_f
    cutoff = obs.e_mu > QBER_CUTOFF
    if cutoff:
        secure = 0.0
    else:
        secure = rate * (
            -obs.q_mu * f_val * h2(obs.e_mu) + estimates.q1_lower * (1.0 - h2(estimates.e1_upper))
        )
        secure = max(secure, 0.0)
    return KeyRateReport(
        observables=obs,
        estimates=estimates,
        raw_key_rate_bps=raw,
        secure_key_rate_bps=secure,
        qber_cutoff_hit=cutoff,
        attenuation_db=attenuation_db,
    )


def evaluate_link(
    source: SourceConfig,
    link: LinkConfig,
    proto: ProtocolConfig,
    gain_convention: str,
    attenuation_db: float | None = None,
) -> KeyRateReport:
    """Full analytic chain for one link setting: observables -> bounds -> rate."""
    if attenuation_db is not None:
        link = replace(link, attenuation_db=attenuation_db)
    obs = channel_observables(source, link, gain_convention)
    y0 = link.background_yield * link.suppression(source)
    est = decoy_estimates(obs, source.mu, source.nu1, y0, link.background_error)
    return key_rate_lower_bound(
        obs, est, proto, proto.signal_pulses_per_s(source), attenuation_db=link.attenuation_db
    )


def sweep(
    link: LinkConfig,
    attenuations_db: Sequence[float],
    source: SourceConfig,
    proto: ProtocolConfig,
    gain_convention: str = "full-budget",
    max_workers: int = 1,
) -> list[KeyRateReport]:
    """Evaluate the analytic chain at each attenuation (ascending order).

    Points are independent; with ``max_workers > 1`` they are evaluated
    in a thread pool, output order staying deterministic.
    """
    attens = list(attenuations_db)
    if any(b < a for a, b in zip(attens, attens[1:])):
        raise ValueError("attenuations must be sorted ascending")
    if max_workers > 1 and len(attens) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(
                pool.map(lambda a: evaluate_link(source, link, proto, gain_convention, a), attens)
            )
    return [evaluate_link(source, link, proto, gain_convention, a) for a in attens]


SWEEP_CSV_HEADER = [
    "attenuation_db",
    "Q_mu",
    "Q_nu1",
    "Q_nu2",
    "E_mu",
    "Y1_lower",
    "Q1_lower",
    "e1_upper",
    "rkr_bps",
    "lbskr_bps",
]


def write_sweep_csv(reports: Iterable[KeyRateReport], fileobj) -> None:
    """Write sweep results with the fixed column order of SWEEP_CSV_HEADER."""
    writer = csv.writer(fileobj)
    writer.writerow(SWEEP_CSV_HEADER)
    for r in reports:
        o, e = r.observables, r.estimates
        writer.writerow(
            [
                r.attenuation_db,
                f"{o.q_mu:.8e}",
                f"{o.q_nu1:.8e}",
                f"{o.q_nu2:.8e}",
                f"{o.e_mu:.8e}",
                f"{e.y1_lower:.8e}",
                f"{e.q1_lower:.8e}",
                f"{e.e1_upper:.8e}",
                f"{r.raw_key_rate_bps:.6e}",
                f"{r.secure_key_rate_bps:.6e}",
            ]
        )


@dataclass(frozen=True)
class GridSpec:
    """Search grid for intensity optimization; nu1 values above mu are skipped."""

    mu_values: tuple[float, ...]
    nu1_values: tuple[float, ...]

    def points(self):
        for mu in sorted(self.mu_values):
            for nu1 in sorted(self.nu1_values):
                if 0.0 < nu1 < mu <= 1.0:
                    yield mu, nu1


@dataclass(frozen=True)
class OptimizeResult:
    mu: float
    nu1: float
    secure_key_rate_bps: float
    all_zero: bool


def optimize_intensities(
    link: LinkConfig,
    proto: ProtocolConfig,
    grid: GridSpec,
    source_template: SourceConfig | None = None,
    gain_convention: str = "full-budget",
) -> OptimizeResult:
    """Grid search for the signal/decoy intensities maximizing the rate.

    decoy 2 is held at exact vacuum.  Ties break toward smaller mu (the
    scan is ascending and only strict improvements replace the argmax).
    When the rate is zero everywhere the first grid point is reported
    with ``all_zero`` set.
    """
    if source_template is None:
        source_template = SourceConfig()
    best: tuple[float, float, float] | None = None
    for mu, nu1 in grid.points():
        src = replace(source_template, mu=mu, nu1=nu1, nu2=0.0)
        report = evaluate_link(src, link, proto, gain_convention)
        r = report.secure_key_rate_bps
        if best is None or r > best[2]:
            best = (mu, nu1, r)
    if best is None:
        raise ValueError("empty intensity grid")
    return OptimizeResult(mu=best[0], nu1=best[1], secure_key_rate_bps=best[2], all_zero=best[2] == 0.0)


__all__ = [
    "QBER_CUTOFF",
    "GAIN_CONVENTIONS",
    "ChannelObservables",
    "DecoyEstimates",
    "KeyRateReport",
    "transmittance",
    "link_eta",
    "gain",
    "qber",
    "channel_observables",
    "y1_lower",
    "e1_upper",
    "decoy_estimates",
    "estimate_background_yield",
    "key_rate_lower_bound",
    "evaluate_link",
    "sweep",
    "SWEEP_CSV_HEADER",
    "write_sweep_csv",
    "GridSpec",
    "OptimizeResult",
    "optimize_intensities",
]
