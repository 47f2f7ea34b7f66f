"""Domain types, configuration schema and validation.

A run is described by three immutable configs:

* :class:`SourceConfig` -- the faint pulse source (intensity classes,
  state probabilities, pulse shape, polarization imperfections).
* :class:`LinkConfig`   -- the optical channel and receiver (losses,
  detector efficiency, background yield, jitter, gating window).
* :class:`ProtocolConfig` -- protocol bookkeeping (sifting factor,
  error-correction efficiency, transmission duration, signal pulse count).

Configs are loaded from a flat ``key = value`` text file (one key per
line, ``#`` comments allowed, no sections).  Every key, its unit and its
default are listed in :data:`CONFIG_SCHEMA`.  Unknown keys are rejected.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from pathlib import Path


class ConfigError(ValueError):
    """Raised for unparseable config files or invariant violations."""


class Polarization(enum.Enum):
    """The four BB84 polarization states.

    H/V span the rectilinear basis (Z), D/A the diagonal basis (X).
    """

    H = 0
    V = 1
    D = 2
    A = 3

    @property
    def basis(self) -> str:
        return "Z" if self in (Polarization.H, Polarization.V) else "X"

    @property
    def bit(self) -> int:
        return self.value % 2


@dataclass(frozen=True)
class IntensityClass:
    """One intensity level of the source: a label and its mean photon number."""

    label: str
    mean_photons: float

    def __post_init__(self):
        if self.label not in ("signal", "decoy1", "decoy2"):
            raise ConfigError(f"unknown intensity class label {self.label!r}")
        if not (self.mean_photons >= 0):
            raise ConfigError(f"{self.label}: mean photon number must be >= 0")


@dataclass(frozen=True)
class SourceConfig:
    """Faint pulse source parameters."""

    pulse_rate_hz: float = 1e8
    mu: float = 0.5
    nu1: float = 0.125
    nu2: float = 0.0
    p_mu: float = 0.8
    p_nu1: float = 0.15
    p_nu2: float = 0.05
    pol_probs: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    extinction_ratio_db: float = 24.0
    degree_of_polarization: float = 0.9968
    pulse_fwhm_s: float = 400e-12
    time_bandwidth_product: float = 0.56

    @property
    def classes(self) -> tuple[IntensityClass, IntensityClass, IntensityClass]:
        return (
            IntensityClass("signal", self.mu),
            IntensityClass("decoy1", self.nu1),
            IntensityClass("decoy2", self.nu2),
        )

    @property
    def class_probs(self) -> tuple[float, float, float]:
        return (self.p_mu, self.p_nu1, self.p_nu2)

    @property
    def source_error(self) -> float:
        """Intrinsic polarization error from finite degree of polarization.

        The depolarized fraction (1 - DOP) lands in the wrong output port
        half the time.
        """
        return (1.0 - self.degree_of_polarization) / 2.0


@dataclass(frozen=True)
class LinkConfig:
    """Channel and receiver parameters."""

    attenuation_db: float = 6.0
    setup_loss_db: float = 2.0
    detector_efficiency: float = 0.5
    background_yield: float = 5.58e-4
    background_error: float = 0.5
    detection_error: float = 7.9e-3
    jitter_sigma_s: float = 212e-12
    window_s: float = 1e-9
    background_suppression: float | None = None

    def suppression(self, source: SourceConfig) -> float:
        """Effective background suppression of the software gate.

        Defaults to window / pulse period when not set explicitly.
        """
        if self.background_suppression is not None:
            return self.background_suppression
        return self.window_s * source.pulse_rate_hz


@dataclass(frozen=True)
class ProtocolConfig:
    """Protocol bookkeeping for key-rate normalization."""

    sifting_q: float = 0.5
    error_correction_f: float = 1.16
    duration_s: float = 1.0
    signal_pulses: float | None = None

    def signal_pulses_per_s(self, source: SourceConfig) -> float:
        """N_mu / t; defaults to p_mu * pulse rate when N_mu is unset."""
        if self.signal_pulses is not None:
            return self.signal_pulses / self.duration_s
        return source.p_mu * source.pulse_rate_hz


# key -> (section, field, unit, documented default)
CONFIG_SCHEMA: dict[str, tuple[str, str, str, str]] = {
    "pulse_rate_hz": ("source", "pulse_rate_hz", "Hz", "1e8"),
    "mu": ("source", "mu", "photons/pulse", "0.5"),
    "nu1": ("source", "nu1", "photons/pulse", "0.125"),
    "nu2": ("source", "nu2", "photons/pulse", "0 (or mu*10^(-ER/10) when extinction_ratio_db is given)"),
    "p_mu": ("source", "p_mu", "probability", "0.8"),
    "p_nu1": ("source", "p_nu1", "probability", "0.15"),
    "p_nu2": ("source", "p_nu2", "probability", "0.05"),
    "p_pol_h": ("source", "pol_probs:0", "probability", "0.25"),
    "p_pol_v": ("source", "pol_probs:1", "probability", "0.25"),
    "p_pol_d": ("source", "pol_probs:2", "probability", "0.25"),
    "p_pol_a": ("source", "pol_probs:3", "probability", "0.25"),
    "extinction_ratio_db": ("source", "extinction_ratio_db", "dB", "24"),
    "degree_of_polarization": ("source", "degree_of_polarization", "fraction", "0.9968"),
    "pulse_fwhm_s": ("source", "pulse_fwhm_s", "s", "400e-12"),
    "time_bandwidth_product": ("source", "time_bandwidth_product", "1", "0.56"),
    "attenuation_db": ("link", "attenuation_db", "dB", "6"),
    "setup_loss_db": ("link", "setup_loss_db", "dB", "2"),
    "detector_efficiency": ("link", "detector_efficiency", "fraction", "0.5"),
    "background_yield": ("link", "background_yield", "probability/pulse", "5.58e-4"),
    "background_error": ("link", "background_error", "fraction", "0.5"),
    "detection_error": ("link", "detection_error", "fraction", "7.9e-3"),
    "jitter_sigma_s": ("link", "jitter_sigma_s", "s", "212e-12"),
    "window_s": ("link", "window_s", "s", "1e-9"),
    "background_suppression": ("link", "background_suppression", "fraction", "window_s * pulse_rate_hz"),
    "sifting_q": ("protocol", "sifting_q", "fraction", "0.5"),
    "error_correction_f": ("protocol", "error_correction_f", "1", "1.16"),
    "duration_s": ("protocol", "duration_s", "s", "1.0"),
    "signal_pulses": ("protocol", "signal_pulses", "count", "p_mu * pulse_rate_hz * duration_s"),
}


def _parse_kv(text: str) -> dict[str, float]:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = float(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: not a number: {val!r}") from exc
    return values


def load_config(path: str | Path) -> tuple[SourceConfig, LinkConfig, ProtocolConfig]:
    """Load and validate configs from a flat key-value file.

    Missing keys take their documented defaults.  When ``nu2`` is absent
    but ``extinction_ratio_db`` is given, the decoy-2 intensity is derived
    as the signal leaking through the OFF-state modulator:
    ``nu2 = mu * 10^(-ER/10)``.

    Raises :class:`ConfigError` on parse failure or any invariant
    violation (the message names the violated rule).
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    values = _parse_kv(path.read_text())
    return build_configs(values)


def build_configs(values: dict[str, float]) -> tuple[SourceConfig, LinkConfig, ProtocolConfig]:
    """Assemble validated configs from a flat key-value mapping."""
    unknown = set(values) - set(CONFIG_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")

    by_section: dict[str, dict[str, float]] = {"source": {}, "link": {}, "protocol": {}}
    pol = list(SourceConfig.pol_probs)
    pol_given = False
    for key, val in values.items():
        section, attr, _, _ = CONFIG_SCHEMA[key]
        if attr.startswith("pol_probs:"):
            pol[int(attr.split(":")[1])] = val
            pol_given = True
        else:
            by_section[section][attr] = val

    src_kw = by_section["source"]
    if pol_given:
        src_kw["pol_probs"] = tuple(pol)
    if "nu2" not in src_kw and "extinction_ratio_db" in src_kw:
        mu = src_kw.get("mu", SourceConfig.mu)
        src_kw["nu2"] = mu * 10.0 ** (-src_kw["extinction_ratio_db"] / 10.0)

    source = SourceConfig(**src_kw)
    link = LinkConfig(**by_section["link"])
    proto = ProtocolConfig(**by_section["protocol"])

    violations = validate(source, link, proto)
    if violations:
        raise ConfigError("; ".join(violations))
    return source, link, proto


def validate(source: SourceConfig, link: LinkConfig, proto: ProtocolConfig) -> list[str]:
    """Check every config invariant; return a list of violation messages.

    Total on any finite numeric input: violations are returned as data,
    never raised.  An empty list means all invariants hold.
    """
    v: list[str] = []

    if not source.pulse_rate_hz > 0:
        v.append("pulse_rate_hz: must be > 0")
    for cls_label, mean in (("mu", source.mu), ("nu1", source.nu1), ("nu2", source.nu2)):
        if not mean >= 0:
            v.append(f"{cls_label}: mean photon number must be >= 0")
    if not (source.mu > source.nu1 > source.nu2 >= 0):
        v.append("intensity ordering: require mu > nu1 > nu2 >= 0")
    probs = source.class_probs
    if any(not (0 <= p <= 1) for p in probs):
        v.append("class probabilities: each must lie in [0, 1]")
    if abs(sum(probs) - 1.0) > 1e-12:
        v.append(f"class probabilities: p_mu + p_nu1 + p_nu2 must sum to 1 (got {sum(probs)!r})")
    if any(not (0 <= p <= 1) for p in source.pol_probs):
        v.append("polarization probabilities: each must lie in [0, 1]")
    if abs(sum(source.pol_probs) - 1.0) > 1e-12:
        v.append("polarization probabilities: must sum to 1")
    if not source.extinction_ratio_db > 0:
        v.append("extinction_ratio_db: must be > 0 dB")
    if not (0 < source.degree_of_polarization <= 1):
        v.append("degree_of_polarization: must lie in (0, 1]")
    if not source.pulse_fwhm_s > 0:
        v.append("pulse_fwhm_s: must be > 0")
    if not source.time_bandwidth_product >= 0.44:
        v.append("time_bandwidth_product: below the transform limit 0.44")

    if not link.attenuation_db >= 0:
        v.append("attenuation_db: must be >= 0")
    if not link.setup_loss_db >= 0:
        v.append("setup_loss_db: must be >= 0")
    for name, frac in (
        ("detector_efficiency", link.detector_efficiency),
        ("background_yield", link.background_yield),
        ("background_error", link.background_error),
        ("detection_error", link.detection_error),
    ):
        if not (0 <= frac <= 1):
            v.append(f"{name}: must lie in [0, 1]")
    if link.background_suppression is not None and not (0 <= link.background_suppression <= 1):
        v.append("background_suppression: must lie in [0, 1]")
    if not link.jitter_sigma_s >= 0:
        v.append("jitter_sigma_s: must be >= 0")
    if not link.window_s > 0:
        v.append("window_s: must be > 0")
    if source.pulse_rate_hz > 0 and link.window_s > 1.0 / source.pulse_rate_hz * (1 + 1e-12):
        v.append("window_s: gating window must not exceed the pulse period")

    if not (0 < proto.sifting_q <= 1):
        v.append("sifting_q: must lie in (0, 1]")
    if not proto.error_correction_f >= 1:
        v.append("error_correction_f: must be >= 1")
    if not proto.duration_s > 0:
        v.append("duration_s: must be > 0")
    if proto.signal_pulses is not None and not proto.signal_pulses > 0:
        v.append("signal_pulses: must be > 0 when given")

    return v


def dump_config(source: SourceConfig, link: LinkConfig, proto: ProtocolConfig) -> str:
    """Serialize configs back to the flat key-value format.

    Round-trips exactly: ``build_configs`` on the parsed output yields
    configs equal to the inputs.
    """
    lines = ["# qkdbench configuration (flat key = value)"]
    for key, (section, attr, unit, _) in CONFIG_SCHEMA.items():
        obj = {"source": source, "link": link, "protocol": proto}[section]
        if attr.startswith("pol_probs:"):
            val = obj.pol_probs[int(attr.split(":")[1])]
        else:
            val = getattr(obj, attr)
        if val is None:
            continue
        lines.append(f"{key} = {val!r}  # {unit}")
    return "\n".join(lines) + "\n"


def replace_config(cfg, **changes):
    """dataclasses.replace passthrough, re-exported for callers."""
    return replace(cfg, **changes)


__all__ = [
    "ConfigError",
    "Polarization",
    "IntensityClass",
    "SourceConfig",
    "LinkConfig",
    "ProtocolConfig",
    "CONFIG_SCHEMA",
    "load_config",
    "build_configs",
    "validate",
    "dump_config",
    "replace_config",
]
