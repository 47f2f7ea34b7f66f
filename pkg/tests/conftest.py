import pytest

from qkdbench.config import LinkConfig, ProtocolConfig, SourceConfig

# The 6 dB benchmark point every anchor test refers to: signal 0.5,
# decoy 0.066, near-vacuum 0.002 photons/pulse, background yield
# 5.58e-4, intrinsic detection error 7.9e-3, f = 1.16.
BENCH6DB_KEYS = {
    "mu": 0.5,
    "nu1": 0.066,
    "nu2": 0.002,
    "attenuation_db": 6.0,
    "setup_loss_db": 2.0,
    "detector_efficiency": 0.5,
    "background_yield": 5.58e-4,
    "detection_error": 7.9e-3,
    "background_suppression": 1.0,
    "error_correction_f": 1.16,
    "signal_pulses": 1e8,
    "duration_s": 1.0,
}


@pytest.fixture
def bench6db():
    source = SourceConfig(mu=0.5, nu1=0.066, nu2=0.002)
    link = LinkConfig(background_suppression=1.0)
    proto = ProtocolConfig(signal_pulses=1e8, duration_s=1.0)
    return source, link, proto


@pytest.fixture
def bench_config_file(tmp_path):
    path = tmp_path / "bench6db.cfg"
    path.write_text("".join(f"{k} = {v}\n" for k, v in BENCH6DB_KEYS.items()))
    return path
