"""Command-line surface: sweeps, simulations, timetag analysis, audits.

Exit codes are a stable contract: 0 success, 2 usage/config error,
3 output I/O failure.  All randomness flows from --seed; when absent a
random seed is drawn and printed so runs stay reproducible.  Output
files are written atomically (temp file + rename).  The environment
variable QKDBENCH_THREADS caps internal parallelism.
"""

from __future__ import annotations

import argparse
import io
import os
import secrets
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import decoy, montecarlo, sidechannel, timetag
from .config import ConfigError, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("QKDBENCH_THREADS", "1")))
    except ValueError:
        return 1


def _write_atomic(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _resolve_seed(args) -> int:
    if args.seed is None:
        seed = secrets.randbits(32)
        print(f"seed = {seed}  (chosen at random; pass --seed to reproduce)")
        return seed
    return args.seed


def _attenuations(args) -> list[float]:
    if args.atten_max < args.atten_min:
        raise ConfigError("--atten-max must be >= --atten-min")
    if args.atten_step <= 0:
        raise ConfigError("--atten-step must be > 0")
    n = int(round((args.atten_max - args.atten_min) / args.atten_step)) + 1
    return [args.atten_min + i * args.atten_step for i in range(n)]


def cmd_sweep(args) -> int:
    source, link, proto = load_config(args.config)
    attens = _attenuations(args)
    reports = decoy.sweep(
        link, attens, source, proto, gain_convention=args.gain_convention, max_workers=_threads()
    )
    if args.format == "csv":
        buf = io.StringIO()
        decoy.write_sweep_csv(reports, buf)
        payload = buf.getvalue()
    else:  # structured text: one key=value block per attenuation
        blocks = []
        for r in reports:
            o, e = r.observables, r.estimates
            blocks.append(
                f"attenuation_db = {r.attenuation_db!r}\n"
                f"Q_mu = {o.q_mu!r}\nQ_nu1 = {o.q_nu1!r}\nQ_nu2 = {o.q_nu2!r}\n"
                f"E_mu = {o.e_mu!r}\nY1_lower = {e.y1_lower!r}\nQ1_lower = {e.q1_lower!r}\n"
                f"e1_upper = {e.e1_upper!r}\nrkr_bps = {r.raw_key_rate_bps!r}\n"
                f"lbskr_bps = {r.secure_key_rate_bps!r}\n"
            )
        payload = "\n".join(blocks)
    _write_atomic(Path(args.out), payload)

    cutoff = next((r.attenuation_db for r in reports if r.qber_cutoff_hit), None)
    if cutoff is None:
        print(f"wrote {len(reports)} rows to {args.out}; QBER cutoff (>{decoy.QBER_CUTOFF}) not reached")
    else:
        print(f"wrote {len(reports)} rows to {args.out}; QBER cutoff (>{decoy.QBER_CUTOFF}) at {cutoff:g} dB")
    return EXIT_OK


def cmd_simulate(args) -> int:
    source, link, proto = load_config(args.config)
    if args.frames < 1:
        raise ConfigError("--frames must be >= 1")
    seed = _resolve_seed(args)
    result = montecarlo.run(
        source,
        link,
        proto,
        frames=args.frames,
        seed=seed,
        emit_ttags=args.emit_ttags,
        phase_ticks=args.phase_ticks,
    )
    out = str(args.out)  # output prefix, suffixes appended
    _write_atomic(Path(out + ".summary.txt"), result.summary.as_text())
    if args.emit_ttags:
        _write_atomic(Path(out + ".ttag"), timetag.encode(result.stream))
        log_path = Path(out + ".alice.csv")
        log_path.parent.mkdir(parents=True, exist_ok=True)
        result.alice_log.to_csv(log_path)
        period = int(round(1.0 / source.pulse_rate_hz / timetag.TICK_SECONDS))
        sidecar = (
            f"period_ticks = {period}\n"
            f"phase_ticks = {args.phase_ticks}\n"
            f"window_ticks = {timetag.window_ticks_from_seconds(link.window_s)}\n"
            f"channels = 0:H 1:V 2:D 3:A\n"
            f"dropped_records = {result.dropped_records}\n"
        )
        _write_atomic(Path(out + ".sidecar.txt"), sidecar)

    obs_model = decoy.channel_observables(source, link, "full-budget")
    s = result.summary
    print(f"frames = {s.frames}, simulated {s.simulated_s:g} s")
    for i, (label, q_model) in enumerate(
        zip(timetag.CLASS_LABELS, (obs_model.q_mu, obs_model.q_nu1, obs_model.q_nu2))
    ):
        q_mc = s.gain_class(i)
        sigma = (q_model * (1 - q_model) / max(int(s.sent[i]), 1)) ** 0.5
        delta = (q_mc - q_model) / sigma if sigma > 0 else float("nan")
        print(f"Q_{label}: mc={q_mc:.6e} model={q_model:.6e} delta={delta:+.2f} sigma")
    e_mc = s.qber_class(0)
    print(f"E_signal: mc={e_mc:.6e} model={obs_model.e_mu:.6e}")
    return EXIT_OK


def cmd_analyze_ttags(args) -> int:
    source, link, proto = load_config(args.config)
    try:
        stream = timetag.load_ttag(args.ttags)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read timetag stream: {exc}") from exc
    if len(stream.detections()) == 0:
        raise ConfigError("no records in timetag stream")
    alice = timetag.AliceLog.from_csv(args.alice_log)
    seed = _resolve_seed(args)

    period = int(round(1.0 / source.pulse_rate_hz / timetag.TICK_SECONDS))
    window = timetag.window_ticks_from_seconds(args.window_ns * 1e-9)
    window = min(window, period)
    phase = timetag.recover_phase(stream, period)
    if phase.low_confidence:
        print(f"warning: low-confidence phase (contrast {phase.contrast:.2f})")
    gated = timetag.gate(stream, period, phase.phase_ticks, window)
    sifted = timetag.sift(alice, gated, period, seed=seed)

    sent = np.bincount(alice.cls, minlength=3)
    det = gated.accepted.detections()
    det_frames = timetag.frame_indices(det.ticks, phase.phase_ticks, period)
    ok = (det_frames >= 0) & (det_frames < len(alice))
    det_cls = alice.cls[det_frames[ok]]
    detected = np.bincount(det_cls, minlength=3)

    if sent.min() == 0:
        raise ConfigError("alice log lacks pulses for at least one intensity class")
    q = detected / sent
    e_mu = sifted.qber_class(0)
    e_nu1 = sifted.qber_class(1)
    if not np.isfinite(e_mu) or not np.isfinite(e_nu1):
        raise ConfigError("not enough sifted detections to estimate error rates")

    obs = decoy.ChannelObservables(
        q_mu=float(q[0]),
        q_nu1=float(q[1]),
        q_nu2=float(q[2]),
        e_mu=min(e_mu, 0.5),
        e_nu1=min(e_nu1, 0.5),
    )
    y0 = decoy.estimate_background_yield(obs, source.mu, source.nu2)
    est = decoy.decoy_estimates(obs, source.mu, source.nu1, y0, link.background_error)
    report = decoy.key_rate_lower_bound(obs, est, proto, proto.signal_pulses_per_s(source))

    duration = len(alice) / source.pulse_rate_hz
    print(f"records = {len(stream)}, gated = {len(gated.accepted)}, rejected = {gated.rejected}")
    print(f"phase_ticks = {phase.phase_ticks}, window_ticks = {window}, collisions = {sifted.collisions}")
    print(f"sifted_rate_cps = {len(sifted.sifted_bits) / duration:.6e}")
    for i, label in enumerate(timetag.CLASS_LABELS):
        print(f"Q_{label} = {q[i]:.6e}  qber_{label} = {sifted.qber_class(i):.6e}")
    print(f"Y0_est = {y0:.6e}")
    print(f"Y1_lower = {est.y1_lower:.6e}  Q1_lower = {est.q1_lower:.6e}  e1_upper = {est.e1_upper:.6e}")
    print(f"lbskr_bps = {report.secure_key_rate_bps:.6e}")
    if args.out:
        text = (
            f"q_mu = {obs.q_mu!r}\nq_nu1 = {obs.q_nu1!r}\nq_nu2 = {obs.q_nu2!r}\n"
            f"e_mu = {obs.e_mu!r}\ne_nu1 = {obs.e_nu1!r}\ny0_est = {y0!r}\n"
            f"y1_lower = {est.y1_lower!r}\nq1_lower = {est.q1_lower!r}\ne1_upper = {est.e1_upper!r}\n"
            f"rkr_bps = {report.raw_key_rate_bps!r}\nlbskr_bps = {report.secure_key_rate_bps!r}\n"
        )
        _write_atomic(Path(args.out), text)
    return EXIT_OK


def _parse_four(text: str, what: str) -> tuple[float, float, float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise ConfigError(f"{what}: expected four comma-separated values, got {text!r}")
    return tuple(float(p) for p in parts)


def cmd_sidechannel(args) -> int:
    synth_requested = args.synth
    if synth_requested and args.profiles:
        raise ConfigError("ambiguous input: give either --profiles or --synth, not both")
    if not synth_requested and not args.profiles:
        raise ConfigError("need an input: --profiles FILE or --synth")

    spatial = args.spatial_bits
    if args.profiles:
        try:
            profiles = sidechannel.load_profiles(args.profiles)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"malformed profiles: {exc}") from exc
        mi = sidechannel.leakage(profiles)
        if args.domain == "temporal":
            budget = sidechannel.LeakageBudget(temporal=mi, spectral=0.0, spatial=spatial)
        else:
            budget = sidechannel.LeakageBudget(temporal=0.0, spectral=mi, spatial=spatial)
    else:
        pedestals = _parse_four(args.pedestals, "--pedestals")
        shifts = tuple(s * 1e-12 for s in _parse_four(args.shifts_ps, "--shifts-ps"))
        try:
            temporal, spectral = sidechannel.synth_profiles(
                fwhm_s=args.fwhm_ps * 1e-12, tbp=args.tbp, ase_pedestal=pedestals, shifts_s=shifts
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        budget = sidechannel.LeakageBudget(
            temporal=sidechannel.leakage(temporal),
            spectral=sidechannel.leakage(spectral),
            spatial=spatial,
        )

    text = budget.as_text()
    print(text, end="")

    if args.sweep_csv:
        row = _pick_sweep_row(args.sweep_csv, args.attenuation_db)
        rkr, lbskr = row
        adjusted = max(0.0, lbskr - rkr * budget.total)
        text += f"lbskr_bps = {lbskr!r}\nleakage_adjusted_bps = {adjusted!r}\n"
        print(f"lbskr_bps = {lbskr:.6e}")
        print(f"leakage_adjusted_bps = {adjusted:.6e}")
    if args.out:
        _write_atomic(Path(args.out), text)
    return EXIT_OK


def _pick_sweep_row(path: str, attenuation_db: float | None) -> tuple[float, float]:
    import csv as _csv

    try:
        with open(path, newline="") as fh:
            reader = _csv.DictReader(fh)
            rows = list(reader)
    except OSError as exc:
        raise ConfigError(f"cannot read sweep CSV: {exc}") from exc
    if not rows:
        raise ConfigError("sweep CSV has no rows")
    if attenuation_db is None:
        row = rows[0]
    else:
        row = min(rows, key=lambda r: abs(float(r["attenuation_db"]) - attenuation_db))
    return float(row["rkr_bps"]), float(row["lbskr_bps"])


def cmd_optimize(args) -> int:
    source, link, proto = load_config(args.config)
    grid = decoy.GridSpec(
        mu_values=tuple(float(x) for x in args.mu_grid.split(",")),
        nu1_values=tuple(float(x) for x in args.nu1_grid.split(",")),
    )
    result = decoy.optimize_intensities(
        link, proto, grid, source_template=source, gain_convention=args.gain_convention
    )
    print(f"mu_opt = {result.mu:g}")
    print(f"nu1_opt = {result.nu1:g}")
    print(f"lbskr_bps = {result.secure_key_rate_bps:.6e}")
    if result.all_zero:
        print("note: rate is zero on the whole grid; reported point is the first grid point")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qkdbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="flat key=value config file")
    common.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("sweep", parents=[common], help="attenuation sweep to CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--atten-min", type=float, default=0.0)
    p.add_argument("--atten-max", type=float, default=40.0)
    p.add_argument("--atten-step", type=float, default=1.0)
    p.add_argument("--gain-convention", choices=decoy.GAIN_CONVENTIONS, default="full-budget")
    p.add_argument("--format", choices=["csv", "text"], default="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo run; optional .ttag emission")
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--emit-ttags", action="store_true")
    p.add_argument("--phase-ticks", type=int, default=37, help="clock phase of emitted ticks")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze-ttags", parents=[common], help="phase recovery, gating, sifting, key rate")
    p.add_argument("--ttags", required=True)
    p.add_argument("--alice-log", required=True)
    p.add_argument("--window-ns", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze_ttags)

    p = sub.add_parser("sidechannel", help="mutual-information leakage audit")
    p.add_argument("--profiles", default=None, help="per-state profile CSV")
    p.add_argument("--domain", choices=["temporal", "spectral"], default="temporal")
    p.add_argument("--synth", action="store_true", help="synthesize Gaussian profiles")
    p.add_argument("--pedestals", default="0,0,0,0", help="per-state ASE floor, fraction of peak")
    p.add_argument("--shifts-ps", default="0,0,0,0", help="per-state temporal shifts, ps")
    p.add_argument("--fwhm-ps", type=float, default=400.0)
    p.add_argument("--tbp", type=float, default=0.56)
    p.add_argument("--spatial-bits", type=float, default=sidechannel.DEFAULT_SPATIAL_LEAKAGE)
    p.add_argument("--sweep-csv", default=None, help="debit the leakage from a sweep row")
    p.add_argument("--attenuation-db", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sidechannel)

    p = sub.add_parser("optimize", parents=[common], help="grid search over signal/decoy intensities")
    p.add_argument("--mu-grid", default="0.25,0.5,0.75,1.0")
    p.add_argument("--nu1-grid", default="0.05,0.1,0.15,0.2")
    p.add_argument("--gain-convention", choices=decoy.GAIN_CONVENTIONS, default="full-budget")
    p.set_defaults(func=cmd_optimize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
