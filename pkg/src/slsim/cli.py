"""Command-line front end: device roles, the RF-simulator relay, and sweeps."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from slsim.config import SimConfig, load_config
from slsim.harness import (
    ATTEN_CLIP_LEVEL,
    ATTEN_NOISE_FLOOR_DBFS,
    ATTEN_SWEEP_MCS,
    ATTEN_SWEEP_N_PRB,
    DEFAULT_ATTEN_LIST,
    atten_csv,
    bler_csv,
    run_nearby,
    run_syncref,
    sweep_attenuation,
    sweep_bler,
    unit_sim,
)
from slsim.rfsim import ChannelModel, RfSimServer, SocketEndpoint


def _endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _load_sim_config(args) -> SimConfig:
    config = load_config(args.config) if args.config else SimConfig()
    if getattr(args, "seed", None) is not None:
        config = config.with_overrides(seed=args.seed)
    if getattr(args, "slots", None) is not None:
        config = config.with_overrides(data_slots=args.slots)
    return config


def _channel_model(args) -> ChannelModel:
    return ChannelModel(
        attenuation_db=args.atten,
        snr_db=args.snr,
        noise_floor_dbfs=args.noise_floor,
        cfo_hz=args.cfo,
        delay_samples=args.delay,
        clip_level=args.clip,
        seed=args.seed if args.seed is not None else 0,
    )


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key=value configuration file")
    p.add_argument("--seed", type=int, help="master seed override")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--atten", type=float, default=0.0, help="attenuation in dB")
    p.add_argument("--snr", type=float, default=None,
                   help="calibrated per-block SNR in dB")
    p.add_argument("--noise-floor", type=float, default=None,
                   help="fixed noise floor in dBFS")
    p.add_argument("--cfo", type=float, default=0.0, help="frequency offset in Hz")
    p.add_argument("--delay", type=int, default=0, help="delay in samples")
    p.add_argument("--clip", type=float, default=None,
                   help="hard clip level for I and Q")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="slsim",
        description="Sidelink mode-2 physical-layer lab: sync and data chains "
                    "over a software RF link.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("syncref", help="transmit sync blocks and data traffic")
    _add_common(p)
    p.add_argument("--endpoint", required=True, help="rfsim server host:port")
    p.add_argument("--slots", type=int, help="data slots to transmit")
    p.add_argument("--tb-file", type=Path,
                   help="raw bytes to carry as payload (seeded PRNG otherwise)")

    p = sub.add_parser("nearby", help="synchronize and decode data traffic")
    _add_common(p)
    p.add_argument("--endpoint", required=True, help="rfsim server host:port")
    p.add_argument("--slots", type=int, help=argparse.SUPPRESS)

    p = sub.add_parser("rfsim-server", help="relay IQ frames between two devices")
    _add_common(p)
    _add_model_flags(p)
    p.add_argument("--port", type=int, default=4043)
    p.add_argument("--sample-rate", type=float, default=30.72e6)

    p = sub.add_parser("sweep-bler", help="error rate versus SNR per MCS")
    _add_common(p)
    p.add_argument("--mcs", type=_int_list, default=[0, 5, 9])
    p.add_argument("--snr", type=_float_list, required=True,
                   help="comma-separated SNR points in dB")
    p.add_argument("--slots", type=int, default=1000, help="slots per point")
    p.add_argument("--transport", choices=("inproc", "socket"), default="inproc")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, help="CSV output path (default stdout)")

    p = sub.add_parser("sweep-atten", help="link quality versus attenuation")
    _add_common(p)
    p.add_argument("--atten", type=_float_list, default=DEFAULT_ATTEN_LIST)
    p.add_argument("--slots", type=int, default=200, help="data slots per point")
    p.add_argument("--noise-floor", type=float, default=ATTEN_NOISE_FLOOR_DBFS)
    p.add_argument("--mcs", type=int, default=ATTEN_SWEEP_MCS)
    p.add_argument("--n-prb", type=int, default=ATTEN_SWEEP_N_PRB)
    p.add_argument("--clip-below", type=float, default=None,
                   help="enable clipping for attenuations below this value")
    p.add_argument("--clip-level", type=float, default=ATTEN_CLIP_LEVEL)
    p.add_argument("--transport", choices=("inproc", "socket"), default="inproc")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, help="CSV output path (default stdout)")

    p = sub.add_parser("unit-sim", help="run per-channel loopback checks")
    _add_common(p)

    args = parser.parse_args(argv)

    if args.command == "syncref":
        config = _load_sim_config(args)
        if args.tb_file:
            config = config.with_overrides(tb_file=str(args.tb_file))
        host, port = _endpoint(args.endpoint)
        endpoint = SocketEndpoint(host, port)
        try:
            sent = run_syncref(endpoint, config)
        except OSError as exc:
            print(f"session abort: {exc}", file=sys.stderr)
            return 1
        print(f"transmitted {sent} slots")
        return 0

    if args.command == "nearby":
        config = _load_sim_config(args)
        host, port = _endpoint(args.endpoint)
        endpoint = SocketEndpoint(host, port)
        try:
            report = run_nearby(endpoint, config)
        except OSError as exc:
            print(f"session abort: {exc}", file=sys.stderr)
            return 1
        if not report.synchronized:
            print("never synchronized")
            return 2
        stats = report.stats
        print(f"synchronized at dfn={report.current.dfn} slot={report.current.slot} "
              f"(cfo {report.cfo_hz:+.1f} Hz)")
        print(f"ssb slots seen: {stats.ssb_count}, "
              f"ssb rsrp: {stats.ssb_rsrp_dbfs:.2f} dBFS")
        if stats.received_count:
            print(f"pssch: {stats.decoded_count}/{stats.received_count} decoded, "
                  f"bler {stats.bler:.3f}, rsrp {stats.pssch_rsrp_dbfs:.2f} dBFS")
        return 0

    if args.command == "rfsim-server":
        model = _channel_model(args)
        server = RfSimServer(model, args.sample_rate, port=args.port).start()
        host, port = server.endpoint
        print(f"rfsim relay listening on {host}:{port}")
        try:
            import time
            while True:
                time.sleep(1.0)
        except KeyboardInterrupt:
            server.close()
        return 0

    if args.command == "sweep-bler":
        config = _load_sim_config(args)
        points = sweep_bler(config, args.mcs, args.snr, args.slots,
                            transport=args.transport, jobs=args.jobs)
        csv = bler_csv(points)
        if args.out:
            args.out.write_text(csv)
        else:
            sys.stdout.write(csv)
        return 0

    if args.command == "sweep-atten":
        config = _load_sim_config(args)
        points = sweep_attenuation(config, args.atten, args.slots,
                                   noise_floor_dbfs=args.noise_floor,
                                   mcs=args.mcs, clip_below=args.clip_below,
                                   clip_level=args.clip_level, n_prb=args.n_prb,
                                   transport=args.transport, jobs=args.jobs)
        csv = atten_csv(points)
        if args.out:
            args.out.write_text(csv)
        else:
            sys.stdout.write(csv)
        return 0

    if args.command == "unit-sim":
        config = _load_sim_config(args)
        results = unit_sim(config)
        failed = False
        for name, ok in results.items():
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
            failed |= not ok
        return 1 if failed else 0

    return 1


if __name__ == "__main__":
    sys.exit(main())
