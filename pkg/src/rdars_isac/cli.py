"""Command line entry point: ``rdars {run,sweep,estimate,serve,frame}``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from . import control_link as cl
from .channel_sim import ShadowDraws, UplinkChannel
from .harness import ExperimentSpec, Surface, emit_results, emit_trace, run_experiment
from .localization import Calibration, RangeInputs, estimate_range
from .beam_sweep import sweep as run_sweep

log = logging.getLogger("rdars_isac")


def _endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}")
    return host, int(port)


def cmd_run(args) -> int:
    spec = ExperimentSpec.load(args.scenario, trials=args.trials, seed=args.seed,
                               transport=args.transport)
    result = run_experiment(spec, keep_traces=args.traces is not None)
    if args.out:
        emit_results(result, args.format, args.out)
    if args.traces:
        from pathlib import Path
        d = Path(args.traces)
        d.mkdir(parents=True, exist_ok=True)
        for name, trace in result.traces.items():
            emit_trace(trace, args.format, d / f"{name}.{args.format}")
    print(json.dumps(result.summary))
    return 0


def cmd_sweep(args) -> int:
    spec = ExperimentSpec.load(args.scenario, seed=args.seed, transport=args.transport)
    sc = spec.scenario
    rng = np.random.default_rng([spec.seed, args.trial])
    channel = UplinkChannel(sc, ShadowDraws.draw(rng, sc.channel.shadowing_sigma_db))
    surface = Surface(spec.transport)
    try:
        res = run_sweep(lambda c: channel.rssi_bs(surface.apply(c)), spec.grid, sc.bs_dir,
                        sc.connected_set, sc.geometry, sc.wavelength, repeats=spec.repeats)
    finally:
        surface.close()
    if args.out:
        emit_trace(res, args.format, args.out)
    az, el = res.best.degrees()
    print(json.dumps({"best_az_deg": az, "best_el_deg": el, "best_rssi_dbm": res.best_rssi,
                      "samples": len(res.samples)}))
    return 0


def cmd_estimate(args) -> int:
    inputs = RangeInputs(args.p_connected, args.p_bs, math.radians(args.theta_deg), args.d_br,
                         args.alpha)
    est = estimate_range(inputs, Calibration(args.offset_db))
    print(json.dumps({"d_ur": est.d_ur, "d_ub": est.d_ub, "roots_found": est.roots_found,
                      "ambiguous": est.ambiguous}))
    return 0


def cmd_serve(args) -> int:
    server = cl.DeviceServer(args.bind, drop_rx=args.drop_rx, drop_tx=args.drop_tx, seed=args.seed)
    log.info("surface controller listening on %s:%d", *server.endpoint)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_frame(args) -> int:
    if args.action == "decode":
        f = cl.decode_frame(bytes.fromhex(args.hex))
        doc = {"msg_type": f.msg_type.name, "seq": f.seq, "payload": f.payload.hex()}
        if f.msg_type in (cl.MsgType.ACK, cl.MsgType.NACK):
            doc["echoed_seq"], doc["status"] = f.echoed
        print(json.dumps(doc))
        return 0
    kind = cl.MsgType[args.type]
    if args.payload is not None:
        frame = cl.ControlFrame(kind, args.seq, bytes.fromhex(args.payload))
    elif kind in (cl.MsgType.ACK, cl.MsgType.NACK):
        frame = cl.reply_frame(kind, args.seq, args.status)
    else:
        raise ValueError(f"{kind.name} needs --payload")
    print(cl.encode_frame(frame).hex())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdars", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", help="experiment file (default: shipped field-test scenario)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--transport", help="oracle | udp:<host:port>")

    r = sub.add_parser("run", help="Monte Carlo localisation experiment")
    common(r)
    r.add_argument("--trials", type=int)
    r.add_argument("--traces", metavar="DIR", help="also write each trial's RSSI sweep trace")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="stage 1 only; emit the RSSI map")
    common(s)
    s.add_argument("--trial", type=int, default=0, help="shadowing stream index")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("estimate", help="stage 2 from measured powers")
    e.add_argument("--p-connected", type=float, required=True, help="dBm")
    e.add_argument("--p-bs", type=float, required=True, help="direct-path dBm at the BS")
    e.add_argument("--theta-deg", type=float, required=True)
    e.add_argument("--d-br", type=float, required=True, help="surface-BS distance, m")
    e.add_argument("--alpha", type=float, default=2.0)
    e.add_argument("--offset-db", type=float, default=0.0)
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("serve", help="run the emulated surface controller")
    v.add_argument("--bind", type=_endpoint, default=("127.0.0.1", cl.DEFAULT_PORT))
    v.add_argument("--drop-rx", type=float, default=0.0)
    v.add_argument("--drop-tx", type=float, default=0.0)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_serve)

    f = sub.add_parser("frame", help="encode/decode a control frame as hex")
    fs = f.add_subparsers(dest="action", required=True)
    fe = fs.add_parser("encode")
    fe.add_argument("--type", choices=[m.name for m in cl.MsgType], required=True)
    fe.add_argument("--seq", type=int, required=True)
    fe.add_argument("--payload", help="payload hex")
    fe.add_argument("--status", type=int, default=0, help="ACK/NACK status byte")
    fd = fs.add_parser("decode")
    fd.add_argument("hex")
    f.set_defaults(func=cmd_frame)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # surfaced as one machine-readable line
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
