"""ringwatch command line.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import socket
import sys
import threading
from pathlib import Path

from .. import __version__
from ..evalkit import MetricsReport, emit_report, evaluate, mean_pose_baseline, run_ablations, run_louo
from ..model import build
from ..pipeline import (
    CalibrationError,
    CalibrationProfile,
    DatasetFormatError,
    NormalizationSpec,
    SignalTooShortError,
    read_dataset,
    save_windows,
    session_calibration,
    split,
    windows_from_sessions,
    write_dataset,
)
from ..synthhand import FINGERS, GESTURE_NAMES, generate_dataset
from ..train import CheckpointError, load_checkpoint, train_model
from ..train.trainer import format_epoch
from . import config as C

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3

logger = logging.getLogger("ringwatch")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out(msg: str) -> None:
    print(msg, flush=True)


def _config(args) -> dict:
    cfg = C.load_config(args.config, args.profile)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
        cfg["model"]["seed"] = args.seed
        cfg["train"]["seed"] = args.seed
    return cfg


def _load_sessions(path: Path, users=None):
    if not Path(path).is_dir():
        raise DataError(f"dataset directory {path} does not exist")
    return read_dataset(Path(path), users)


def _windows(cfg: dict, sessions):
    return windows_from_sessions(sessions, NormalizationSpec(), cfg["pipeline"]["window"], cfg["pipeline"]["step"])


# -- subcommands ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise UsageError(f"{out} exists and is not empty (use --force)")
    data = cfg["data"]
    n_users = args.users or data["n_users"]
    reps = args.reps or data["trials_per_gesture"]
    gestures = args.gestures.split(",") if args.gestures else (data["gestures"] or list(GESTURE_NAMES))
    unknown = set(gestures) - set(GESTURE_NAMES)
    if unknown:
        raise UsageError(f"unknown gestures {sorted(unknown)}")
    sessions = generate_dataset(n_users, reps, cfg["seed"], tuple(gestures), C.simulator_config(cfg))
    manifest = write_dataset(sessions, out, seed=cfg["seed"])
    n_windows = len(_windows(cfg, sessions))
    _out(f"generated {manifest['n_users']} users, {manifest['n_trials']} trials, {n_windows} windows -> {out}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    cfg = _config(args)
    sessions = _load_sessions(args.data)
    windows = _windows(cfg, sessions)
    out = Path(args.out) if args.out else Path(args.data) / "windows.w2f"
    save_windows(windows, out, NormalizationSpec())
    calib_dir = Path(args.data) / "calibration"
    calib_dir.mkdir(exist_ok=True)
    for s in sessions:
        (calib_dir / f"{s.user.user_id}.json").write_text(json.dumps(session_calibration(s).to_dict(), indent=2) + "\n")
    _out(f"wrote {len(windows)} windows to {out}; calibration profiles in {calib_dir}")
    return EXIT_OK


def _check_dims(cfg_model, ckpt_model) -> None:
    keys = ("d_hidden", "heads", "encoder_layers", "lstm_layers", "cross_layers", "window", "imu_dim", "emg_dim")
    diff = [k for k in keys if getattr(cfg_model, k) != getattr(ckpt_model, k)]
    if diff:
        raise DataError("checkpoint does not match the configured model: "
                        + ", ".join(f"{k} {getattr(ckpt_model, k)} != {getattr(cfg_model, k)}" for k in diff))


def cmd_train(args) -> int:
    cfg = _config(args)
    mcfg = C.model_config(cfg)
    tcfg = C.train_config(cfg)
    sessions = _load_sessions(args.data)
    windows = _windows(cfg, sessions)
    train_set = split(windows, cfg["pipeline"]["split"])[0].train if args.split == "within-user" else windows
    out = Path(args.out or cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    w = tcfg.loss_weights
    _out(f"run seed={cfg['seed']} lambda=({w.imu}, {w.emg}, {w.angle}) d_hidden={mcfg.d_hidden} heads={mcfg.heads} "
         f"train_windows={len(train_set)}")
    if args.resume:
        model, _, _ = load_checkpoint(Path(args.resume))
        _check_dims(mcfg, model.config)
    else:
        model = build(mcfg)
    _out(f"model parameters={model.parameter_count()}")
    log_path = out / "train.log"
    with open(log_path, "w") as log_fh:
        def log(line: str):
            log_fh.write(line + "\n")
            log_fh.flush()
            _out(line)

        stages = ("stage1", "stage2") if args.stage == "all" else (args.stage,)
        reports = train_model(model, train_set, tcfg, out, NormalizationSpec(), log=log, stages=stages)
    final = reports[-1].epochs[reports[-1].best_epoch] if reports and reports[-1].best_epoch >= 0 else None
    if final is not None:
        parts = final.val or final.train
        _out("final validation " + " ".join(f"{k}={v:.6g}" for k, v in parts.items()))
    _out(f"checkpoint {out / 'model.w2fm'}")
    return EXIT_OK


def _load_model(args, cfg):
    try:
        model, norm, meta = load_checkpoint(Path(args.checkpoint))
    except FileNotFoundError as exc:
        raise DataError(f"checkpoint {args.checkpoint} not found") from exc
    if args.config is not None or args.profile != "default":
        _check_dims(C.model_config(cfg), model.config)
    return model, norm


def cmd_eval(args) -> int:
    cfg = _config(args)
    model, _ = _load_model(args, cfg)
    windows = _windows(cfg, _load_sessions(args.data))
    sp = split(windows, cfg["pipeline"]["split"])[0]
    report = evaluate(model, sp.test, label="test")
    baseline = mean_pose_baseline(sp.train.pose, sp.test.pose)
    files = emit_report([report], Path(args.out))
    _out(f"mpjpe_cm={report.mpjpe_cm:.4f} baseline_mpjpe_cm={baseline:.4f} angle_diff_deg={report.angle_diff_deg:.3f} "
         f"force_rmse={report.force_rmse:.4f} force_mae={report.force_mae:.4f} force_pearson={report.force_pearson:.4f}")
    _out("wrote " + ", ".join(str(f) for f in files))
    return EXIT_OK


def cmd_louo(args) -> int:
    cfg = _config(args)
    windows = _windows(cfg, _load_sessions(args.data))
    result = run_louo(windows, C.model_config(cfg), C.train_config(cfg), log=logger.info)
    for r in result.all_rows:
        _out(f"{r.label}: mpjpe_cm={r.mpjpe_cm:.4f} angle_diff_deg={r.angle_diff_deg:.3f} "
             f"force_pearson={r.force_pearson:.4f}")
    emit_report(result.all_rows, Path(args.out))
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _config(args)
    windows = _windows(cfg, _load_sessions(args.data))
    sp = split(windows, cfg["pipeline"]["split"])[0]
    reports = run_ablations(sp, C.model_config(cfg), C.train_config(cfg), log=logger.info)
    for r in reports:
        _out(f"{r.variant}: rmse={r.force_rmse:.4f} mae={r.force_mae:.4f} pearson={r.force_pearson:.4f} "
             f"mpjpe_cm={r.mpjpe_cm:.4f}")
    emit_report(reports, Path(args.out))
    return EXIT_OK


def _calibration(args) -> CalibrationProfile:
    if args.calibration:
        path = Path(args.calibration)
        if not path.is_file():
            raise DataError(f"calibration file {path} not found")
        return CalibrationProfile(**json.loads(path.read_text()))
    if args.data and args.user:
        return session_calibration(_load_sessions(args.data, [args.user])[0])
    raise UsageError("serve needs --calibration FILE or --data DIR --user ID")


def cmd_serve(args) -> int:
    from ..stream import StreamServer, file_source, socket_source

    cfg = _config(args)
    model, norm = _load_model(args, cfg)
    calibration = _calibration(args)
    scfg = cfg["stream"]
    out_fh = open(args.output, "w") if args.output else sys.stdout
    lock = threading.Lock()

    def emit(pred):
        with lock:
            out_fh.write(pred.to_json() + "\n")
            out_fh.flush()

    def stats_line(server) -> str:
        s = server.stats.summary()
        lat = s.get("latency_ms")
        inf = s.get("inference_ms")
        text = f"predictions={s['predictions']} frames={s['frames']} invalid_windows={s['invalid_windows']} " \
               f"dropped={s['dropped_packets'] + s['dropped_frames']}"
        if lat:
            text += f" latency_ms p50={lat['p50']:.2f} p95={lat['p95']:.2f} max={lat['max']:.2f}"
            text += f" inference_ms p50={inf['p50']:.2f} p95={inf['p95']:.2f} max={inf['max']:.2f}"
        return text

    def run(source, overflow):
        server = StreamServer(model, norm, calibration, step=scfg["step"], on_prediction=emit,
                              queue_size=scfg["queue_size"], overflow=overflow)
        done = threading.Event()

        def ticker():
            while not done.wait(scfg["stats_interval_s"]):
                print("stats " + stats_line(server), file=sys.stderr, flush=True)

        threading.Thread(target=ticker, daemon=True).start()
        server.run(source)
        done.set()
        print("final " + stats_line(server), file=sys.stderr, flush=True)
        return server

    try:
        if args.input:
            path = Path(args.input)
            if not path.is_file():
                raise DataError(f"input file {path} not found")
            run(file_source(path), "block")
            return EXIT_OK
        host = args.host or scfg["host"]
        port = args.port if args.port is not None else scfg["port"]
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind((host, port))
        except OSError as exc:
            raise UsageError(f"cannot listen on {host}:{port}: {exc}") from exc
        listener.listen(1)
        print(f"listening on {host}:{port}", file=sys.stderr, flush=True)
        served = 0
        while args.connections == 0 or served < args.connections:
            conn, peer = listener.accept()
            print(f"connection from {peer[0]}:{peer[1]}", file=sys.stderr, flush=True)
            with conn:
                run(socket_source(conn), "drop_oldest")
            served += 1
        listener.close()
    finally:
        if out_fh is not sys.stdout:
            out_fh.close()
    return EXIT_OK


def cmd_replay(args) -> int:
    from ..stream import paced, replay_schedule, send_over_socket, write_packet_file

    cfg = _config(args)
    scfg = cfg["stream"]
    sessions = _load_sessions(args.data, [args.user] if args.user else None)
    if not sessions:
        raise DataError(f"user {args.user} not in dataset")
    session = sessions[0]
    trials = {f"{t.gesture_id}_r{t.repetition}": t for t in session.trials}
    name = args.trial or next(iter(trials))
    if name not in trials:
        raise DataError(f"trial {name} not found for user {session.user.user_id}")
    speed = args.speed if args.speed is not None else scfg["speed"]
    schedule = replay_schedule(trials[name], speed=speed,
                               jitter_ms=args.jitter_ms if args.jitter_ms is not None else scfg["jitter_ms"],
                               drop_rate=args.drop_rate if args.drop_rate is not None else scfg["drop_rate"],
                               seed=cfg["seed"])
    if args.out:
        n = write_packet_file((p.data for p in schedule), Path(args.out))
    else:
        host = args.host or scfg["host"]
        port = args.port if args.port is not None else scfg["port"]
        try:
            n = send_over_socket(paced(schedule, realtime=not args.fast), host, port)
        except OSError as exc:
            raise RuntimeError(f"cannot send to {host}:{port}: {exc}") from exc
    _out(f"sent {n} packets ({session.user.user_id}/{name})")
    return EXIT_OK


def cmd_plot_data(args) -> int:
    import csv

    path = Path(args.metrics)
    if not path.is_file():
        raise DataError(f"{path} not found")
    reports = []
    with open(path) as fh:
        for row in csv.DictReader(fh):
            per_finger = {}
            for f in FINGERS:
                if row.get(f"{f}_rmse"):
                    per_finger[f] = {m: float(row[f"{f}_{m}"]) for m in ("rmse", "mae", "pearson")}
            reports.append(MetricsReport(
                label=row["label"], mpjpe_cm=float(row["mpjpe_cm"]), angle_diff_deg=float(row["angle_diff_deg"]),
                force_rmse=float(row["force_rmse"]), force_mae=float(row["force_mae"]),
                force_pearson=float(row["force_pearson"]), per_finger=per_finger, n_windows=int(row["n_windows"]),
                variant=row["variant"], user_id=row["user_id"] or None))
    files = emit_report(reports, Path(args.out))
    _out("wrote " + ", ".join(str(f) for f in files))
    return EXIT_OK


def cmd_config(args) -> int:
    cfg = _config(args)
    sys.stdout.write(C.dump_config(cfg))
    return EXIT_OK


# -- parser --------------------------------------------------------------------------------


def build_parser() -> Parser:
    common = Parser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML file overriding the built-in defaults")
    common.add_argument("--profile", default="default", choices=sorted(C.PROFILES), help="named preset")
    common.add_argument("--seed", type=int, help="global seed (overrides model/train seeds)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    p = Parser(prog="ringwatch", description="Ring/watch IMU + EMG hand pose and force estimation.")
    p.add_argument("--version", action="version", version=f"ringwatch {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    g = sub.add_parser("generate", parents=[common], help="simulate a dataset")
    g.add_argument("--out", required=True, help="dataset directory")
    g.add_argument("--users", type=int, help="number of users")
    g.add_argument("--reps", type=int, help="repetitions per gesture")
    g.add_argument("--gestures", help="comma-separated gesture ids (default: all 20)")
    g.add_argument("--force", action="store_true", help="write into a non-empty directory")
    g.set_defaults(func=cmd_generate)

    pp = sub.add_parser("preprocess", parents=[common], help="window a dataset into a W2F1 file")
    pp.add_argument("--data", required=True, help="dataset directory")
    pp.add_argument("--out", help="output file (default <data>/windows.w2f)")
    pp.set_defaults(func=cmd_preprocess)

    t = sub.add_parser("train", parents=[common], help="two-stage training")
    t.add_argument("--data", required=True, help="dataset directory")
    t.add_argument("--out", help="run directory (default: output_dir from config)")
    t.add_argument("--split", choices=["within-user", "all"], default="within-user",
                   help="train on the within-user training part or on every window")
    t.add_argument("--stage", choices=["all", "stage1", "stage2"], default="all", help="stages to run")
    t.add_argument("--resume", help="checkpoint to start from")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="score a checkpoint on held-out repetitions")
    e.add_argument("--data", required=True, help="dataset directory")
    e.add_argument("--checkpoint", required=True, help="W2FM checkpoint")
    e.add_argument("--out", required=True, help="report directory")
    e.set_defaults(func=cmd_eval)

    lo = sub.add_parser("louo", parents=[common], help="leave-one-user-out evaluation")
    lo.add_argument("--data", required=True, help="dataset directory")
    lo.add_argument("--out", required=True, help="report directory")
    lo.set_defaults(func=cmd_louo)

    ab = sub.add_parser("ablate", parents=[common], help="train and score the four ablation variants")
    ab.add_argument("--data", required=True, help="dataset directory")
    ab.add_argument("--out", required=True, help="report directory")
    ab.set_defaults(func=cmd_ablate)

    s = sub.add_parser("serve", parents=[common], help="streaming inference server")
    s.add_argument("--checkpoint", required=True, help="W2FM checkpoint")
    s.add_argument("--calibration", help="calibration JSON (from preprocess)")
    s.add_argument("--data", help="dataset directory (with --user, calibrate from it)")
    s.add_argument("--user", help="user id for --data calibration")
    s.add_argument("--input", help="read packets from this file instead of a socket")
    s.add_argument("--host", help="listen address")
    s.add_argument("--port", type=int, help="listen port")
    s.add_argument("--connections", type=int, default=0, help="stop after this many connections (0: forever)")
    s.add_argument("--output", help="prediction JSON-lines file (default stdout)")
    s.set_defaults(func=cmd_serve)

    r = sub.add_parser("replay", parents=[common], help="send a recorded trial as sensor packets")
    r.add_argument("--data", required=True, help="dataset directory")
    r.add_argument("--user", help="user id (default: first user)")
    r.add_argument("--trial", help="trial name such as point_r0 (default: first trial)")
    r.add_argument("--speed", type=float, help="pacing factor (1.0 = real time)")
    r.add_argument("--fast", action="store_true", help="send without pacing")
    r.add_argument("--jitter-ms", type=float, help="timestamp jitter standard deviation")
    r.add_argument("--drop-rate", type=float, help="probability of dropping each packet")
    r.add_argument("--out", help="write packets to this file instead of a socket")
    r.add_argument("--host", help="server address")
    r.add_argument("--port", type=int, help="server port")
    r.set_defaults(func=cmd_replay)

    pd = sub.add_parser("plot-data", parents=[common], help="regenerate plot-data files from a metrics table")
    pd.add_argument("--metrics", required=True, help="metrics.csv written by eval/louo/ablate")
    pd.add_argument("--out", required=True, help="output directory")
    pd.set_defaults(func=cmd_plot_data)

    c = sub.add_parser("config", parents=[common], help="configuration utilities")
    c.add_argument("action", choices=["dump"], help="dump: print the merged configuration")
    c.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, C.ConfigKeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DatasetFormatError, CheckpointError, CalibrationError, SignalTooShortError,
            FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as exc:
        logger.debug("unhandled", exc_info=True)
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
