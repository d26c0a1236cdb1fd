"""Command-line pipeline: ingest, resample, mfdfa, rolling, illiq, synth, align.

Every option can also come from a flat ``key = value`` config file whose keys
are the long option names without dashes. Command-line flags override the
file, and the merged configuration is recorded in the run manifest.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import re
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import formats
from .errors import ConfigError, DataQualityError, IngestError, MfmarketError
from .liquidity import rolling_illiq
from .mfdfa import MfdfaConfig, default_q_grid, fluctuation_surface
from .rolling import RollingConfig, align_traces, rolling_spectrum
from .spectrum import EFFICIENCY_BAND, fit_spectrum, summary
from .synth import GeneratorSpec
from .timeseries import daily_aggregates, ingest_ticks, log_returns, resample

logger = logging.getLogger("mfmarket")

SUPPORTED_DT = (3600, 6 * 3600, 12 * 3600, 86400)
_DURATION = re.compile(r"^\s*(\d+)\s*([smhd]?)\s*$")
_UNITS = {"": 1, "s": 1, "m": 60, "h": 3600, "d": 86400}


def parse_duration(text) -> int:
    if isinstance(text, (int, np.integer)):
        return int(text)
    m = _DURATION.match(str(text))
    if not m or int(m.group(1)) == 0:
        raise ConfigError(f"invalid duration {text!r}; use e.g. 24h or 365d")
    return int(m.group(1)) * _UNITS[m.group(2)]


def format_duration(seconds: int) -> str:
    for unit, size in (("d", 86400), ("h", 3600)):
        if seconds % size == 0:
            return f"{seconds // size}{unit}"
    return f"{seconds}s"


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"invalid boolean {text!r}")


def _parse_ints(text) -> tuple[int, ...] | None:
    if text in (None, "", "none"):
        return None
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _parse_opt_int(text) -> int | None:
    return None if text in (None, "", "none") else int(text)


@dataclass(frozen=True)
class Param:
    name: str
    parse: Callable[[Any], Any]
    default: Any
    help: str
    dump: Callable[[Any], str] = str
    flag: bool = False


def _p_dur(name, default, help):
    return Param(name, parse_duration, default, help, format_duration)


_MF_PARAMS = [
    Param("q-min", float, -25.0, "smallest q"),
    Param("q-max", float, 25.0, "largest q"),
    Param("q-step", float, 0.5, "q grid spacing"),
    Param("poly-order", int, 3, "detrending polynomial order"),
    Param("s-min", int, 16, "smallest scale in samples"),
    Param("s-max", _parse_opt_int, None, "largest scale (default N/4)",
          lambda v: "none" if v is None else str(v)),
    Param("n-scales", int, 20, "number of log-spaced scales"),
    Param("scales", _parse_ints, None, "explicit comma-separated scales",
          lambda v: "none" if v is None else ",".join(map(str, v))),
    Param("variance-floor", float, 1e-30, "floor for segment variances", repr),
    Param("band", float, EFFICIENCY_BAND, "efficiency band around h(2) = 0.5"),
]
_DT_CHECK = Param("allow-any-dt", _parse_bool, False, "accept sampling periods outside "
                  "1h/6h/12h/24h", lambda v: str(v).lower(), flag=True)
_ALIGN = Param("align", str, "epoch", "bin origin: 'epoch' (UTC-aligned) or 'first' tick")

COMMANDS: dict[str, list[Param]] = {
    "ingest": [Param("max-reject-fraction", float, 0.01, "fatal fraction of bad rows")],
    "resample": [
        Param("dt", parse_duration, None, "sampling period, e.g. 1h or 24h",
              lambda v: "none" if v is None else format_duration(v)),
        Param("fill", str, "carry-forward", "gap policy"),
        Param("emit", str, "returns", "'returns' or 'prices'"),
        _ALIGN, _DT_CHECK,
    ],
    "mfdfa": [
        Param("dt", lambda v: None if v in (None, "", "none") else parse_duration(v), None,
              "expected sampling period of the input",
              lambda v: "none" if v is None else format_duration(v)),
        *_MF_PARAMS, _DT_CHECK,
    ],
    "rolling": [
        _p_dur("window", 365 * 86400, "window length"),
        _p_dur("step", 86400, "window step"),
        Param("min-coverage", float, 0.9, "fraction of non-gap-filled samples required"),
        _p_dur("dt", 86400, "sampling period when resampling tick input"),
        Param("input-kind", str, "auto", "'auto', 'ticks' or 'returns'"),
        Param("threads", int, 1, "worker threads"),
        *_MF_PARAMS, _ALIGN, _DT_CHECK,
    ],
    "illiq": [Param("window-days", int, 365, "trailing window in days")],
    "synth": [
        Param("kind", str, "gaussian-noise", "gaussian-noise, fgn or binomial-cascade"),
        Param("n", int, 16384, "series length (power of two for the cascade)"),
        Param("H", float, 0.5, "fGn Hurst parameter"),
        Param("a", float, 0.75, "cascade weight in (0.5, 1)"),
        Param("seed", int, 0, "generator seed"),
        _p_dur("dt", 86400, "sampling period of the output grid"),
        Param("start", int, 0, "timestamp of the first value (unix seconds)"),
        _DT_CHECK,
    ],
    "align": [],
}


def read_config_file(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key] = value
    return out


def dump_config(command: str, cfg: dict[str, Any]) -> str:
    params = {p.name: p for p in COMMANDS[command]}
    lines = [f"# mfmarket {__version__} {command}"]
    lines += [f"{k} = {params[k].dump(v)}" for k, v in cfg.items()]
    return "\n".join(lines) + "\n"


def effective_config(command: str, args: argparse.Namespace) -> dict[str, Any]:
    params = COMMANDS[command]
    known = {p.name for p in params}
    from_file = read_config_file(args.config) if args.config else {}
    unknown = set(from_file) - known
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    cfg = {}
    for p in params:
        cli_value = getattr(args, _dest(p.name))
        raw = cli_value if cli_value is not None else from_file.get(p.name, p.default)
        try:
            cfg[p.name] = p.parse(raw) if raw is not None else None
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid value for {p.name}: {raw!r}") from exc
    return cfg


def _dest(name: str) -> str:
    return name.replace("-", "_")


def _check_dt(dt: int, cfg: dict) -> None:
    if dt not in SUPPORTED_DT and not cfg.get("allow-any-dt"):
        raise ConfigError(f"sampling period {format_duration(dt)} is not one of "
                          f"1h, 6h, 12h, 24h (pass --allow-any-dt to override)")


def _mf_config(cfg: dict) -> MfdfaConfig:
    q = default_q_grid(cfg["q-min"], cfg["q-max"], cfg["q-step"])
    return MfdfaConfig(poly_order=cfg["poly-order"], scales=cfg["scales"],
                       q_grid=tuple(q.tolist()), variance_floor=cfg["variance-floor"],
                       s_min=cfg["s-min"], s_max=cfg["s-max"], n_scales=cfg["n-scales"])


class _Run:
    """Collects inputs, outputs and diagnostics for the manifest."""

    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.inputs: dict[str, str] = {}
        self.diagnostics: dict[str, Any] = {}
        self.started = datetime.now(timezone.utc)

    def read_bytes(self, path: str) -> bytes:
        try:
            data = sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()
        except OSError as exc:
            raise IngestError(f"cannot read {path}: {exc}") from exc
        self.inputs[path] = hashlib.sha256(data).hexdigest()
        return data

    def read_text(self, path: str) -> io.StringIO:
        try:
            return io.StringIO(self.read_bytes(path).decode("utf-8"), newline="")
        except UnicodeDecodeError as exc:
            raise IngestError(f"{path} is not UTF-8") from exc

    def manifest(self) -> dict:
        canonical = formats.dumps_json({"command": self.command,
                                        "config": dump_config(self.command, self.cfg)})
        return {
            "command": self.command,
            "config": {k: _dump_value(self.command, k, v) for k, v in self.cfg.items()},
            "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
            "input_digests": self.inputs,
            "tool_version": __version__,
            "started": self.started.isoformat(),
            "finished": datetime.now(timezone.utc).isoformat(),
            "diagnostics": self.diagnostics,
        }


def _dump_value(command: str, key: str, value) -> str:
    return next(p for p in COMMANDS[command] if p.name == key).dump(value)


def write_output(path: str, text: str) -> None:
    try:
        if path == "-":
            sys.stdout.write(text)
            sys.stdout.flush()
        else:
            Path(path).write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise IngestError(f"cannot write {path}: {exc}") from exc


def _render(writer, obj) -> str:
    buf = io.StringIO(newline="")
    writer(obj, buf)
    return buf.getvalue()


def _sidecar(path: str, suffix: str) -> str | None:
    return None if path == "-" else path + suffix


def _read_returns(run: _Run, path: str, cfg: dict):
    series = formats.read_returns(run.read_text(path), source_meta=path)
    if series.dt == 0:
        raise DataQualityError("return series needs at least two rows")
    _check_dt(series.dt, cfg)
    return series


def cmd_ingest(run: _Run, args) -> None:
    ticks = ingest_ticks(run.read_bytes(args.input), run.cfg["max-reject-fraction"])
    run.diagnostics.update(n_ticks=len(ticks), n_rejected=ticks.n_rejected,
                           rejected_lines=list(ticks.rejected_lines[:100]))
    write_output(args.output, _render(formats.write_ticks, ticks))


def cmd_resample(run: _Run, args) -> None:
    cfg = run.cfg
    if cfg["dt"] is None:
        raise ConfigError("resample needs --dt")
    _check_dt(cfg["dt"], cfg)
    if cfg["emit"] not in ("returns", "prices"):
        raise ConfigError("emit must be 'returns' or 'prices'")
    ticks = ingest_ticks(run.read_bytes(args.input))
    prices = resample(ticks, cfg["dt"], cfg["fill"], _origin(cfg))
    run.diagnostics.update(n_samples=len(prices), n_filled=prices.n_filled)
    series = prices if cfg["emit"] == "prices" else log_returns(prices)
    write_output(args.output, _render(formats.write_series, series))


def _origin(cfg: dict) -> int | None:
    if cfg["align"] not in ("epoch", "first"):
        raise ConfigError("align must be 'epoch' or 'first'")
    return 0 if cfg["align"] == "epoch" else None


def cmd_mfdfa(run: _Run, args) -> None:
    cfg = run.cfg
    mf = _mf_config(cfg)
    if cfg["band"] < 0:
        raise ConfigError("band must be non-negative")
    series = _read_returns(run, args.input, cfg)
    if cfg["dt"] is not None and cfg["dt"] != series.dt:
        raise ConfigError(f"--dt {format_duration(cfg['dt'])} does not match the input's "
                          f"sampling period {format_duration(series.dt)}")
    surface = fluctuation_surface(series, mf)
    spectrum = fit_spectrum(surface)
    summ = summary(spectrum, cfg["band"])
    summ["n"] = len(series)
    summ["n_floored"] = int(sum(surface.n_floored))
    run.diagnostics.update(rejected_scales=[list(x) for x in surface.rejected_scales],
                           n_floored=summ["n_floored"])
    write_output(args.output, _render(formats.write_spectrum, spectrum))
    summary_path = args.summary or _sidecar(args.output, ".summary.json")
    if summary_path:
        write_output(summary_path, formats.dumps_json(summ) + "\n")
    if args.surface:
        write_output(args.surface, _render(formats.write_surface, surface))


def _detect_kind(text: str) -> str:
    first = next((ln for ln in text.splitlines() if ln.strip()), "")
    return "returns" if first.strip().lower().replace(" ", "") == "timestamp,value" else "ticks"


def cmd_rolling(run: _Run, args) -> None:
    cfg = run.cfg
    rc = RollingConfig(cfg["window"], cfg["step"], cfg["min-coverage"])
    mf = _mf_config(cfg)
    data = run.read_bytes(args.input)
    kind = cfg["input-kind"]
    if kind not in ("auto", "ticks", "returns"):
        raise ConfigError("input-kind must be auto, ticks or returns")
    if kind == "auto":
        kind = _detect_kind(data[:4096].decode("utf-8", errors="replace"))
    days = None
    if kind == "returns":
        series = formats.read_returns(io.StringIO(data.decode("utf-8"), newline=""))
        _check_dt(series.dt, cfg)
    else:
        _check_dt(cfg["dt"], cfg)
        ticks = ingest_ticks(data)
        series = log_returns(resample(ticks, cfg["dt"], origin=_origin(cfg)))
        days = daily_aggregates(ticks)
    trace = rolling_spectrum(series, rc, mf, days=days, threads=max(1, cfg["threads"]))
    run.diagnostics.update(n_windows=len(trace), input_kind=kind,
                           skipped=[[formats.to_rfc3339(t), r] for t, r in trace.skipped])
    write_output(args.output, _render(formats.write_trace, trace))


def cmd_illiq(run: _Run, args) -> None:
    days = daily_aggregates(ingest_ticks(run.read_bytes(args.input)))
    points, skipped = rolling_illiq(days, run.cfg["window-days"])
    run.diagnostics["skipped"] = [[str(d), r] for d, r in skipped]
    write_output(args.output, _render(formats.write_illiq, points))


def cmd_synth(run: _Run, args) -> None:
    cfg = run.cfg
    _check_dt(cfg["dt"], cfg)
    params = {"fgn": {"H": cfg["H"]}, "binomial-cascade": {"a": cfg["a"]}}.get(cfg["kind"], {})
    spec = GeneratorSpec(cfg["kind"], cfg["n"], cfg["seed"], params)
    series = spec.generate(dt=cfg["dt"], start=cfg["start"])
    write_output(args.output, _render(formats.write_series, series))


def cmd_align(run: _Run, args) -> None:
    if args.labels and len(args.labels) != len(args.inputs):
        raise ConfigError("give one --label per input trace")
    labels = args.labels or [Path(p).stem if p != "-" else str(i)
                             for i, p in enumerate(args.inputs)]
    traces = [formats.read_trace(run.read_text(p), label)
              for p, label in zip(args.inputs, labels)]
    table = align_traces(traces)
    run.diagnostics["n_dropped"] = table.n_dropped
    write_output(args.output, _render(formats.write_aligned, table))


HELP = {
    "ingest": "validate and sort a raw trade dump",
    "resample": "resample ticks to a fixed period and emit returns or prices",
    "mfdfa": "generalized Hurst spectrum of a return series",
    "rolling": "rolling-window h(2), delta h and ILLIQ trace",
    "illiq": "rolling Amihud illiquidity from ticks",
    "synth": "synthetic return series with known scaling",
    "align": "inner-join rolling traces on window end",
}

HANDLERS = {
    "ingest": cmd_ingest, "resample": cmd_resample, "mfdfa": cmd_mfdfa,
    "rolling": cmd_rolling, "illiq": cmd_illiq, "synth": cmd_synth, "align": cmd_align,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mfmarket", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mfmarket {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, params in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name])
        if name == "align":
            p.add_argument("inputs", nargs="+", help="trace CSV files")
            p.add_argument("--label", dest="labels", action="append",
                           help="column prefix per input, in order (default: file stem)")
        else:
            p.add_argument("-i", "--in", dest="input", default="-", help="input path or -")
        p.add_argument("-o", "--out", dest="output", default="-", help="output path or -")
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--dump-config", help="write the effective config here")
        p.add_argument("--manifest", help="run manifest path (default <out>.manifest.json)")
        if name == "mfdfa":
            p.add_argument("--summary", help="summary JSON path")
            p.add_argument("--surface", help="fluctuation surface CSV path")
        for prm in params:
            if prm.flag:
                p.add_argument(f"--{prm.name}", dest=_dest(prm.name), action="store_const",
                               const=True, default=None, help=prm.help)
            else:
                p.add_argument(f"--{prm.name}", dest=_dest(prm.name), default=None,
                               help=f"{prm.help} (default {prm.default})")
    return parser


def _error_line(exc: MfmarketError) -> str:
    return json.dumps({"error": exc.category, "exit_code": exc.exit_code,
                       "message": str(exc)})


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.INFO)
        cfg = effective_config(args.command, args)
        run = _Run(args.command, cfg)
        if args.dump_config:
            write_output(args.dump_config, dump_config(args.command, cfg))
        HANDLERS[args.command](run, args)
        manifest_path = args.manifest or _sidecar(args.output, ".manifest.json")
        if manifest_path:
            write_output(manifest_path, json.dumps(run.manifest(), indent=2, sort_keys=True)
                         + "\n")
    except MfmarketError as exc:
        sys.stderr.write(_error_line(exc) + "\n")
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
