"""Command-line interface.

    mfscope ingest TICKS --out RETURNS
    mfscope generate --model {iid,fgn,cascade} --params k=v,... --seed S --out RETURNS
    mfscope analyze RETURNS --out-prefix PREFIX
    mfscope surrogate RETURNS --kind full -M 100 --seed S --out REPORT.json
    mfscope acf RETURNS --transform absolute --out ACF.csv
    mfscope profile RETURNS --out PROFILE.csv

Every command takes ``--config FILE`` (INI); flags override file values.
Tables carry the resolved configuration in ``#`` header lines and are
byte-identical across re-runs; run metadata with timestamps goes to a
``.manifest.json`` sidecar. Exit codes: 0 ok, 1 input error, 2 numerical
or degenerate failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import datetime as dt
import hashlib
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import RNG_ALGORITHM, DegenerateInputError
from .correl import Transform, acf, daily_pattern, intraday_volatility_profile
from .ingest import (FormatConfig, ReturnSeries, SessionConfig, log_returns, parse_ticks,
                     read_returns, resample, write_returns)
from .mfdfa import MFDFA, default_scales
from .spectrum import alpha_samples, envelope
from .surrogate import ShuffleKind, SurrogateFailure, surrogate_test
from .synth import (CascadeSpec, FgnSpec, generate_binomial_cascade, generate_fgn,
                    generate_gaussian_iid)

logger = logging.getLogger("mfscope")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2

DEFAULTS = {
    "session": {"open": "09:00:00", "close": "17:30:00", "interval": "15", "close_cutoff": "30"},
    "format": {"delimiter": ",", "timestamp_format": "", "timezone": "Europe/Madrid",
               "header": "false", "strict": "false", "max_backstep": "0"},
    "mfdfa": {"q_grid": "-5:5:0.25", "order": "5", "scales": "auto", "fit_range": "",
              "both_ends": "true"},
    "surrogate": {"kind": "full", "n_surrogates": "100"},
    "acf": {"transform": "raw", "max_lag": "", "exclude_cross_day": "false"},
    "generate": {"day_length": "0", "interval": "15"},
}


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# --- value parsers -----------------------------------------------------------

def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off", ""):
        return False
    raise InputError(f"not a boolean: {text!r}")


def parse_range_grid(text: str) -> np.ndarray:
    """``lo:hi:step`` (inclusive) or a comma-separated list."""
    text = str(text).strip()
    if ":" in text:
        try:
            lo, hi, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise InputError(f"bad grid {text!r}; expected lo:hi:step") from None
        if step <= 0 or hi < lo:
            raise InputError(f"bad grid {text!r}")
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return np.round(lo + step * np.arange(n), 10)
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise InputError(f"bad grid {text!r}") from None


def parse_scales(text: str, n: int, order: int) -> np.ndarray:
    """``auto``, ``lo:hi:count`` (log-spaced), ``dyadic:lo:hi`` or a comma list."""
    text = str(text).strip().lower()
    if text in ("", "auto"):
        return default_scales(n, order)
    try:
        if text.startswith("dyadic"):
            _, lo, hi = text.split(":")
            k = np.arange(int(np.log2(int(lo))), int(np.log2(int(hi))) + 1)
            return (2 ** k).astype(np.int64)
        if ":" in text:
            lo, hi, count = (int(v) for v in text.split(":"))
            return np.unique(np.round(np.geomspace(lo, hi, count)).astype(np.int64))
        return np.array(sorted({int(v) for v in text.split(",") if v.strip()}), dtype=np.int64)
    except ValueError:
        raise InputError(f"bad scale specification {text!r}") from None


def parse_fit_range(text):
    text = str(text or "").strip()
    if not text:
        return None
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise InputError(f"bad fit range {text!r}; expected lo:hi") from None
    return (lo, hi)


def parse_params(text: str) -> dict:
    out = {}
    for item in filter(None, (p.strip() for p in (text or "").split(","))):
        if "=" not in item:
            raise InputError(f"bad parameter {item!r}; expected key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def parse_time(text: str) -> dt.time:
    try:
        return dt.time.fromisoformat(str(text).strip())
    except ValueError:
        raise InputError(f"bad time of day {text!r}") from None


# --- config resolution -------------------------------------------------------

def load_config(path) -> dict:
    resolved = {section: dict(values) for section, values in DEFAULTS.items()}
    if path:
        parser = configparser.ConfigParser(interpolation=None)
        if not parser.read(path, encoding="utf-8"):
            raise InputError(f"cannot read config file {path}")
        for section in parser.sections():
            resolved.setdefault(section, {}).update(parser[section])
    return resolved


def resolve(args, section: str, keys) -> dict:
    cfg = load_config(getattr(args, "config", None)).get(section, {})
    out = {}
    for key in keys:
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else cfg.get(key, "")
    return out


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(output, command: str, config: dict, inputs=(), seeds=None, outputs=()):
    manifest = {
        "tool": "mfscope",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "seeds": seeds or {},
        "rng": RNG_ALGORITHM,
        "created_utc": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path = Path(f"{output}.manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def write_table(path, columns, rows, header: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key in sorted(header):
            fh.write(f"# {key}: {header[key]}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


# --- commands ----------------------------------------------------------------

def _session_from(cfg: dict) -> SessionConfig:
    return SessionConfig(open=parse_time(cfg["open"]), close=parse_time(cfg["close"]),
                         interval=int(cfg["interval"]), close_cutoff=int(cfg["close_cutoff"]))


def cmd_ingest(tick_file, out, session_cfg: dict, format_cfg: dict) -> ReturnSeries:
    session = _session_from(session_cfg)
    fmt = FormatConfig(delimiter=format_cfg["delimiter"] or ",",
                       timestamp_format=format_cfg["timestamp_format"] or None,
                       timezone=format_cfg["timezone"],
                       header=parse_bool(format_cfg["header"]),
                       strict=parse_bool(format_cfg["strict"]),
                       max_backstep=float(format_cfg["max_backstep"] or 0))
    ticks = parse_ticks(Path(tick_file), fmt, session)
    series = log_returns(resample(ticks, session.interval, session))
    header = {"session": f"{session.open}-{session.close}",
              "close_cutoff": session.close_cutoff}
    write_returns(series, out, header)
    print(f"days: {series.n_days}  returns: {len(series)}  "
          f"ticks kept: {len(ticks)}  dropped: {ticks.n_dropped}")
    if series.flagged:
        print(f"short sessions: {', '.join(d.isoformat() for d in series.flagged)}")
    return series


def cmd_generate(model: str, params: dict, seed: int, out, day_length: int = 0,
                 interval: int = 15) -> np.ndarray:
    model = model.lower()
    try:
        if model == "iid":
            x = generate_gaussian_iid(int(params.get("length", 2 ** 16)),
                                      float(params.get("sigma", 1.0)), seed)
        elif model == "fgn":
            x = generate_fgn(FgnSpec(float(params.get("hurst", 0.5)),
                                     int(params.get("length", 2 ** 16)),
                                     float(params.get("sigma", 1.0)), seed))
        elif model == "cascade":
            x = generate_binomial_cascade(CascadeSpec(
                float(params.get("a", params.get("multiplier", 0.6))),
                int(params.get("levels", 16)), seed,
                parse_bool(params.get("randomize", "false"))))
        else:
            raise InputError(f"unknown model {model!r}")
    except TypeError as exc:
        raise InputError(str(exc)) from None
    series = ReturnSeries.from_array(x, day_length or None, sampling_interval=interval)
    header = {"model": model, "params": ",".join(f"{k}={params[k]}" for k in sorted(params)),
              "seed": seed, "rng": RNG_ALGORITHM, "day_length": day_length or x.size}
    write_returns(series, out, header)
    print(f"{model}: {x.size} values in {series.n_days} day(s) -> {out}")
    return x


def _estimator_from(cfg: dict, n: int) -> MFDFA:
    order = int(cfg["order"])
    scales = parse_scales(cfg["scales"], n, order)
    return MFDFA(q=parse_range_grid(cfg["q_grid"]), scales=scales, order=order,
                 both_ends=parse_bool(cfg["both_ends"]), fit_range=parse_fit_range(cfg["fit_range"]))


def _header(command: str, cfg: dict, **extra) -> dict:
    out = {"command": command, "tool": f"mfscope {__version__}"}
    out.update({k: v for k, v in cfg.items()})
    out.update(extra)
    return out


def cmd_analyze(returns_file, out_prefix, mfdfa_cfg: dict) -> dict:
    series = read_returns(returns_file)
    x = series.flatten()
    est = _estimator_from(mfdfa_cfg, x.size)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est.fit(x)
    for w in caught:
        logger.warning("%s", w.message)
    spec = est.spectrum_
    header = _header("analyze", mfdfa_cfg, input_sha256=_sha256(returns_file), n=x.size)
    prefix = str(out_prefix)
    outputs = {
        "exponents": f"{prefix}_exponents.csv",
        "fluctuation": f"{prefix}_fluctuation.csv",
        "spectrum": f"{prefix}_spectrum.csv",
        "envelope": f"{prefix}_envelope.csv",
        "summary": f"{prefix}_summary.json",
    }
    write_table(outputs["exponents"], ["q", "h", "h_stderr", "tau", "r2"],
                est.exponents_.to_rows(), header)
    write_table(outputs["fluctuation"], ["q", "s", "F"], est.fluctuation_.to_rows(), header)
    write_table(outputs["spectrum"], ["q", "alpha", "f"], spec.to_rows(), header)
    alphas = alpha_samples(spec)
    write_table(outputs["envelope"], ["alpha", "y"],
                ((float(a), float(y)) for a, y in zip(alphas, envelope(est.exponents_, alphas))),
                header)
    summary = spec.summary.as_dict()
    summary.update({"h2": est.hurst() if np.any(np.isclose(est.exponents_.q, 2)) else None,
                    "nonconcave_q": spec.nonconcave_q,
                    "fit_range": list(est.exponents_.fit_range),
                    "n": int(x.size),
                    "config": {k: str(v) for k, v in mfdfa_cfg.items()}})
    Path(outputs["summary"]).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    s = spec.summary
    print(f"alpha_min={s.alpha_min:.3f} alpha_max={s.alpha_max:.3f} alpha0={s.alpha0:.3f} "
          f"width={s.width:.3f} f_max={s.f_max:.3f}")
    return {"summary": summary, "outputs": outputs}


def cmd_surrogate(returns_file, out, kind: str, n_surrogates: int, seed: int,
                  mfdfa_cfg: dict, n_jobs: int = 1, ensemble_csv=None):
    series = read_returns(returns_file)
    kind = ShuffleKind.parse(kind)
    if kind is not ShuffleKind.FULL and series.n_days < 2:
        raise InputError(f"--kind {kind.value} needs >= 2 days; {returns_file} has {series.n_days}")
    est = _estimator_from(mfdfa_cfg, len(series))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = surrogate_test(series, kind, n_surrogates, est, seed, n_jobs)
    report.config = {k: str(v) for k, v in mfdfa_cfg.items()}
    report.config["input_sha256"] = _sha256(returns_file)
    Path(out).write_text(report.to_json() + "\n")
    if ensemble_csv:
        write_table(ensemble_csv, ["index", "d"], enumerate(report.ensemble),
                    _header("surrogate", mfdfa_cfg, kind=kind.value, seed=seed))
    print(f"d_observed={report.d_observed:.4f} mean={report.mean:.4f} std={report.std:.4f} "
          f"p={report.p_value_text}")
    return report


def cmd_acf(returns_file, out, transform: str, max_lag=None, exclude_cross_day=False,
            pattern_out=None):
    series = read_returns(returns_file)
    n = len(series)
    if not max_lag:
        day = int(series.day_lengths[0]) if series.is_uniform and series.n_days > 1 else n
        max_lag = min(30 * day, (n - 1) // 2)
    corr = acf(series, int(max_lag), transform, exclude_cross_day)
    header = {"command": "acf", "transform": corr.transform.value, "max_lag": int(max_lag),
              "exclude_cross_day": exclude_cross_day, "n": n,
              "input_sha256": _sha256(returns_file)}
    write_table(out, ["lag", "acf", "band"], corr.to_rows(), header)
    hi = min(100, int(max_lag))
    frac = corr.fraction_outside(1, hi) if hi >= 1 else 0.0
    print(f"N={n} band=±{corr.band:.5f} outside band (lags 1..{hi}): {100 * frac:.1f}%")
    if pattern_out and series.n_days > 1 and series.is_uniform:
        pat = daily_pattern(corr, int(series.day_lengths[0]))
        write_table(pattern_out, ["lag", "acf", "prominence", "is_peak"],
                    ((int(k), float(h), float(p), int(b)) for k, h, p, b in
                     zip(pat.lags, pat.heights, pat.prominence, pat.is_peak)), header)
    return corr


def cmd_profile(returns_file, out):
    series = read_returns(returns_file)
    prof = intraday_volatility_profile(series)
    header = {"command": "profile", "days": series.n_days,
              "sampling_interval": series.sampling_interval,
              "input_sha256": _sha256(returns_file)}
    write_table(out, ["slot", "mean_abs_return"],
                ((i, float(v)) for i, v in enumerate(prof)), header)
    print(f"{prof.size} slots over {series.n_days} days -> {out}")
    return prof


# --- argument parsing --------------------------------------------------------

def _add_mfdfa_flags(p):
    p.add_argument("--q-grid", dest="q_grid", help="lo:hi:step or list, e.g. --q-grid=-5:5:0.25")
    p.add_argument("--order", help="detrending polynomial order (default 5)")
    p.add_argument("--scales", help="auto | lo:hi:count | dyadic:lo:hi | s1,s2,...")
    p.add_argument("--fit-range", dest="fit_range", help="lo:hi window sizes used in the fit")
    p.add_argument("--both-ends", dest="both_ends", choices=["true", "false"])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mfscope", description="Multifractal analysis of return series.")
    parser.add_argument("--version", action="version", version=f"mfscope {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="tick file -> intraday log-returns")
    p.add_argument("tick_file")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--config")
    for name in ("open", "close", "interval", "close_cutoff", "delimiter", "timestamp_format",
                 "timezone", "max_backstep"):
        p.add_argument("--" + name.replace("_", "-"), dest=name)
    p.add_argument("--header", action="store_const", const="true", default=None)
    p.add_argument("--strict", action="store_const", const="true", default=None)

    p = sub.add_parser("generate", help="synthetic series with known exponents")
    p.add_argument("--model", required=True, choices=["iid", "fgn", "cascade"])
    p.add_argument("--params", default="")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--day-length", dest="day_length")
    p.add_argument("--interval")
    p.add_argument("--config")

    p = sub.add_parser("analyze", help="h(q), tau(q) and the singularity spectrum")
    p.add_argument("returns_file")
    p.add_argument("--out-prefix", "-o", dest="out_prefix", required=True)
    p.add_argument("--config")
    _add_mfdfa_flags(p)

    p = sub.add_parser("surrogate", help="shuffled-surrogate test of the d statistic")
    p.add_argument("returns_file")
    p.add_argument("--kind", choices=[k.value for k in ShuffleKind])
    p.add_argument("-M", "--n-surrogates", dest="n_surrogates")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--ensemble-csv", dest="ensemble_csv")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--config")
    _add_mfdfa_flags(p)

    p = sub.add_parser("acf", help="correlogram of raw, absolute or squared returns")
    p.add_argument("returns_file")
    p.add_argument("--transform", choices=["raw", "abs", "absolute", "squared"])
    p.add_argument("--max-lag", dest="max_lag")
    p.add_argument("--exclude-cross-day", dest="exclude_cross_day", action="store_const",
                   const="true", default=None)
    p.add_argument("--pattern-out", dest="pattern_out")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--config")

    p = sub.add_parser("profile", help="intraday mean absolute return per slot")
    p.add_argument("returns_file")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--config")
    return parser


def _run(args) -> None:
    if args.command == "ingest":
        session = resolve(args, "session", ["open", "close", "interval", "close_cutoff"])
        fmt = resolve(args, "format", ["delimiter", "timestamp_format", "timezone", "header",
                                       "strict", "max_backstep"])
        cmd_ingest(args.tick_file, args.out, session, fmt)
        write_manifest(args.out, "ingest", {"session": session, "format": fmt},
                       inputs=[args.tick_file], outputs=[args.out])
    elif args.command == "generate":
        cfg = resolve(args, "generate", ["day_length", "interval"])
        params = parse_params(args.params)
        cmd_generate(args.model, params, args.seed, args.out, int(cfg["day_length"] or 0),
                     int(cfg["interval"] or 15))
        write_manifest(args.out, "generate", {"model": args.model, "params": params, **cfg},
                       seeds={"seed": args.seed}, outputs=[args.out])
    elif args.command == "analyze":
        cfg = resolve(args, "mfdfa", ["q_grid", "order", "scales", "fit_range", "both_ends"])
        result = cmd_analyze(args.returns_file, args.out_prefix, cfg)
        write_manifest(args.out_prefix, "analyze", cfg, inputs=[args.returns_file],
                       outputs=list(result["outputs"].values()))
    elif args.command == "surrogate":
        cfg = resolve(args, "mfdfa", ["q_grid", "order", "scales", "fit_range", "both_ends"])
        scfg = resolve(args, "surrogate", ["kind", "n_surrogates"])
        cmd_surrogate(args.returns_file, args.out, scfg["kind"], int(scfg["n_surrogates"]),
                      args.seed, cfg, args.jobs, args.ensemble_csv)
        write_manifest(args.out, "surrogate", {"mfdfa": cfg, "surrogate": scfg},
                       inputs=[args.returns_file], seeds={"seed": args.seed}, outputs=[args.out])
    elif args.command == "acf":
        cfg = resolve(args, "acf", ["transform", "max_lag", "exclude_cross_day"])
        cmd_acf(args.returns_file, args.out, cfg["transform"] or "raw",
                int(cfg["max_lag"]) if cfg["max_lag"] else None,
                parse_bool(cfg["exclude_cross_day"]), args.pattern_out)
        write_manifest(args.out, "acf", cfg, inputs=[args.returns_file], outputs=[args.out])
    elif args.command == "profile":
        cmd_profile(args.returns_file, args.out)
        write_manifest(args.out, "profile", {}, inputs=[args.returns_file], outputs=[args.out])


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        _run(args)
    except (DegenerateInputError, SurrogateFailure, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"mfscope: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, MemoryError) as exc:
        print(f"mfscope: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
