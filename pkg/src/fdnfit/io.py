"""WAV, JSON and CSV interchange."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .analysis import AcousticMetrics, EarlyReflections, SampledRir
from .exceptions import ConfigurationError, InputOutputError
from .model import FdnParams
from .render import NetworkParams

SCHEMA_VERSION = 1


def read_wav(path) -> SampledRir:
    """Read a mono WAV file as float64 samples in [-1, 1].

    16- and 32-bit integer PCM are scaled by full scale; float files are
    taken as-is.
    """
    try:
        rate, data = wavfile.read(str(path))
    except (OSError, ValueError) as exc:
        raise InputOutputError(f"cannot read WAV {path}: {exc}") from exc
    if data.ndim > 1:
        if data.shape[1] != 1:
            raise ConfigurationError(
                f"{path} has {data.shape[1]} channels; mix down to mono first "
                "(e.g. average the channels or pick the one to fit)"
            )
        data = data[:, 0]
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif np.issubdtype(data.dtype, np.floating):
        x = data.astype(np.float64)
    else:
        raise InputOutputError(f"unsupported WAV sample type {data.dtype}")
    return SampledRir(int(rate), x)


def write_wav(path, rir_or_samples, sample_rate_hz: int | None = None) -> None:
    """Write 32-bit float mono WAV. Samples are not clipped."""
    if isinstance(rir_or_samples, SampledRir):
        rate, x = rir_or_samples.sample_rate_hz, rir_or_samples.samples
    else:
        if sample_rate_hz is None:
            raise ConfigurationError("sample_rate_hz is required for raw samples")
        rate, x = sample_rate_hz, np.asarray(rir_or_samples)
    try:
        wavfile.write(str(path), int(rate), np.asarray(x, dtype=np.float32))
    except OSError as exc:
        raise InputOutputError(f"cannot write WAV {path}: {exc}") from exc


def _dump(path, obj) -> None:
    try:
        Path(path).write_text(json.dumps(obj, indent=2) + "\n")
    except OSError as exc:
        raise InputOutputError(f"cannot write {path}: {exc}") from exc


def _load(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputOutputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from exc


def _check_schema(d: dict, path) -> None:
    version = d.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigurationError(f"{path}: unsupported schema_version {version}")


def early_to_json(early: EarlyReflections) -> list:
    return [{"delay_samples": d, "gain": g} for d, g in early.taps]


def early_from_json(items) -> EarlyReflections:
    return EarlyReflections.from_taps((item["delay_samples"], item["gain"]) for item in items)


def params_to_dict(params: NetworkParams) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "sample_rate_hz": params.sample_rate_hz}
    if params.fdn is not None:
        out["alpha"] = params.fdn.alpha
        out["loops"] = [
            {"beta": b, "kappa_samples": k} for b, k in zip(params.fdn.betas, params.fdn.kappas)
        ]
    out["early"] = [] if params.early is None else early_to_json(params.early)
    return out


def params_from_dict(d: dict) -> NetworkParams:
    _check_schema(d, "params")
    try:
        fdn = None
        if d.get("loops"):
            fdn = FdnParams(
                d["alpha"],
                tuple(loop["beta"] for loop in d["loops"]),
                tuple(loop["kappa_samples"] for loop in d["loops"]),
            )
        early = early_from_json(d["early"]) if d.get("early") else None
        return NetworkParams(int(d["sample_rate_hz"]), fdn, early)
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed params JSON: missing or bad field {exc}") from exc


def save_params(path, params: NetworkParams) -> None:
    _dump(path, params_to_dict(params))


def load_params(path) -> NetworkParams:
    return params_from_dict(_load(path))


def save_early(path, early: EarlyReflections, sample_rate_hz: int) -> None:
    _dump(
        path,
        {"schema_version": SCHEMA_VERSION, "sample_rate_hz": sample_rate_hz, "early": early_to_json(early)},
    )


def load_early(path) -> tuple[EarlyReflections, int | None]:
    d = _load(path)
    if isinstance(d, list):
        return early_from_json(d), None
    _check_schema(d, path)
    return early_from_json(d["early"]), d.get("sample_rate_hz")


def save_metrics(path, metrics: AcousticMetrics, sample_rate_hz: int, length_samples: int | None = None) -> None:
    out = {"schema_version": SCHEMA_VERSION, **metrics.to_dict(sample_rate_hz)}
    if length_samples is not None:
        out["length_samples"] = int(length_samples)
    _dump(path, out)


def load_metrics(path) -> tuple[AcousticMetrics, dict]:
    """Metrics plus the raw dict (for ``sample_rate_hz`` and ``length_samples``)."""
    d = _load(path)
    _check_schema(d, path)
    try:
        return AcousticMetrics.from_dict(d), d
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed metrics JSON: {exc}") from exc


def save_report(path, report, sample_rate_hz: int | None = None, extra: dict | None = None) -> None:
    out = {"schema_version": SCHEMA_VERSION, **report.to_dict(sample_rate_hz)}
    if extra:
        out.update(extra)
    _dump(path, out)


def save_trace(path, trace) -> None:
    """Convergence trace rows ``(iteration, loss, l1, l2, l3, l4)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss", "l1", "l2", "l3", "l4"])
        for row in trace:
            w.writerow([int(row[0]), *(repr(float(v)) for v in row[1:])])


BENCH_COLUMNS = ["method", "N", "W", "flops_per_sample", "wall_ns_per_sample", "latency_samples"]


def save_bench(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow(row)
