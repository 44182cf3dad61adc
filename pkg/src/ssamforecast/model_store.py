"""Text persistence for trained models (``.ssam`` files).

Layout::

    ssam-model <format_version>
    [model]
    hidden_units = 50
    ...
    [train]
    ...
    [data]
    ...
    [scaler]
    min = <17 significant digits>
    max = <17 significant digits>
    [tensor lstm.W_f 1 50]
    <one line per row, space-separated values with 17 significant digits>
    ...
    end

Seventeen significant digits round-trip every float64 exactly.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

import numpy as np

from .errors import BundleParseError, CorruptionError, ShapeError, VersionError
from .lstm_ssam import ModelConfig, ModelParams, param_shapes
from .preprocess import ScalerParams

FORMAT_VERSION = 1
SUPPORTED_VERSIONS = (1,)
MAGIC = "ssam-model"

_MODEL_FIELDS = {
    "input_dim": int,
    "hidden_units": int,
    "time_step": int,
    "attention_dim": int,
    "post_attention_activation": str,
    "attention": lambda s: {"true": True, "false": False}[s],
    "seed": int,
}


@dataclass
class ModelBundle:
    model_config: ModelConfig
    scaler: ScalerParams
    tensors: dict[str, np.ndarray]
    train_config: dict[str, str] = field(default_factory=dict)
    data_config: dict[str, str] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @classmethod
    def from_params(cls, params: ModelParams, scaler: ScalerParams, train_config=None, data_config=None) -> "ModelBundle":
        return cls(
            model_config=params.config,
            scaler=scaler,
            tensors={k: v.copy() for k, v in params.tensors.items()},
            train_config={k: str(v) for k, v in (train_config or {}).items()},
            data_config={k: str(v) for k, v in (data_config or {}).items()},
        )

    def params(self) -> ModelParams:
        return ModelParams(self.model_config, {k: v.copy() for k, v in self.tensors.items()})

    def validate(self) -> None:
        if self.format_version not in SUPPORTED_VERSIONS:
            raise VersionError(f"unsupported format version {self.format_version}")
        expected = param_shapes(self.model_config)
        for name, shape in expected.items():
            if name not in self.tensors:
                raise ShapeError(f"bundle is missing tensor {name}")
            arr = np.asarray(self.tensors[name])
            if arr.shape != shape:
                raise ShapeError(f"tensor {name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"tensor {name} contains non-finite values")
        extra = set(self.tensors) - set(expected)
        if extra:
            raise ShapeError(f"unexpected tensors: {sorted(extra)}")


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def dumps(bundle: ModelBundle) -> str:
    bundle.validate()
    out = io.StringIO()
    out.write(f"{MAGIC} {bundle.format_version}\n")
    out.write("[model]\n")
    for key, value in bundle.model_config.to_dict().items():
        out.write(f"{key} = {_scalar(value)}\n")
    for section, values in (("train", bundle.train_config), ("data", bundle.data_config)):
        out.write(f"[{section}]\n")
        for key, value in values.items():
            if "\n" in str(value) or "=" in key:
                raise ValueError(f"cannot store {section}.{key}={value!r}")
            out.write(f"{key} = {value}\n")
    out.write("[scaler]\n")
    out.write(f"min = {_num(bundle.scaler.min)}\nmax = {_num(bundle.scaler.max)}\n")
    for name, shape in param_shapes(bundle.model_config).items():
        arr = np.asarray(bundle.tensors[name], dtype=np.float64)
        rows, cols = (shape[0], shape[1]) if len(shape) == 2 else (1, shape[0])
        out.write(f"[tensor {name} {rows} {cols}]\n")
        for row in arr.reshape(rows, cols):
            out.write(" ".join(_num(v) for v in row))
            out.write("\n")
    out.write("end\n")
    return out.getvalue()


def save(bundle: ModelBundle, sink: str | Path | IO[str]) -> None:
    """Write ``bundle``; validation happens before anything touches ``sink``."""
    text = dumps(bundle)
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="utf-8")
    else:
        sink.write(text)


class _Lines:
    def __init__(self, text: str):
        self._lines = text.splitlines()
        self.pos = 0

    def peek(self) -> str | None:
        return self._lines[self.pos] if self.pos < len(self._lines) else None

    def take(self) -> str:
        line = self.peek()
        if line is None:
            raise BundleParseError(f"unexpected end of file after line {self.pos}")
        self.pos += 1
        return line


def _read_kv(lines: _Lines) -> dict[str, str]:
    values = {}
    while (line := lines.peek()) is not None and not line.startswith("[") and line != "end":
        lines.take()
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise BundleParseError(f"line {lines.pos}: expected 'key = value', got {line!r}")
        values[key.strip()] = value.strip()
    return values


def loads(text: str) -> ModelBundle:
    lines = _Lines(text)
    head = lines.take().split()
    if len(head) != 2 or head[0] != MAGIC:
        raise BundleParseError(f"not a model file (expected '{MAGIC} <version>' header)")
    try:
        version = int(head[1])
    except ValueError:
        raise BundleParseError(f"bad version field {head[1]!r}") from None
    if version not in SUPPORTED_VERSIONS:
        raise VersionError(f"unsupported format version {version}; this build reads {SUPPORTED_VERSIONS}")

    sections: dict[str, dict[str, str]] = {}
    tensors: dict[str, np.ndarray] = {}
    ended = False
    while (line := lines.peek()) is not None:
        lines.take()
        if line == "end":
            ended = True
            break
        if not line.strip():
            continue
        if not (line.startswith("[") and line.endswith("]")):
            raise BundleParseError(f"line {lines.pos}: expected a section header, got {line!r}")
        header = line[1:-1].split() or [""]
        if header[0] == "tensor":
            if len(header) != 4:
                raise BundleParseError(f"line {lines.pos}: malformed tensor header {line!r}")
            name = header[1]
            try:
                rows, cols = int(header[2]), int(header[3])
            except ValueError:
                raise BundleParseError(f"line {lines.pos}: bad tensor dimensions in {line!r}") from None
            values: list[float] = []
            while (row := lines.peek()) is not None and not row.startswith("[") and row != "end":
                lines.take()
                try:
                    values.extend(float(v) for v in row.split())
                except ValueError:
                    raise BundleParseError(f"line {lines.pos}: unparseable number in tensor {name}") from None
            if lines.peek() is None:
                raise BundleParseError(f"truncated model file inside tensor {name}")
            if len(values) != rows * cols:
                raise CorruptionError(
                    f"tensor {name} declares {rows}x{cols} but holds {len(values)} values"
                )
            tensors[name] = np.array(values, dtype=np.float64).reshape(rows, cols)
        elif len(header) == 1:
            sections[header[0]] = _read_kv(lines)
        else:
            raise BundleParseError(f"line {lines.pos}: unknown section {line!r}")
    if not ended:
        raise BundleParseError("truncated model file (missing 'end')")

    for needed in ("model", "scaler"):
        if needed not in sections:
            raise BundleParseError(f"missing [{needed}] section")
    try:
        cfg_values = {k: _MODEL_FIELDS[k](v) for k, v in sections["model"].items()}
        config = ModelConfig(**cfg_values)
        scaler = ScalerParams(float(sections["scaler"]["min"]), float(sections["scaler"]["max"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise BundleParseError(f"invalid header values: {exc}") from None

    shaped = {}
    for name, shape in param_shapes(config).items():
        if name not in tensors:
            raise CorruptionError(f"tensor {name} missing for the declared config")
        arr = tensors.pop(name)
        if arr.size != int(np.prod(shape)) or (len(shape) == 2 and arr.shape != shape):
            raise CorruptionError(f"tensor {name} is {arr.shape[0]}x{arr.shape[1]}, expected {shape}")
        shaped[name] = arr.reshape(shape)
    if tensors:
        raise CorruptionError(f"tensors not used by the declared config: {sorted(tensors)}")

    bundle = ModelBundle(
        model_config=config,
        scaler=scaler,
        tensors=shaped,
        train_config=sections.get("train", {}),
        data_config=sections.get("data", {}),
        format_version=version,
    )
    try:
        bundle.validate()
    except ShapeError as exc:
        raise CorruptionError(str(exc)) from None
    return bundle


def load(source: str | Path | IO[str]) -> ModelBundle:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    return loads(text)
