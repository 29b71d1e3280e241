"""JSON documents for channels, matrices and run configuration.

A channel document::

    {"format_version": 1, "dim_in": 2, "dim_out": 2,
     "kraus": [[[[re, im], [re, im]], [[re, im], [re, im]]], ...]}

``kraus`` is a list of matrices, each a list of rows, each entry a
``[re, im]`` pair.  Matrix documents (``{"format_version": 1, "matrix": ...}``)
carry states, generators and unitaries; POVMs use ``"povm": [matrix, ...]``
and probe vectors ``"vector": [[re, im], ...]``.  Plain real numbers are
accepted wherever a ``[re, im]`` pair is.

Floats are written with ``repr``, the shortest decimal that reads back
to the same double, so documents round-trip exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np

from .channels import KrausChannel, validate
from .matlin import ValidationError

__all__ = [
    "FORMAT_VERSION",
    "RunConfig",
    "channel_to_doc",
    "channel_from_doc",
    "load_channel",
    "save_channel",
    "matrix_to_doc",
    "matrix_from_doc",
    "load_document",
    "load_matrix",
    "load_povm",
    "load_vector_or_matrix",
    "encode_complex",
    "decode_complex",
    "to_json",
]

FORMAT_VERSION = 1


def encode_complex(m: np.ndarray) -> list:
    """Nested lists with each entry a ``[re, im]`` pair of Python floats."""
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim == 0:
        return [float(m.real), float(m.imag)]
    return [encode_complex(x) for x in m]


def _entry(x, where: str) -> complex:
    if isinstance(x, bool):
        raise ValidationError(f"{where}: booleans are not numbers")
    if isinstance(x, (int, float)):
        return complex(float(x), 0.0)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(float(x[0]), float(x[1]))
    raise ValidationError(f"{where}: expected a number or a [re, im] pair, got {x!r}")


def decode_complex(data, ndim: int, where: str = "matrix") -> np.ndarray:
    """Parse nested ``[re, im]`` lists of depth ``ndim`` into a complex array."""
    if ndim == 0:
        return np.asarray(_entry(data, where))
    if not isinstance(data, list) or not data:
        raise ValidationError(f"{where}: expected a non-empty list")
    parts = [decode_complex(x, ndim - 1, f"{where}[{i}]") for i, x in enumerate(data)]
    if len({p.shape for p in parts}) != 1:
        raise ValidationError(f"{where}: ragged nesting")
    out = np.stack(parts)
    if not np.all(np.isfinite(out)):
        raise ValidationError(f"{where}: non-finite entry")
    return out


def _check_version(doc: Any, kind: str) -> dict:
    if not isinstance(doc, dict):
        raise ValidationError(f"{kind} document must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(f"{kind} document has format_version {version!r}; this reader handles {FORMAT_VERSION}")
    return doc


def channel_to_doc(k: KrausChannel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "dim_in": k.dim_in,
        "dim_out": k.dim_out,
        "kraus": encode_complex(k.kraus),
    }


def channel_from_doc(doc: Any) -> KrausChannel:
    doc = _check_version(doc, "channel")
    missing = {"dim_in", "dim_out", "kraus"} - set(doc)
    if missing:
        raise ValidationError(f"channel document lacks {sorted(missing)}")
    kraus = decode_complex(doc["kraus"], 3, "kraus")
    if kraus.shape[1:] != (doc["dim_out"], doc["dim_in"]):
        raise ValidationError(
            f"Kraus operators have shape {kraus.shape[1:]}, document declares dim_out={doc['dim_out']}, dim_in={doc['dim_in']}"
        )
    k = KrausChannel(kraus)
    validate(k)
    return k


def matrix_to_doc(m: np.ndarray, key: str = "matrix") -> dict:
    return {"format_version": FORMAT_VERSION, key: encode_complex(m)}


def matrix_from_doc(doc: Any) -> np.ndarray:
    doc = _check_version(doc, "matrix")
    if "matrix" in doc:
        return decode_complex(doc["matrix"], 2, "matrix")
    if "kraus" in doc:
        # a single-Kraus channel document stands for its operator
        kraus = channel_from_doc(doc).kraus
        if len(kraus) != 1:
            raise ValidationError("expected a matrix or a single-Kraus channel document")
        return kraus[0]
    raise ValidationError("matrix document lacks 'matrix'")


def load_document(path: str | Path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def load_channel(path: str | Path) -> KrausChannel:
    return channel_from_doc(load_document(path))


def save_channel(k: KrausChannel, path: str | Path) -> None:
    Path(path).write_text(to_json(channel_to_doc(k)) + "\n", encoding="utf-8")


def load_matrix(path: str | Path) -> np.ndarray:
    return matrix_from_doc(load_document(path))


def load_povm(path: str | Path) -> list[np.ndarray]:
    doc = _check_version(load_document(path), "POVM")
    if "povm" not in doc or not isinstance(doc["povm"], list):
        raise ValidationError("POVM document lacks a 'povm' list")
    return [decode_complex(e, 2, f"povm[{i}]") for i, e in enumerate(doc["povm"])]


def load_vector_or_matrix(path: str | Path) -> np.ndarray:
    doc = _check_version(load_document(path), "state")
    if "vector" in doc:
        return decode_complex(doc["vector"], 1, "vector")
    return matrix_from_doc(doc)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode_complex(obj) if np.iscomplexobj(obj) else _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def to_json(obj, indent: int | None = 2) -> str:
    """Deterministic JSON: sorted keys, ``repr`` floats, non-finite floats as strings."""
    return json.dumps(_plain(obj), indent=indent, sort_keys=True, allow_nan=False)


@dataclass(frozen=True)
class RunConfig:
    sdp_tol: float = 1e-9
    ortho_threshold: float = 1e-7
    fd_step: float = 1e-3
    grid: int = 41
    max_n: int = 8
    seed: int = 42
    output: str = "text"

    def __post_init__(self):
        checks = [
            (1e-12 <= self.sdp_tol <= 1e-3, "sdp_tol must lie in [1e-12, 1e-3]"),
            (0 < self.ortho_threshold <= 1e-3, "ortho_threshold must lie in (0, 1e-3]"),
            (1e-6 <= self.fd_step <= 1e-1, "fd_step must lie in [1e-6, 1e-1]"),
            (5 <= self.grid <= 10001, "grid must lie in [5, 10001]"),
            (1 <= self.max_n <= 16, "max_n must lie in [1, 16]"),
            (self.seed >= 0, "seed must be non-negative"),
            (self.output in ("text", "json"), "output must be 'text' or 'json'"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValidationError(message)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]
