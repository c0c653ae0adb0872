"""Model bundle persistence: one key-ordered JSON document.

Tensors are stored as base64 of little-endian float32 values with their
shape. Bundles hold float32-quantized parameters in memory as well, so a
freshly built bundle predicts exactly like one loaded back from disk.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Schema
from .ensemble import EnsembleConfig
from .errors import BundleError
from .features import PackingDescriptor
from .nn.ffnn import FfnnModel
from .nn.lstm import LstmLayer, RnnModel
from .preprocess import TransformParams

FORMAT_VERSION = "neo-bundle/1"


def encode_tensor(a):
    a = np.asarray(a)
    raw = a.astype("<f4").tobytes()
    return {"data": base64.b64encode(raw).decode("ascii"), "dtype": "<f4", "shape": list(a.shape)}


def decode_tensor(d, name="tensor"):
    try:
        shape = tuple(int(s) for s in d["shape"])
        raw = base64.b64decode(d["data"].encode("ascii"), validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise BundleError(f"{name}: malformed tensor entry ({exc})") from None
    if d.get("dtype") != "<f4":
        raise BundleError(f"{name}: unsupported dtype {d.get('dtype')!r}")
    expected = int(np.prod(shape)) * 4
    if len(raw) != expected:
        raise BundleError(f"{name}: truncated tensor, {len(raw)} of {expected} bytes", offset=len(raw))
    return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)


def quantize(model):
    """Copy of ``model`` with every parameter rounded to float32."""
    m = model.copy()
    for p in m.params:
        p[...] = p.astype(np.float32).astype(np.float64)
    return m


def _ffnn_to_dict(m: FfnnModel):
    return {
        "activation": m.activation,
        "biases": [encode_tensor(b) for b in m.biases],
        "sizes": list(m.sizes),
        "weights": [encode_tensor(w) for w in m.weights],
    }


def _ffnn_from_dict(d):
    return FfnnModel(
        d["sizes"],
        [decode_tensor(w, f"ffnn.weights[{i}]") for i, w in enumerate(d["weights"])],
        [decode_tensor(b, f"ffnn.biases[{i}]") for i, b in enumerate(d["biases"])],
        d["activation"],
    )


def _rnn_to_dict(m: RnnModel):
    return {
        "gate_order": ["f", "i", "o", "c"],
        "layers": [{"U": encode_tensor(l.U), "W": encode_tensor(l.W), "b": encode_tensor(l.b)} for l in m.layers],
        "readout_W": encode_tensor(m.readout_W),
        "readout_b": encode_tensor(m.readout_b),
        "sizes": list(m.sizes),
    }


def _rnn_from_dict(d):
    layers = [
        LstmLayer(decode_tensor(l["W"], f"rnn.W{i}"), decode_tensor(l["U"], f"rnn.U{i}"), decode_tensor(l["b"], f"rnn.b{i}"))
        for i, l in enumerate(d["layers"])
    ]
    return RnnModel(layers, decode_tensor(d["readout_W"], "rnn.readout_W"), decode_tensor(d["readout_b"], "rnn.readout_b"))


@dataclass
class ModelBundle:
    transform: TransformParams
    ffnn: FfnnModel
    rnn: RnnModel
    ensemble: EnsembleConfig
    packing: PackingDescriptor
    schema: Schema = field(default_factory=Schema)
    provenance: dict = field(default_factory=dict)
    version: str = FORMAT_VERSION

    def __post_init__(self):
        self.ffnn = quantize(self.ffnn)
        self.rnn = quantize(self.rnn)

    def to_dict(self):
        return {
            "ensemble": self.ensemble.to_dict(),
            "ffnn": _ffnn_to_dict(self.ffnn),
            "format_version": self.version,
            "packing": self.packing.to_dict(),
            "provenance": self.provenance,
            "rnn": _rnn_to_dict(self.rnn),
            "schema": self.schema.to_dict(),
            "transform": self.transform.to_dict(),
        }

    def to_bytes(self):
        return (json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n").encode("utf-8")

    def __eq__(self, other):
        return isinstance(other, ModelBundle) and self.to_bytes() == other.to_bytes()

    @classmethod
    def from_dict(cls, d):
        version = d.get("format_version")
        if version != FORMAT_VERSION:
            raise BundleError(f"unsupported bundle version {version!r}, expected {FORMAT_VERSION!r}")
        try:
            return cls(
                transform=TransformParams.from_dict(d["transform"]),
                ffnn=_ffnn_from_dict(d["ffnn"]),
                rnn=_rnn_from_dict(d["rnn"]),
                ensemble=EnsembleConfig.from_dict(d["ensemble"]),
                packing=PackingDescriptor.from_dict(d["packing"]),
                schema=Schema.from_dict(d["schema"]),
                provenance=d.get("provenance", {}),
            )
        except KeyError as exc:
            raise BundleError(f"bundle is missing field {exc}") from None


def save_bundle(b: ModelBundle, path) -> Path:
    path = Path(path)
    path.write_bytes(b.to_bytes())
    return path


def load_bundle(path) -> ModelBundle:
    path = Path(path)
    if not path.exists():
        raise BundleError(f"no such bundle: {path}")
    raw = path.read_bytes()
    if not raw.strip():
        raise BundleError("corrupt bundle: file is empty", offset=0)
    try:
        doc = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise BundleError("corrupt bundle: not UTF-8", offset=exc.start) from None
    except json.JSONDecodeError as exc:
        raise BundleError(f"corrupt bundle: {exc.msg}", offset=exc.pos) from None
    if not isinstance(doc, dict):
        raise BundleError("corrupt bundle: top level is not an object", offset=0)
    return ModelBundle.from_dict(doc)


def config_digest(obj) -> str:
    """SHA-256 of a JSON-serialisable config, key-ordered."""
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode("utf-8")).hexdigest()
