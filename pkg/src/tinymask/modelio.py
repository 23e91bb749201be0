"""``.tqm`` model container, size accounting and device budget checks.

Byte layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"TQM1"
    4       2     version (u16, currently 1)
    6       1     flavor (u8: 0 = float32, 1 = int8)
    7       1     reserved, 0
    8       4     payload length in bytes (u32)
    12      4     CRC-32 of the payload (u32, zlib polynomial)
    16      ...   payload

    payload:
    u32 config length, then the network config as compact UTF-8 JSON
    u32 record count, then per record:
        u16 name length, name (UTF-8)
        u8  dtype code (0 f32, 1 f64, 2 i8, 3 i32, 4 i64)
        u8  ndim, then ndim x u32 dims
        raw array bytes, C order

Float containers hold ``<key>.w`` / ``<key>.b`` float32 records. Int8
containers hold, per edge, ``edge:<name>.scale`` (f64) and
``edge:<name>.zp`` (i32); per layer ``<key>.w`` (i8), ``<key>.w_scale`` (f64),
``<key>.b`` (i32), ``<key>.mult`` (i32), ``<key>.shift`` (i32) and
``<key>.meta`` (i32: in-edge index, out-edge index, relu, stride, padding,
channel offset, kind).
"""
from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CorruptionError, FormatError, VersionError
from .netgraph import NetworkConfig
from .quantizer import QLayer, QuantizedModel, RequantParams
from .tensor import QuantParams

MAGIC = b"TQM1"
VERSION = 1
FLAVOR_FLOAT32, FLAVOR_INT8 = 0, 1
HEADER = struct.Struct("<4sHBBII")
DEVICE_BUDGET_BYTES = 230 * 1024

_DTYPES = [np.dtype("<f4"), np.dtype("<f8"), np.dtype("i1"), np.dtype("<i4"), np.dtype("<i8")]
_CODE = {dt: i for i, dt in enumerate(_DTYPES)}
_PADDING = ("valid", "same")
_KINDS = ("conv", "dense")


@dataclass
class FloatModel:
    """Float32 parameters together with their network config."""

    net_cfg: NetworkConfig
    params: dict


def _pack_records(records):
    out = [struct.pack("<I", len(records))]
    for name, arr in records:
        arr = np.asarray(arr, order="C")
        dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
        code = _CODE[np.dtype(dt)]
        nb = name.encode()
        out.append(struct.pack("<H", len(nb)) + nb + struct.pack("<BB", code, arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(arr.astype(_DTYPES[code], copy=False).tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CorruptionError("payload ends mid-record")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))


def _unpack_records(r):
    (count,) = r.unpack("<I")
    records = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode()
        code, ndim = r.unpack("<BB")
        if code >= len(_DTYPES):
            raise CorruptionError(f"record {name!r}: unknown dtype code {code}")
        shape = r.unpack(f"<{ndim}I")
        dt = _DTYPES[code]
        n = int(np.prod(shape)) if ndim else 1
        records[name] = np.frombuffer(r.take(n * dt.itemsize), dtype=dt).reshape(shape).copy()
    return records


def _config_bytes(cfg):
    return json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":")).encode()


def serialize(model) -> bytes:
    """Encode a FloatModel or QuantizedModel as container bytes (deterministic)."""
    if isinstance(model, QuantizedModel):
        flavor, records = FLAVOR_INT8, _int8_records(model)
    elif isinstance(model, FloatModel):
        flavor = FLAVOR_FLOAT32
        records = [(k, np.asarray(v, dtype=np.float32)) for k, v in model.params.items()]
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    cfg = _config_bytes(model.net_cfg)
    payload = struct.pack("<I", len(cfg)) + cfg + _pack_records(records)
    header = HEADER.pack(MAGIC, VERSION, flavor, 0, len(payload), zlib.crc32(payload))
    return header + payload


def _int8_records(qm: QuantizedModel):
    edge_names = list(qm.edges)
    index = {n: i for i, n in enumerate(edge_names)}
    recs = []
    for name in edge_names:
        qp = qm.edges[name]
        recs.append((f"edge:{name}.scale", np.array(qp.scale, dtype=np.float64)))
        recs.append((f"edge:{name}.zp", np.array(qp.zero_point, dtype=np.int32)))
    for key, layer in qm.layers.items():
        meta = [
            index[layer.in_edge], index[layer.out_edge], int(layer.relu), layer.stride,
            _PADDING.index(layer.padding), layer.channel_offset, _KINDS.index(layer.kind),
        ]
        recs += [
            (f"{key}.w", layer.weights.astype(np.int8)),
            (f"{key}.w_scale", np.asarray(layer.weight_qp.scale, dtype=np.float64)),
            (f"{key}.b", layer.bias.astype(np.int32)),
            (f"{key}.mult", np.asarray(layer.requant.multiplier).astype(np.int32)),
            (f"{key}.shift", np.asarray(layer.requant.shift).astype(np.int32)),
            (f"{key}.meta", np.array(meta, dtype=np.int32)),
        ]
    return recs


def read_header(data: bytes):
    """Validate magic/version and return the header fields as a dict."""
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("not a TQM container (bad magic)")
    if len(data) < HEADER.size:
        raise CorruptionError("container truncated inside header")
    magic, version, flavor, _, length, crc = HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionError(f"unsupported container version {version}")
    if flavor not in (FLAVOR_FLOAT32, FLAVOR_INT8):
        raise FormatError(f"unknown flavor {flavor}")
    return {
        "magic": magic.decode(),
        "version": version,
        "flavor": "int8" if flavor == FLAVOR_INT8 else "float32",
        "payload_bytes": length,
        "crc32": f"{crc:08x}",
        "total_bytes": len(data),
    }


def deserialize(data: bytes):
    data = bytes(data)
    header = read_header(data)
    payload = data[HEADER.size :]
    if len(payload) != header["payload_bytes"]:
        raise CorruptionError(f"payload is {len(payload)} bytes, header says {header['payload_bytes']}")
    if f"{zlib.crc32(payload):08x}" != header["crc32"]:
        raise CorruptionError("checksum mismatch")
    r = _Reader(payload)
    (clen,) = r.unpack("<I")
    try:
        cfg = NetworkConfig.from_dict(json.loads(r.take(clen).decode()))
    except (ValueError, UnicodeDecodeError) as exc:
        raise CorruptionError(f"bad network config: {exc}") from exc
    records = _unpack_records(r)
    if r.pos != len(payload):
        raise CorruptionError("trailing bytes after last record")
    if header["flavor"] == "float32":
        if any(a.dtype != np.float32 for a in records.values()):
            raise FormatError("float32 container holds non-float32 records")
        return FloatModel(cfg, records)
    return _int8_from_records(cfg, records)


def _int8_from_records(cfg, recs):
    edge_names = [k[len("edge:") : -len(".scale")] for k in recs if k.startswith("edge:") and k.endswith(".scale")]
    edges = {n: QuantParams(recs[f"edge:{n}.scale"][()], int(recs[f"edge:{n}.zp"])) for n in edge_names}
    layers = {}
    for k in recs:
        if not k.endswith(".meta"):
            continue
        key = k[: -len(".meta")]
        in_i, out_i, relu, stride, pad, offset, kind = (int(v) for v in recs[k])
        w = recs[f"{key}.w"]
        if w.dtype != np.int8:
            raise FormatError(f"{key}: int8 container holds {w.dtype} weights")
        layers[key] = QLayer(
            name=key,
            kind=_KINDS[kind],
            weights=w,
            weight_qp=QuantParams(recs[f"{key}.w_scale"], 0),
            bias=recs[f"{key}.b"],
            requant=RequantParams(recs[f"{key}.mult"].astype(np.int64), recs[f"{key}.shift"].astype(np.int64)),
            in_edge=edge_names[in_i],
            out_edge=edge_names[out_i],
            relu=bool(relu),
            stride=stride,
            padding=_PADDING[pad],
            channel_offset=offset,
        )
    return QuantizedModel(cfg, layers, edges)


def save(model, path):
    data = serialize(model)
    with open(path, "wb") as f:
        f.write(data)
    return len(data)


def load(path):
    with open(path, "rb") as f:
        return deserialize(f.read())


@dataclass(frozen=True)
class SizeReport:
    float_bytes: int
    int8_bytes: int

    @property
    def reduction_bytes(self):
        return self.float_bytes - self.int8_bytes

    @property
    def reduction_pct(self):
        return 100.0 * (1.0 - self.int8_bytes / self.float_bytes)

    def to_text(self):
        return (
            f"float32_size_kb: {self.float_bytes / 1024:.1f}\n"
            f"int8_size_kb: {self.int8_bytes / 1024:.1f}\n"
            f"reduction_kb: {self.reduction_bytes / 1024:.1f}\n"
            f"reduction_pct: {self.reduction_pct:.2f}\n"
        )


def size_report(float_bytes, int8_bytes) -> SizeReport:
    if float_bytes <= 0 or int8_bytes <= 0:
        raise ValueError("sizes must be > 0")
    return SizeReport(float_bytes, int8_bytes)


@dataclass(frozen=True)
class BudgetResult:
    passed: bool
    model_bytes: int
    budget_bytes: int

    @property
    def margin(self):
        """Bytes left under the budget (negative when over)."""
        return self.budget_bytes - self.model_bytes

    def __bool__(self):
        return self.passed

    def to_text(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"budget: {verdict} ({self.model_bytes / 1024:.1f} KB of {self.budget_bytes / 1024:.1f} KB, margin {self.margin / 1024:.1f} KB)\n"


def budget_check(model_bytes, budget_bytes=DEVICE_BUDGET_BYTES) -> BudgetResult:
    if model_bytes <= 0 or budget_bytes <= 0:
        raise ValueError("sizes must be > 0")
    return BudgetResult(model_bytes < budget_bytes, model_bytes, budget_bytes)
