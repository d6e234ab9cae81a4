"""Versioned binary model files.

Layout (all integers little-endian)::

    magic      8 bytes   b"SPKPLAN\\0"
    version    uint32    MODEL_VERSION
    hlen       uint32    length of the JSON header in bytes
    header     hlen      UTF-8 JSON: grid, tau, activation, refractory ramp, shape
    weights    K*K*8     float64 little-endian, row-major W[pre, post]
    crc32      uint32    CRC-32 of everything above

Floats in the header are written with ``repr`` so they round-trip exactly,
and the weights are raw IEEE-754 bytes, so save/load is bit-exact.
"""

import json
import struct
import zlib

import numpy as np

from .network import GridSpec, Logistic, StateNetwork

MAGIC = b"SPKPLAN\0"
MODEL_VERSION = 1
_PREFIX = struct.Struct("<8sII")


class ModelFormatError(ValueError):
    pass


def model_to_bytes(net):
    K = net.n_neurons
    header = {
        "grid": {"dims": net.grid.dims, "neurons_per_dim": net.grid.neurons_per_dim,
                 "bounds": list(net.grid.bounds)},
        "tau": int(net.tau),
        "refractory_ramp": int(net.refractory_ramp),
        "activation": {"offset": float(net.activation.offset),
                       "scale": float(net.activation.scale)},
        "shape": [K, K],
        "dtype": "<f8",
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = _PREFIX.pack(MAGIC, MODEL_VERSION, len(hbytes)) + hbytes
    body += np.ascontiguousarray(net.W, dtype="<f8").tobytes(order="C")
    return body + struct.pack("<I", zlib.crc32(body))


def model_from_bytes(data):
    if len(data) < _PREFIX.size + 4:
        raise ModelFormatError("file too short")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError("not a spikeplan model file")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise ModelFormatError("checksum mismatch")
    start = _PREFIX.size
    try:
        header = json.loads(body[start:start + hlen].decode("utf-8"))
        g = header["grid"]
        grid = GridSpec(g["dims"], g["neurons_per_dim"], tuple(g["bounds"]))
        K = grid.n_neurons
        if header["shape"] != [K, K] or header["dtype"] != "<f8":
            raise ModelFormatError("weight block does not match grid")
        raw = body[start + hlen:]
        if len(raw) != K * K * 8:
            raise ModelFormatError("truncated weight block")
        W = np.frombuffer(raw, dtype="<f8").reshape(K, K).astype(np.float64)
        act = header["activation"]
        return StateNetwork(grid, W, tau=header["tau"],
                            activation=Logistic(act["offset"], act["scale"]),
                            refractory_ramp=header["refractory_ramp"])
    except (KeyError, TypeError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"malformed header: {e}") from None


def save_model(net, path):
    with open(path, "wb") as f:
        f.write(model_to_bytes(net))


def load_model(path):
    with open(path, "rb") as f:
        return model_from_bytes(f.read())
