"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.

This module has tools for the low level artifact bundle layout.

    magic "PKIT" | u32 version | u64 manifest length | manifest
    then per array: u32 name length | name | u8 dtype | u32 rank | u64 dims[rank] | u64 byte length | bytes
    then u32 CRC-32 of the array region

All integers are little-endian. The manifest is indented JSON with sorted keys.
Integers and floats keep their types; the "arrays" key is reserved.
"""

import json
import struct
import logging
import zlib

import numpy as np

from purikit.const import (
    BUNDLE_MAGIC,
    BUNDLE_VERSION,
    SUPPORTED_BUNDLE_VERSIONS,
    DTYPE_F32,
    DTYPE_F64,
    DTYPE_I32,
    DTYPE_I64,
)
from purikit.errors import (
    BAD_BUNDLE_MAGIC,
    UNKNOWN_BUNDLE_VERSION,
    BUNDLE_CHECKSUM,
    BUNDLE_SHAPE,
    INVALID_ARGUMENT,
)
from purikit.object_implem import Object
from purikit.utils import BadBundle, PurikitError

logger = logging.getLogger(__name__)

DTYPE_TAGS = {
    np.dtype("<f4"): DTYPE_F32,
    np.dtype("<f8"): DTYPE_F64,
    np.dtype("<i4"): DTYPE_I32,
    np.dtype("<i8"): DTYPE_I64,
}
TAG_DTYPES = {tag: dtype for dtype, tag in DTYPE_TAGS.items()}
DTYPE_NAMES = {DTYPE_F32: "f32", DTYPE_F64: "f64", DTYPE_I32: "i32", DTYPE_I64: "i64"}

HEADER_FMT = "<4sIQ"
HEADER_SIZE = struct.calcsize(HEADER_FMT)


class ArtifactBundle(Object):
    def __init__(self, manifest=None, arrays=None):
        self.manifest = dict(manifest) if manifest else {}
        self.arrays = dict(arrays) if arrays else {}

    def __str__(self):
        return "kind: %s, arrays: %s" % (
            self.manifest.get("kind", ""),
            ", ".join(f"{name}{tuple(arr.shape)}" for name, arr in self.arrays.items()),
        )


def normalize_array(name: str, arr) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.dtype == np.bool_:
        arr = arr.astype(np.int32)
    dtype = arr.dtype.newbyteorder("<")
    if dtype not in DTYPE_TAGS:
        raise PurikitError.fromPair(
            INVALID_ARGUMENT, f"array '{name}' has unsupported dtype {arr.dtype}"
        )
    return np.ascontiguousarray(arr, dtype=dtype)


def make_manifest(manifest: dict, arrays: dict) -> bytes:
    """the manifest plus an 'arrays' entry declaring dtype and shape of every payload array"""
    if "arrays" in manifest:
        raise PurikitError.fromPair(INVALID_ARGUMENT, "manifest key 'arrays' is reserved for the payload index")
    doc = plain_value(manifest)
    doc["arrays"] = {
        name: {"dtype": DTYPE_NAMES[DTYPE_TAGS[arr.dtype]], "shape": list(arr.shape)}
        for name, arr in arrays.items()
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    return text.encode("utf-8") + b"\n"


def read_manifest(buf: bytes) -> dict:
    doc = json.loads(buf.decode("utf-8"))
    if not isinstance(doc, dict):
        raise ValueError(f"manifest is a {type(doc).__name__}, not an object")
    return doc


def plain_value(val):
    if isinstance(val, dict):
        return {str(key): plain_value(item) for key, item in val.items()}
    if isinstance(val, (list, tuple, np.ndarray)):
        return [plain_value(item) for item in val]
    if isinstance(val, np.generic):
        return val.item()
    return val


def make_array(name: str, arr: np.ndarray) -> bytes:
    nameBytes = name.encode("utf-8")
    data = arr.tobytes(order="C")
    head = struct.pack(
        f"<I{len(nameBytes)}sBI{arr.ndim}QQ",
        len(nameBytes),
        nameBytes,
        DTYPE_TAGS[arr.dtype],
        arr.ndim,
        *arr.shape,
        len(data),
    )
    return head + data


def read_array(buf: bytes, offset: int) -> tuple:
    """reads one array record starting at offset, returns (name, array, next offset)"""
    try:
        (nameLen,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        (nameBytes, tag, rank) = struct.unpack_from(f"<{nameLen}sBI", buf, offset)
        offset += nameLen + 5
        dims = struct.unpack_from(f"<{rank}Q", buf, offset)
        offset += 8 * rank
        (byteLen,) = struct.unpack_from("<Q", buf, offset)
        offset += 8
    except struct.error as ex:
        raise BadBundle.fromPair(BUNDLE_SHAPE, f"array header cut short at offset {offset}: {ex}")
    name = nameBytes.decode("utf-8")
    if tag not in TAG_DTYPES:
        raise BadBundle.fromPair(BUNDLE_SHAPE, f"array '{name}' has unknown dtype tag {tag}")
    dtype = TAG_DTYPES[tag]
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    if expected != byteLen or offset + byteLen > len(buf):
        raise BadBundle.fromPair(
            BUNDLE_SHAPE, f"array '{name}' declares {tuple(dims)} but carries {byteLen} bytes"
        )
    arr = np.frombuffer(buf, dtype=dtype, count=expected // dtype.itemsize, offset=offset)
    return (name, arr.reshape(dims).copy(), offset + byteLen)


def encode_bundle(bundle: ArtifactBundle) -> bytes:
    arrays = {name: normalize_array(name, arr) for name, arr in bundle.arrays.items()}
    manifest = make_manifest(bundle.manifest, arrays)
    payload = b"".join(make_array(name, arr) for name, arr in arrays.items())
    header = struct.pack(HEADER_FMT, BUNDLE_MAGIC, BUNDLE_VERSION, len(manifest))
    trailer = struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    logger.debug(
        "encode_bundle: manifest %d bytes, %d arrays, payload %d bytes",
        len(manifest), len(arrays), len(payload),
    )
    return header + manifest + payload + trailer


def decode_bundle(buf: bytes) -> ArtifactBundle:
    if len(buf) < HEADER_SIZE + 4:
        raise BadBundle.fromPair(BAD_BUNDLE_MAGIC, f"only {len(buf)} bytes")
    (magic, version, manifestLen) = struct.unpack_from(HEADER_FMT, buf, 0)
    if magic != BUNDLE_MAGIC:
        raise BadBundle.fromPair(BAD_BUNDLE_MAGIC, repr(magic))
    if version not in SUPPORTED_BUNDLE_VERSIONS:
        raise BadBundle.fromPair(UNKNOWN_BUNDLE_VERSION, str(version))

    start = HEADER_SIZE + manifestLen
    end = len(buf) - 4
    if start > end:
        raise BadBundle.fromPair(BUNDLE_SHAPE, f"manifest length {manifestLen} exceeds file")
    payload = buf[start:end]
    (crc,) = struct.unpack_from("<I", buf, end)
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise BadBundle.fromPair(BUNDLE_CHECKSUM, f"stored {crc:#010x}")

    try:
        manifest = read_manifest(buf[HEADER_SIZE:start])
    except ValueError as ex:
        raise BadBundle.fromPair(BUNDLE_SHAPE, f"unreadable manifest: {ex}")
    declared = manifest.pop("arrays", {})

    arrays = {}
    offset = 0
    while offset < len(payload):
        (name, arr, offset) = read_array(payload, offset)
        arrays[name] = arr

    if sorted(declared) != sorted(arrays):
        raise BadBundle.fromPair(
            BUNDLE_SHAPE, f"manifest declares {sorted(declared)}, payload has {sorted(arrays)}"
        )
    for name, arr in arrays.items():
        spec = declared[name]
        if list(spec.get("shape", [])) != list(arr.shape) or spec.get("dtype") != DTYPE_NAMES[
            DTYPE_TAGS[arr.dtype]
        ]:
            raise BadBundle.fromPair(
                BUNDLE_SHAPE, f"'{name}' declared {spec}, found {arr.dtype} {arr.shape}"
            )
    return ArtifactBundle(manifest, arrays)
