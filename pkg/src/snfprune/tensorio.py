"""Flat binary container for named float32 tensors.

Layout, from byte 0:

* magic ``b"SNF1"``
* unsigned 64-bit little-endian length of the index blob
* UTF-8 JSON index: object mapping tensor name to
  ``{"dtype": "f32", "shape": [...], "offset": n, "nbytes": n}``,
  serialized with sorted keys and no insignificant whitespace
* raw data region: tensor payloads in sorted-name order, contiguous,
  no padding, offsets relative to the region start

Only little-endian float32 payloads are defined. Writing is deterministic:
the same tensors always produce the same bytes.
"""

import json
import os
import struct
import tempfile

import numpy as np

MAGIC = b"SNF1"


class ArchiveError(ValueError):
    """Raised when container bytes do not follow the layout above."""


class WeightArchive:
    """In-memory set of named float32 tensors with dict-like access."""

    def __init__(self, tensors=None):
        self._tensors = {}
        if tensors:
            for name, value in tensors.items():
                self[name] = value

    def __setitem__(self, name, value):
        if not isinstance(name, str) or not name:
            raise ArchiveError("tensor name must be a non-empty string")
        arr = np.asarray(value, dtype=np.float32)
        if arr.ndim == 0 or any(s < 1 for s in arr.shape):
            raise ArchiveError("tensor %r must have a non-empty shape with"
                               " every dimension >= 1" % name)
        self._tensors[name] = np.ascontiguousarray(arr)

    def __getitem__(self, name):
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def __iter__(self):
        return iter(sorted(self._tensors))

    def __len__(self):
        return len(self._tensors)

    def names(self):
        """Tensor names in the canonical (sorted) order."""
        return sorted(self._tensors)

    def items(self):
        for name in self.names():
            yield name, self._tensors[name]

    def __eq__(self, other):
        if not isinstance(other, WeightArchive):
            return NotImplemented
        if self.names() != other.names():
            return False
        for name in self.names():
            a, b = self._tensors[name], other._tensors[name]
            if a.shape != b.shape or a.tobytes() != b.tobytes():
                return False
        return True

    def __ne__(self, other):
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq


def _index_record(arr, offset):
    return {
        "dtype": "f32",
        "shape": [int(s) for s in arr.shape],
        "offset": offset,
        "nbytes": arr.size * 4,
    }


def to_bytes(archive):
    """Serialize a :class:`WeightArchive` to container bytes."""
    index = {}
    chunks = []
    offset = 0
    for name, arr in archive.items():
        index[name] = _index_record(arr, offset)
        payload = arr.astype("<f4", copy=False).tobytes()
        chunks.append(payload)
        offset += len(payload)
    blob = json.dumps(index, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(blob)) + blob + b"".join(chunks)


def _reject_duplicates(pairs):
    seen = {}
    for key, value in pairs:
        if key in seen:
            raise ArchiveError("duplicate tensor name in index: %r" % key)
        seen[key] = value
    return seen


def from_bytes(data):
    """Parse container bytes into a :class:`WeightArchive`."""
    if len(data) < 12:
        raise ArchiveError("container truncated: %d bytes is below the minimum header" % len(data))
    if data[:4] != MAGIC:
        raise ArchiveError("bad magic %r" % data[:4])
    (index_len,) = struct.unpack("<Q", data[4:12])
    if 12 + index_len > len(data):
        raise ArchiveError("container truncated: index claims %d bytes" % index_len)
    try:
        index = json.loads(data[12:12 + index_len].decode("utf-8"),
                           object_pairs_hook=_reject_duplicates)
    except ArchiveError:
        raise
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveError("index is not valid JSON: %s" % exc) from None
    if not isinstance(index, dict):
        raise ArchiveError("index must be a JSON object")

    region = data[12 + index_len:]
    archive = WeightArchive()
    expected_offset = 0
    for name in sorted(index):
        rec = index[name]
        if not isinstance(name, str) or not name:
            raise ArchiveError("tensor name must be a non-empty string")
        if not isinstance(rec, dict):
            raise ArchiveError("index record for %r must be an object" % name)
        missing = {"dtype", "shape", "offset", "nbytes"} - set(rec)
        if missing:
            raise ArchiveError("index record for %r missing %s" % (name, sorted(missing)))
        if rec["dtype"] != "f32":
            raise ArchiveError("unsupported dtype %r for %r" % (rec["dtype"], name))
        shape = rec["shape"]
        if (not isinstance(shape, list) or not shape
                or any(not isinstance(s, int) or isinstance(s, bool) or s < 1 for s in shape)):
            raise ArchiveError("bad shape %r for %r" % (shape, name))
        count = 1
        for s in shape:
            count *= s
        if rec["nbytes"] != count * 4:
            raise ArchiveError("nbytes %r for %r does not match shape %r"
                               % (rec["nbytes"], name, shape))
        if rec["offset"] != expected_offset:
            raise ArchiveError("offset %r for %r is not contiguous (expected %d)"
                               % (rec["offset"], name, expected_offset))
        end = expected_offset + rec["nbytes"]
        if end > len(region):
            raise ArchiveError("data region truncated: %r needs bytes up to %d" % (name, end))
        payload = region[expected_offset:end]
        arr = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
        archive[name] = arr
        expected_offset = end
    if expected_offset != len(region):
        raise ArchiveError("trailing bytes after data region: %d unused"
                           % (len(region) - expected_offset))
    return archive


def write_archive(archive, path):
    """Write ``archive`` to ``path`` atomically (temp file + rename)."""
    data = to_bytes(archive)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".snf-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_archive(path):
    """Read a container file from ``path``."""
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
