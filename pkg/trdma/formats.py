"""
Low level codecs for the CIR bank file and the precoder file.

CIR binary layout (little-endian):
    magic "CIR1" | version u32 | N u32 | M u32 | L u32 | tap_interval f64 | carrier_wavelength f64
    then N*M*L taps as (f64 re, f64 im), user-major, antenna-middle, tap-minor.

Precoder binary layout (little-endian):
    magic "PRE1" | version u32 | N u32 | M u32 | kind u32 | epsilon f64 | n_max u32
    then for each target user: iterations_used u32, and for each antenna:
    start i32 | length u32 | length taps as (f64 re, f64 im).

The JSON mirrors use the same field names and round-trip to identical doubles.
"""
import json
import struct

import numpy as np

from .errors import DimensionMismatchError, FormatError

CIR_MAGIC = b"CIR1"
PRECODER_MAGIC = b"PRE1"
CIR_VERSION = 1
PRECODER_VERSION = 1

PRECODER_KINDS = ("TR", "ITRDMA")

_TAP_DTYPE = np.dtype("<c16")


class _Reader:
    """Walks a byte buffer section by section so truncation errors can name what is missing."""

    def __init__(self, data, path):
        self.data = data
        self.path = path
        self.pos = 0

    def take(self, fmt, section):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise FormatError(self.path, section, "file ends at byte %d" % len(self.data))
        out = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return out[0] if len(out) == 1 else out

    def taps(self, count, section, expected_total=None):
        size = count * _TAP_DTYPE.itemsize
        if self.pos + size > len(self.data):
            available = (len(self.data) - self.pos) // _TAP_DTYPE.itemsize
            if expected_total is not None:
                raise DimensionMismatchError("%s: header declares %d taps but only %d are stored"
                                             % (self.path, expected_total, available))
            raise FormatError(self.path, section, "needs %d taps, %d stored" % (count, available))
        out = np.frombuffer(self.data, dtype=_TAP_DTYPE, count=count, offset=self.pos).astype(np.complex128)
        self.pos += size
        return out

    def remaining(self):
        return len(self.data) - self.pos


def _check_magic(reader, magic, version):
    got = reader.take("<4s", "magic")
    if got != magic:
        raise FormatError(reader.path, "magic", "expected %r, got %r" % (magic, got))
    ver = reader.take("<I", "version")
    if ver != version:
        raise FormatError(reader.path, "version", "unsupported version %d" % ver)


def encode_cir(taps, tap_interval, carrier_wavelength):
    n, m, l = taps.shape
    head = struct.pack("<4sIIIIdd", CIR_MAGIC, CIR_VERSION, n, m, l,
                       float(tap_interval), float(carrier_wavelength))
    return head + np.ascontiguousarray(taps, dtype=_TAP_DTYPE).tobytes()


def decode_cir(data, path="<bytes>"):
    """Returns (taps[N, M, L], tap_interval, carrier_wavelength)."""
    r = _Reader(data, path)
    _check_magic(r, CIR_MAGIC, CIR_VERSION)
    n = r.take("<I", "N")
    m = r.take("<I", "M")
    l = r.take("<I", "L")
    tap_interval = r.take("<d", "tap_interval")
    wavelength = r.take("<d", "carrier_wavelength")
    total = n * m * l
    taps = r.taps(total, "taps", expected_total=total)
    if r.remaining():
        raise DimensionMismatchError("%s: %d trailing bytes after %d declared taps" % (path, r.remaining(), total))
    return taps.reshape(n, m, l), tap_interval, wavelength


def _pairs(arr):
    return [[float(z.real), float(z.imag)] for z in np.asarray(arr).reshape(-1)]


def _from_pairs(pairs, path, section):
    try:
        arr = np.array(pairs, dtype=np.float64).reshape(-1, 2)
    except (TypeError, ValueError) as e:
        raise FormatError(path, section, str(e))
    return arr[:, 0] + 1j * arr[:, 1]


def encode_cir_json(taps, tap_interval, carrier_wavelength):
    n, m, l = taps.shape
    doc = {
        "magic": CIR_MAGIC.decode(), "version": CIR_VERSION,
        "N": n, "M": m, "L": l,
        "tap_interval": float(tap_interval),
        "carrier_wavelength": float(carrier_wavelength),
        "taps": _pairs(taps),
    }
    return json.dumps(doc)


def _document(text, path):
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(path, "json", str(e))
    try:
        doc = json.loads(text)
    except ValueError as e:
        raise FormatError(path, "json", str(e))
    if not isinstance(doc, dict):
        raise FormatError(path, "json", "expected an object, got %s" % type(doc).__name__)
    return doc


def _field(doc, key, path):
    if not isinstance(doc, dict) or key not in doc:
        raise FormatError(path, key)
    return doc[key]


def _number(doc, key, path, cast=int):
    value = _field(doc, key, path)
    if isinstance(value, bool):
        raise FormatError(path, key, "not a number: %r" % (value,))
    try:
        return cast(value)
    except (TypeError, ValueError) as e:
        raise FormatError(path, key, str(e))


def _list(doc, key, path):
    value = _field(doc, key, path)
    if not isinstance(value, list):
        raise FormatError(path, key, "expected a list")
    return value


def decode_cir_json(text, path="<json>"):
    doc = _document(text, path)
    if _field(doc, "magic", path) != CIR_MAGIC.decode():
        raise FormatError(path, "magic")
    if _field(doc, "version", path) != CIR_VERSION:
        raise FormatError(path, "version")
    n, m, l = (_number(doc, k, path) for k in ("N", "M", "L"))
    if min(n, m, l) < 0:
        raise FormatError(path, "header", "negative dimension")
    tap_interval = _number(doc, "tap_interval", path, float)
    wavelength = _number(doc, "carrier_wavelength", path, float)
    taps = _from_pairs(_field(doc, "taps", path), path, "taps")
    if taps.size != n * m * l:
        raise DimensionMismatchError("%s: header declares %d taps but %d are stored" % (path, n * m * l, taps.size))
    return taps.reshape(n, m, l), tap_interval, wavelength


"""
Precoder records. A record is (kind, epsilon, n_max, iterations_used, sequences)
where sequences[i0][m] is a (start, taps) pair.
"""
def encode_precoder(kind, epsilon, n_max, iterations_used, sequences):
    n = len(sequences)
    m = len(sequences[0]) if n else 0
    out = [struct.pack("<4sIIIIdI", PRECODER_MAGIC, PRECODER_VERSION, n, m,
                       PRECODER_KINDS.index(kind), float(epsilon), int(n_max))]
    for i0 in range(n):
        out.append(struct.pack("<I", int(iterations_used[i0])))
        for start, taps in sequences[i0]:
            out.append(struct.pack("<iI", int(start), len(taps)))
            out.append(np.ascontiguousarray(taps, dtype=_TAP_DTYPE).tobytes())
    return b"".join(out)


def decode_precoder(data, path="<bytes>"):
    r = _Reader(data, path)
    _check_magic(r, PRECODER_MAGIC, PRECODER_VERSION)
    n = r.take("<I", "N")
    m = r.take("<I", "M")
    kind_id = r.take("<I", "kind")
    if kind_id >= len(PRECODER_KINDS):
        raise FormatError(path, "kind", "unknown kind id %d" % kind_id)
    epsilon = r.take("<d", "epsilon")
    n_max = r.take("<I", "n_max")
    iterations_used, sequences = [], []
    for i0 in range(n):
        iterations_used.append(r.take("<I", "user %d iterations" % i0))
        row = []
        for a in range(m):
            section = "user %d antenna %d" % (i0, a)
            start = r.take("<i", section + " start")
            length = r.take("<I", section + " length")
            row.append((start, r.taps(length, section + " taps")))
        sequences.append(row)
    if r.remaining():
        raise DimensionMismatchError("%s: %d trailing bytes after %d x %d sequences" % (path, r.remaining(), n, m))
    return PRECODER_KINDS[kind_id], epsilon, n_max, iterations_used, sequences


def encode_precoder_json(kind, epsilon, n_max, iterations_used, sequences):
    doc = {
        "magic": PRECODER_MAGIC.decode(), "version": PRECODER_VERSION,
        "N": len(sequences), "M": len(sequences[0]) if sequences else 0,
        "kind": kind, "epsilon": float(epsilon), "n_max": int(n_max),
        "iterations_used": [int(x) for x in iterations_used],
        "sequences": [[{"start": int(start), "taps": _pairs(taps)} for start, taps in row] for row in sequences],
    }
    return json.dumps(doc)


def decode_precoder_json(text, path="<json>"):
    doc = _document(text, path)
    if _field(doc, "magic", path) != PRECODER_MAGIC.decode():
        raise FormatError(path, "magic")
    if _field(doc, "version", path) != PRECODER_VERSION:
        raise FormatError(path, "version")
    n, m = _number(doc, "N", path), _number(doc, "M", path)
    kind = _field(doc, "kind", path)
    if kind not in PRECODER_KINDS:
        raise FormatError(path, "kind", "unknown kind %r" % (kind,))
    rows = _list(doc, "sequences", path)
    iterations_used = _list(doc, "iterations_used", path)
    if any(not isinstance(row, list) for row in rows):
        raise FormatError(path, "sequences", "expected one list per user")
    if len(rows) != n or len(iterations_used) != n or any(len(row) != m for row in rows):
        raise DimensionMismatchError("%s: header declares %d x %d sequences" % (path, n, m))
    sequences = [[(_number(item, "start", path), _from_pairs(_field(item, "taps", path), path, "taps"))
                  for item in row] for row in rows]
    try:
        iterations_used = [int(x) for x in iterations_used]
    except (TypeError, ValueError) as e:
        raise FormatError(path, "iterations_used", str(e))
    return kind, _number(doc, "epsilon", path, float), _number(doc, "n_max", path), iterations_used, sequences
