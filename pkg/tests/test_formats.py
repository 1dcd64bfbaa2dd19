import json
import struct

import numpy as np
import pytest

from trdma import channel, formats
from trdma.errors import DimensionMismatchError, FormatError, InputError


def _bank_bytes(bank):
    return formats.encode_cir(bank.taps, bank.tap_interval, bank.carrier_wavelength)


def test_cir_header_layout(small_bank):
    data = _bank_bytes(small_bank)
    magic, version, n, m, l, dt, lam = struct.unpack_from("<4sIIIIdd", data)
    assert (magic, version, n, m, l) == (b"CIR1", 1, 2, 4, 32)
    assert dt == small_bank.tap_interval
    assert len(data) == struct.calcsize("<4sIIIIdd") + 2 * 4 * 32 * 16


def test_cir_decode_gives_identical_doubles(small_bank):
    taps, dt, lam = formats.decode_cir(_bank_bytes(small_bank))
    np.testing.assert_array_equal(taps, small_bank.taps)
    assert (dt, lam) == (small_bank.tap_interval, small_bank.carrier_wavelength)


def test_truncated_header_names_the_section(small_bank):
    data = _bank_bytes(small_bank)[:14]
    with pytest.raises(FormatError, match="'M'") as info:
        formats.decode_cir(data, "bank.cir")
    assert info.value.section == "M"
    assert isinstance(info.value, InputError)


def test_bad_magic(small_bank):
    data = b"XXXX" + _bank_bytes(small_bank)[4:]
    with pytest.raises(FormatError, match="magic"):
        formats.decode_cir(data)


def test_unsupported_version(small_bank):
    data = bytearray(_bank_bytes(small_bank))
    struct.pack_into("<I", data, 4, 9)
    with pytest.raises(FormatError, match="version"):
        formats.decode_cir(bytes(data))


def test_header_declaring_more_taps_than_stored(small_bank):
    data = _bank_bytes(small_bank)[:-16]
    with pytest.raises(DimensionMismatchError, match="declares 256 taps"):
        formats.decode_cir(data)


def test_trailing_bytes(small_bank):
    with pytest.raises(DimensionMismatchError, match="trailing"):
        formats.decode_cir(_bank_bytes(small_bank) + b"\0" * 16)


def test_cir_json_mirror(small_bank):
    text = formats.encode_cir_json(small_bank.taps, small_bank.tap_interval, small_bank.carrier_wavelength)
    doc = json.loads(text)
    assert doc["magic"] == "CIR1"
    assert (doc["N"], doc["M"], doc["L"]) == (2, 4, 32)
    taps, dt, lam = formats.decode_cir_json(text)
    np.testing.assert_array_equal(taps, small_bank.taps)


def test_cir_json_missing_field(small_bank):
    doc = json.loads(formats.encode_cir_json(small_bank.taps, 1e-8, 0.15))
    del doc["L"]
    with pytest.raises(FormatError, match="'L'"):
        formats.decode_cir_json(json.dumps(doc), "bank.json")


def test_cir_json_size_mismatch(small_bank):
    doc = json.loads(formats.encode_cir_json(small_bank.taps, 1e-8, 0.15))
    doc["L"] = 33
    with pytest.raises(DimensionMismatchError):
        formats.decode_cir_json(json.dumps(doc))


def test_cir_json_not_json():
    with pytest.raises(FormatError, match="json"):
        formats.decode_cir_json("{not json", "bank.json")


def _record():
    seqs = [[(0, np.array([1 + 1j, 2])), (-3, np.array([0.5j]))],
            [(2, np.array([1.0])), (0, np.zeros(0, dtype=np.complex128))]]
    return "ITRDMA", 1e-3, 50, [7, 0], seqs


@pytest.mark.parametrize("json_form", [False, True])
def test_precoder_record(json_form):
    rec = _record()
    if json_form:
        out = formats.decode_precoder_json(formats.encode_precoder_json(*rec))
    else:
        out = formats.decode_precoder(formats.encode_precoder(*rec))
    kind, epsilon, n_max, iters, seqs = out
    assert (kind, epsilon, n_max, list(iters)) == ("ITRDMA", 1e-3, 50, [7, 0])
    for row, ref in zip(seqs, rec[4]):
        for (start, taps), (rstart, rtaps) in zip(row, ref):
            assert start == rstart
            np.testing.assert_array_equal(taps, rtaps)


def test_precoder_truncated_taps():
    data = formats.encode_precoder(*_record())[:-16]
    with pytest.raises(FormatError, match="user 1 antenna 0 taps"):
        formats.decode_precoder(data, "p.pre")


def test_precoder_unknown_kind():
    data = bytearray(formats.encode_precoder(*_record()))
    struct.pack_into("<I", data, 16, 7)
    with pytest.raises(FormatError, match="kind"):
        formats.decode_precoder(bytes(data))


def test_channel_load_reports_format_errors(write_bytes):
    path = write_bytes("broken.cir", b"CIR1")
    with pytest.raises(FormatError, match="version"):
        channel.load(path)


@pytest.mark.parametrize("text", ["5", "[1, 2]", '"CIR1"', "null"])
def test_cir_json_must_be_an_object(text):
    with pytest.raises(FormatError, match="json"):
        formats.decode_cir_json(text, "bank.json")


@pytest.mark.parametrize("key, value", [("N", "two"), ("L", None), ("tap_interval", "fast"), ("M", True)])
def test_cir_json_non_numeric_header(small_bank, key, value):
    doc = json.loads(formats.encode_cir_json(small_bank.taps, 1e-8, 0.15))
    doc[key] = value
    with pytest.raises(FormatError, match="'%s'" % key):
        formats.decode_cir_json(json.dumps(doc), "bank.json")


def test_cir_json_bad_taps(small_bank):
    doc = json.loads(formats.encode_cir_json(small_bank.taps, 1e-8, 0.15))
    doc["taps"] = ["a", "b"]
    with pytest.raises(FormatError, match="taps"):
        formats.decode_cir_json(json.dumps(doc))


@pytest.mark.parametrize("mutate, section", [
    (lambda d: d["sequences"][0][0].__setitem__("start", "zero"), "start"),
    (lambda d: d["sequences"][1].__setitem__(0, 3), "start"),
    (lambda d: d.__setitem__("sequences", 4), "sequences"),
    (lambda d: d["sequences"].__setitem__(0, "row"), "sequences"),
    (lambda d: d.__setitem__("iterations_used", ["x", 0]), "iterations_used"),
    (lambda d: d.__setitem__("epsilon", "small"), "epsilon"),
])
def test_precoder_json_malformed_items(mutate, section):
    doc = json.loads(formats.encode_precoder_json(*_record()))
    mutate(doc)
    with pytest.raises(FormatError, match="'%s'" % section):
        formats.decode_precoder_json(json.dumps(doc), "p.json")


def test_json_load_rejects_non_utf8(write_bytes):
    path = write_bytes("bank.json", b"\xff\xfe{}")
    with pytest.raises(FormatError, match="json"):
        channel.load(path)
