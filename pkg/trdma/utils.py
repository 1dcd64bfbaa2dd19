import csv
import hashlib
import io
import json
import math
import os
import tempfile

import numpy as np


def to_db(ratio):
    """10*log10 of a power ratio. Works on scalars and arrays."""
    return 10.0 * np.log10(ratio)


def from_db(db):
    return 10.0 ** (np.asarray(db, dtype=np.float64) / 10.0)


def mean_db(values):
    """
    Ensemble mean taken in the linear domain, then converted to dB.
    This is the averaging convention written into every sweep output.
    """
    return float(to_db(np.mean(np.asarray(values, dtype=np.float64))))


AVERAGING_NOTE = "ensemble mean of linear power ratios, converted to dB (10*log10)"


def json_safe(doc):
    """Non-finite floats become the strings "inf", "-inf" and "nan"; plain JSON has no token for them."""
    if isinstance(doc, dict):
        return {k: json_safe(v) for k, v in doc.items()}
    if isinstance(doc, (list, tuple)):
        return [json_safe(v) for v in doc]
    if isinstance(doc, float) and not math.isfinite(doc):
        return repr(doc)
    return doc


def dumps(doc, **kwargs):
    return json.dumps(json_safe(doc), allow_nan=False, **kwargs)


def canonical_json(doc):
    return dumps(doc, sort_keys=True, separators=(",", ":"))


def config_hash(doc):
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


def _umask():
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path, data):
    """Write to a temp file in the target directory, then rename over the target."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    dir_name = os.path.dirname(os.path.abspath(path))
    os.makedirs(dir_name, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=dir_name)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def format_csv(columns, rows, comments=()):
    """
    Comment lines start with '#', then a header row, then one row per record.
    Floats are written with repr so a reload gives identical doubles.
    """
    buf = io.StringIO()
    for c in comments:
        buf.write("# %s\n" % c)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(["" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else v
                    for v in (row[c] for c in columns)])
    return buf.getvalue()


def write_csv(path, columns, rows, comments=()):
    atomic_write(path, format_csv(columns, rows, comments))


def read_csv(path):
    """Returns (comments, rows as dicts of strings)."""
    comments, lines = [], []
    with open(path, "r") as f:
        for line in f:
            if line.startswith("#"):
                comments.append(line[1:].strip())
            else:
                lines.append(line)
    return comments, list(csv.DictReader(lines))
