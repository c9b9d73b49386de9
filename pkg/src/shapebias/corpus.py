"""File formats: binary PPM images, probe-triple manifests, bias record CSVs."""

import csv
import io
import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DecodeError
from .stimgen import EXTERNAL_SPEC, ProbeTriple, Stimulus

MANIFEST_HEADER = ["triple_id", "probe", "shape_match", "color_match", "background_id"]
RECORD_HEADER = ["model_kind", "seed", "step", "dataset", "bias", "accuracy"]
MODEL_KINDS = ("IB", "MN")

_PPM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def ppm_write(image):
    """Encode an (H, W, 3) uint8 array as binary PPM (P6, maxval 255)."""
    image = np.asarray(image)
    if image.dtype != np.uint8 or image.ndim != 3 or image.shape[2] != 3:
        raise ContractError(f"expected (H, W, 3) uint8 image, got {image.dtype} {image.shape}")
    h, w, _ = image.shape
    return b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(image).tobytes()


def ppm_read(blob):
    """Decode a binary PPM produced by :func:`ppm_write` (comments in the header allowed)."""
    pos, fields = 0, []
    for _ in range(4):
        m = _PPM_TOKEN.match(blob, pos)
        if m is None:
            raise DecodeError("malformed PPM header")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P6":
        raise DecodeError(f"not a binary PPM (magic {fields[0]!r})")
    try:
        w, h, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise DecodeError("non-integer PPM header field") from None
    if maxval != 255:
        raise DecodeError(f"unsupported maxval {maxval}")
    if w <= 0 or h <= 0:
        raise DecodeError("PPM dimensions must be positive")
    if pos >= len(blob) or blob[pos:pos + 1] not in (b" ", b"\n", b"\r", b"\t"):
        raise DecodeError("missing whitespace after PPM header")
    payload = blob[pos + 1:]
    need = 3 * w * h
    if len(payload) < need:
        raise DecodeError(f"truncated PPM payload: {len(payload)} of {need} bytes")
    if len(payload) > need:
        raise DecodeError("trailing bytes after PPM payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).copy()


def ppm_save(path, image):
    with open(path, "wb") as fh:
        fh.write(ppm_write(image))


def ppm_load(path):
    with open(path, "rb") as fh:
        return ppm_read(fh.read())


def load_manifest(path):
    """Read a triple manifest; image paths are relative to the manifest's directory.

    Loaded stimuli carry sentinel ids, so id-level triple invariants are not
    checked for them.
    """
    base = os.path.dirname(os.path.abspath(path))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise DecodeError(f"{path}: manifest header must be {','.join(MANIFEST_HEADER)}, got {header}")
        triples, seen = [], set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise DecodeError(f"{path}:{lineno}: expected {len(MANIFEST_HEADER)} columns")
            tid = row[0]
            try:
                triple_id, bg = int(tid), int(row[4])
            except ValueError:
                raise DecodeError(f"{path}:{lineno}: triple {tid}: non-integer id or background") from None
            if triple_id in seen:
                raise DecodeError(f"{path}:{lineno}: duplicate triple_id {triple_id}")
            seen.add(triple_id)
            stims = []
            for rel in row[1:4]:
                full = os.path.join(base, rel)
                try:
                    image = ppm_load(full)
                except (OSError, DecodeError) as exc:
                    raise DecodeError(f"{path}:{lineno}: triple {triple_id}: cannot load {rel}: {exc}") from exc
                stims.append(Stimulus(EXTERNAL_SPEC, image, source=full))
            triples.append(ProbeTriple(stims[0], stims[1], stims[2], triple_id, bg))
    return triples


def write_manifest(path, triples, image_subdir="images"):
    """Write each triple's images as PPM beside the manifest, then the manifest itself."""
    base = os.path.dirname(os.path.abspath(path))
    os.makedirs(os.path.join(base, image_subdir), exist_ok=True)
    rows = []
    for t in triples:
        names = []
        for role, stim in (("probe", t.probe), ("shape", t.shape_match), ("color", t.color_match)):
            rel = f"{image_subdir}/t{t.triple_id:04d}_{role}.ppm"
            ppm_save(os.path.join(base, rel), stim.image)
            names.append(rel)
        rows.append([t.triple_id, *names, t.background_id])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        writer.writerows(rows)


@dataclass(frozen=True)
class BiasRecord:
    model_kind: str
    seed: int
    step: int
    dataset: str
    bias: float
    accuracy: float

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ContractError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        for name in ("bias", "accuracy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ContractError(f"{name}={v} outside [0, 1]")

    @property
    def key(self):
        return (self.model_kind, self.seed, self.step, self.dataset)


def records_dumps(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_HEADER)
    seen = set()
    for r in records:
        if r.key in seen:
            raise ContractError(f"duplicate record key {r.key}")
        seen.add(r.key)
        # repr gives the shortest string that round-trips
        writer.writerow([r.model_kind, r.seed, r.step, r.dataset, repr(float(r.bias)), repr(float(r.accuracy))])
    return buf.getvalue()


def records_write(path, records):
    text = records_dumps(records)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def records_loads(text, source="<records>"):
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != RECORD_HEADER:
        raise DecodeError(f"{source}: records header must be {','.join(RECORD_HEADER)}")
    out, seen = [], set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(RECORD_HEADER):
            raise DecodeError(f"{source}:{lineno}: expected {len(RECORD_HEADER)} columns")
        try:
            rec = BiasRecord(row[0], int(row[1]), int(row[2]), row[3], float(row[4]), float(row[5]))
        except ValueError as exc:  # includes ContractError range failures
            raise DecodeError(f"{source}:{lineno}: {exc}") from exc
        if rec.key in seen:
            raise DecodeError(f"{source}:{lineno}: duplicate record {rec.key}")
        seen.add(rec.key)
        out.append(rec)
    return out


def records_read(path):
    with open(path, newline="") as fh:
        return records_loads(fh.read(), source=path)
