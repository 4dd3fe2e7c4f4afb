"""Session recording files.

A session file is UTF-8 text: ``#``-prefixed header lines, one column-name
line, then one comma-separated row per sample::

    # gaitphase-session 1
    # sample_rate_hz=200
    # subject=S01
    # leg=right
    # stair_slope_deg=30.0
    # units=s,m/s^2,m/s^2,m/s^2,deg/s,deg/s,deg/s,force,force,force,-
    timestamp_s,accel_x,accel_y,accel_z,gyro_x,gyro_y,gyro_z,fsr_heel,fsr_toe,fsr_ball,annotation
    0.0,0.12,9.79,...,LW

Floats are written with Python's shortest round-trip repr, so write -> read
is lossless. ``annotation`` is ``none`` or the locomotion mode the wearer
switched to at that sample (LW, SA, SD). The first annotation sets the
initial mode; later ones mark mode changes. Slope magnitude for SA/SD comes
from ``stair_slope_deg`` (SA positive, SD negative, LW 0).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SessionParseError, UnsupportedRateError

MAGIC = "gaitphase-session"
VERSION = 1
SAMPLE_RATE = 200.0
SPACING_TOLERANCE = 0.01
COLUMNS = (
    "timestamp_s", "accel_x", "accel_y", "accel_z", "gyro_x", "gyro_y", "gyro_z",
    "fsr_heel", "fsr_toe", "fsr_ball", "annotation",
)
UNITS = ("s", "m/s^2", "m/s^2", "m/s^2", "deg/s", "deg/s", "deg/s", "force", "force", "force", "-")
NUMERIC = COLUMNS[1:-1]
MODES = ("LW", "SA", "SD")
ANNOTATIONS = ("none",) + MODES


@dataclass
class SessionFile:
    """Full contents of a session file."""

    subject: str
    leg: str
    stair_slope: float
    timestamps: np.ndarray
    data: dict[str, np.ndarray]
    annotations: list[str]
    sample_rate: float = SAMPLE_RATE
    extra_header: dict[str, str] = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.timestamps)


@dataclass
class SessionRecording:
    """Sagittal-plane view of a session used by the pipeline."""

    subject: str
    leg: str
    stair_slope: float
    sample_rate: float
    timestamps: np.ndarray
    accel_x: np.ndarray
    accel_y: np.ndarray
    gyro_z: np.ndarray
    fsr_heel: np.ndarray
    fsr_toe: np.ndarray
    fsr_ball: np.ndarray
    annotations: list[str]
    source: str = ""

    @property
    def n_samples(self) -> int:
        return len(self.timestamps)

    def annotation_indices(self) -> list[int]:
        return [i for i, a in enumerate(self.annotations) if a != "none"]

    def mode_change_indices(self) -> list[int]:
        """Annotated mode switches, excluding the initial mode at the first annotation."""
        idx = self.annotation_indices()
        return idx[1:]

    def mode_series(self) -> np.ndarray:
        """Per-sample mode index (0 LW, 1 SA, 2 SD); -1 before the first annotation."""
        out = np.full(self.n_samples, -1, dtype=np.int64)
        current = -1
        for i, a in enumerate(self.annotations):
            if a != "none":
                current = MODES.index(a)
            out[i] = current
        return out

    def slope_series(self) -> np.ndarray:
        modes = self.mode_series()
        sign = np.array([0.0, 1.0, -1.0])
        out = np.where(modes >= 0, sign[np.clip(modes, 0, 2)] * abs(self.stair_slope), np.nan)
        return out


def _fmt(v: float) -> str:
    return repr(float(v))


def write_session(session: SessionFile, path=None) -> str:
    """Serialize ``session``; writes to ``path`` when given and returns the text."""
    buf = io.StringIO()
    buf.write(f"# {MAGIC} {VERSION}\n")
    buf.write(f"# sample_rate_hz={_fmt_rate(session.sample_rate)}\n")
    buf.write(f"# subject={session.subject}\n")
    buf.write(f"# leg={session.leg}\n")
    buf.write(f"# stair_slope_deg={_fmt(session.stair_slope)}\n")
    for key in sorted(session.extra_header):
        buf.write(f"# {key}={session.extra_header[key]}\n")
    buf.write("# units=" + ",".join(UNITS) + "\n")
    buf.write(",".join(COLUMNS) + "\n")
    cols = [session.timestamps] + [session.data[c] for c in NUMERIC]
    lists = [np.asarray(c, dtype=float).tolist() for c in cols]
    for i, ann in enumerate(session.annotations):
        buf.write(",".join(repr(col[i]) for col in lists))
        buf.write("," + ann + "\n")
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _fmt_rate(rate: float) -> str:
    return str(int(rate)) if float(rate).is_integer() else repr(float(rate))


def read_session(path=None, text: str | None = None) -> SessionFile:
    """Parse a session file, validating header, rows and timestamp spacing."""
    if text is None:
        text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    header: dict[str, str] = {}
    lineno = 0
    if not lines or not lines[0].startswith("#"):
        raise SessionParseError("missing session header", 1)
    magic = lines[0].lstrip("#").split()
    if len(magic) != 2 or magic[0] != MAGIC:
        raise SessionParseError("not a gaitphase session file", 1)
    if magic[1] != str(VERSION):
        raise SessionParseError(f"unsupported session format version {magic[1]}", 1)
    lineno = 1
    while lineno < len(lines) and lines[lineno].startswith("#"):
        body = lines[lineno].lstrip("#").strip()
        if "=" not in body:
            raise SessionParseError(f"malformed header line {body!r}", lineno + 1)
        key, value = body.split("=", 1)
        header[key.strip()] = value.strip()
        lineno += 1
    for key in ("sample_rate_hz", "subject", "leg", "stair_slope_deg"):
        if key not in header:
            raise SessionParseError(f"header field {key!r} missing", lineno)
    try:
        rate = float(header.pop("sample_rate_hz"))
        slope = float(header.pop("stair_slope_deg"))
    except ValueError as exc:
        raise SessionParseError(f"bad header value: {exc}", lineno) from None
    if rate != SAMPLE_RATE:
        raise UnsupportedRateError(f"sample rate {rate:g} Hz is not supported (expected {SAMPLE_RATE:g} Hz)")
    subject = header.pop("subject")
    leg = header.pop("leg")
    header.pop("units", None)

    if lineno >= len(lines) or lines[lineno].strip() != ",".join(COLUMNS):
        raise SessionParseError("column line does not match the expected columns", lineno + 1)
    lineno += 1

    n_cols = len(COLUMNS)
    rows = []
    annotations = []
    expected_dt = 1.0 / rate
    prev_t = None
    for k in range(lineno, len(lines)):
        line = lines[k]
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != n_cols:
            raise SessionParseError(f"expected {n_cols} fields, got {len(parts)}", k + 1)
        try:
            values = [float(p) for p in parts[:-1]]
        except ValueError as exc:
            raise SessionParseError(str(exc), k + 1) from None
        if not all(math.isfinite(v) for v in values):
            raise SessionParseError("non-finite value", k + 1)
        ann = parts[-1].strip()
        if ann not in ANNOTATIONS:
            raise SessionParseError(f"unknown annotation {ann!r}", k + 1)
        t = values[0]
        if prev_t is not None:
            dt = t - prev_t
            if dt <= 0:
                raise SessionParseError("timestamps are not strictly increasing", k + 1)
            if abs(dt - expected_dt) > SPACING_TOLERANCE * expected_dt:
                raise SessionParseError(f"sample spacing {dt:.6g} s deviates from {expected_dt:g} s", k + 1)
        prev_t = t
        rows.append(values)
        annotations.append(ann)
    if not rows:
        raise SessionParseError("session contains no samples", len(lines))
    arr = np.array(rows, dtype=float)
    data = {c: arr[:, j + 1].copy() for j, c in enumerate(NUMERIC)}
    return SessionFile(subject, leg, slope, arr[:, 0].copy(), data, annotations, rate, header)


def to_recording(session: SessionFile, source: str = "") -> SessionRecording:
    d = session.data
    return SessionRecording(
        subject=session.subject,
        leg=session.leg,
        stair_slope=session.stair_slope,
        sample_rate=session.sample_rate,
        timestamps=session.timestamps,
        accel_x=d["accel_x"],
        accel_y=d["accel_y"],
        gyro_z=d["gyro_z"],
        fsr_heel=d["fsr_heel"],
        fsr_toe=d["fsr_toe"],
        fsr_ball=d["fsr_ball"],
        annotations=list(session.annotations),
        source=source,
    )


def ingest(path) -> SessionRecording:
    """Read a session file and keep only the sagittal IMU channels and FSRs."""
    return to_recording(read_session(path), source=str(path))
