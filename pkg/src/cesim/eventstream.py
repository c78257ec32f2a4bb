"""Bit-exact time-tag serialization and windowed coincidence matching.

Wire format ``CESIMTT1``, version 1
-----------------------------------
header (10 bytes):
    bytes 0..7   magic ``b"CESIMTT1"``
    bytes 8..9   little-endian u16 version, currently 1
records (16 bytes each, little-endian, packed):
    u64  t_ps       timestamp in integer picoseconds
    u8   channel    0 = D1 (port A), 1 = D2 (port B)
    u8   flags      bit0: frequency branch of the detected component
                    (1 = positive branch); bit1: polarization at the
                    analyzer input (0 = H, 1 = V); bit2+ reserved
    u32  pair_id    ground-truth pair identifier, 0xFFFFFFFF if absent
    u16  reserved   written as 0, ignored on read

Timestamps must be non-decreasing per channel within one file.

In hardware the frequency branch of a click would be inferred from the
heterodyne beat; here it rides in the flags because the simulator, not the
detector, produces the events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path as FsPath
from typing import Iterable, Sequence, Union

import numpy as np

from .detection import (
    CoincidenceSetting,
    Outcome,
    SelectionRule,
    accepted_route_split,
    lone_click_route_split,
)
from .interferometer import EraserSetting
from .optics import Detune, ModeLabel, Path, Pol, Port
from .source import PairBatch

MAGIC = b"CESIMTT1"
VERSION = 1
NO_PAIR_ID = 0xFFFF_FFFF

FLAG_BRANCH_PLUS = 0x01
FLAG_POL_V = 0x02

RECORD_DTYPE = np.dtype(
    [
        ("t_ps", "<u8"),
        ("channel", "u1"),
        ("flags", "u1"),
        ("pair_id", "<u4"),
        ("reserved", "<u2"),
    ]
)
RECORD_SIZE = RECORD_DTYPE.itemsize  # 16
HEADER_SIZE = len(MAGIC) + 2  # 10


class StreamFormatError(Exception):
    """Base class for time-tag serialization errors."""


class BadMagicError(StreamFormatError):
    pass


class VersionMismatchError(StreamFormatError):
    pass


class TruncatedRecordError(StreamFormatError):
    pass


class TimestampOrderError(StreamFormatError):
    pass


@dataclass(frozen=True, slots=True)
class TimeTagRecord:
    t_ps: int
    channel: int
    flags: int
    pair_id: int = NO_PAIR_ID


class TagStream:
    """Decoded click stream backed by a structured numpy array."""

    __slots__ = ("_array",)

    def __init__(self, array: np.ndarray):
        if array.dtype != RECORD_DTYPE:
            array = array.astype(RECORD_DTYPE)
        self._array = array

    @classmethod
    def from_records(cls, records: Iterable[TimeTagRecord]) -> "TagStream":
        records = list(records)
        array = np.zeros(len(records), dtype=RECORD_DTYPE)
        for i, rec in enumerate(records):
            array[i] = (rec.t_ps, rec.channel, rec.flags, rec.pair_id, 0)
        return cls(array)

    @classmethod
    def from_fields(cls, t_ps, channel, flags, pair_id) -> "TagStream":
        n = len(t_ps)
        array = np.zeros(n, dtype=RECORD_DTYPE)
        array["t_ps"] = t_ps
        array["channel"] = channel
        array["flags"] = flags
        array["pair_id"] = pair_id
        return cls(array)

    @property
    def array(self) -> np.ndarray:
        return self._array

    def to_records(self) -> list[TimeTagRecord]:
        return [
            TimeTagRecord(int(r["t_ps"]), int(r["channel"]), int(r["flags"]), int(r["pair_id"]))
            for r in self._array
        ]

    def channel_sorted(self) -> bool:
        for ch in (0, 1):
            t = self._array["t_ps"][self._array["channel"] == ch]
            if len(t) > 1 and np.any(np.diff(t.astype(np.int64)) < 0):
                return False
        return True

    def __len__(self) -> int:
        return len(self._array)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TagStream):
            return NotImplemented
        return len(self) == len(other) and bool(np.all(self._array == other._array))

    def __repr__(self) -> str:
        return f"TagStream({len(self)} records)"


def encode_stream(stream: Union[TagStream, Iterable[TimeTagRecord]]) -> bytes:
    """Serialize a per-channel time-ordered stream to the wire format."""
    if not isinstance(stream, TagStream):
        stream = TagStream.from_records(stream)
    if not stream.channel_sorted():
        raise TimestampOrderError("records must be non-decreasing in time per channel")
    header = MAGIC + VERSION.to_bytes(2, "little")
    body = stream.array.tobytes()
    return header + body


def decode_stream(data: bytes) -> TagStream:
    """Parse the wire format back into a stream, validating as it goes."""
    if len(data) < HEADER_SIZE or data[: len(MAGIC)] != MAGIC:
        raise BadMagicError("not a CESIMTT1 stream")
    version = int.from_bytes(data[len(MAGIC) : HEADER_SIZE], "little")
    if version != VERSION:
        raise VersionMismatchError(f"unsupported stream version {version}")
    body = data[HEADER_SIZE:]
    if len(body) % RECORD_SIZE != 0:
        raise TruncatedRecordError(
            f"stream body of {len(body)} bytes is not a whole number of {RECORD_SIZE}-byte records"
        )
    array = np.frombuffer(body, dtype=RECORD_DTYPE).copy()
    stream = TagStream(array)
    if not stream.channel_sorted():
        raise TimestampOrderError("timestamp regression within a channel")
    return stream


class RejectReason(Enum):
    NONE = "none"
    SAME_PORT = "same-port"
    CROSS_POLARIZATION = "cross-polarization"
    SAME_DETUNING = "same-detuning"
    OUT_OF_WINDOW = "out-of-window"


@dataclass(frozen=True, slots=True)
class CoincidenceRecord:
    t1_ps: int
    t2_ps: int
    tau_si_ps: int
    accepted: bool
    reject_reason: RejectReason
    pair_id_1: int = NO_PAIR_ID
    pair_id_2: int = NO_PAIR_ID


def label_from_click(channel: int, flags: int) -> ModeLabel:
    """Reconstruct the detected mode tag from a serialized click.

    The arm of origin follows from (port, polarization): port A sees arm 1
    as V and arm 2 as H, port B the reverse.
    """
    pol = Pol.V if flags & FLAG_POL_V else Pol.H
    detune = Detune.PLUS if flags & FLAG_BRANCH_PLUS else Detune.MINUS
    if channel == Port.A.value:
        path = Path.PATH1 if pol is Pol.V else Path.PATH2
    else:
        path = Path.PATH1 if pol is Pol.H else Path.PATH2
    return ModeLabel(path, pol, detune)


def match_coincidences(
    stream: TagStream, window_ps: int, rule: SelectionRule | None = None
) -> list[CoincidenceRecord]:
    """Single pass over the two detector channels.

    Every D1 click is paired with its nearest unconsumed D2 click, ties
    breaking toward the earlier D2.  Candidates beyond the window are
    reported as out-of-window; candidates inside it are checked against the
    selection rule on the reconstructed mode tags.  Only accepted pairs
    consume their clicks, so each click joins at most one accepted
    coincidence.
    """
    if window_ps < 0:
        raise ValueError("window must be non-negative")
    rule = rule or SelectionRule.heterodyne()
    if not stream.channel_sorted():
        raise TimestampOrderError("matcher input must be time-ordered per channel")

    arr = stream.array
    mask2 = arr["channel"] == 1
    d1 = arr[~mask2]
    d2 = arr[mask2]
    t1 = d1["t_ps"].astype(np.int64)
    t2 = d2["t_ps"].astype(np.int64)
    n2 = len(t2)
    if n2 == 0 or len(t1) == 0:
        return []

    f1 = d1["flags"].tolist()
    f2 = d2["flags"].tolist()
    id1 = d1["pair_id"].tolist()
    id2 = d2["pair_id"].tolist()
    t1_list = t1.tolist()
    t2_list = t2.tolist()
    insert = np.searchsorted(t2, t1).tolist()

    used = bytearray(n2)
    out: list[CoincidenceRecord] = []
    for i, ti in enumerate(t1_list):
        # nearest unconsumed D2 on each side of the insertion point
        j_right = insert[i]
        while j_right < n2 and used[j_right]:
            j_right += 1
        j_left = insert[i] - 1
        while j_left >= 0 and used[j_left]:
            j_left -= 1
        if j_left < 0 and j_right >= n2:
            continue
        if j_left < 0:
            j = j_right
        elif j_right >= n2:
            j = j_left
        else:
            dl = ti - t2_list[j_left]
            dr = t2_list[j_right] - ti
            j = j_left if dl <= dr else j_right  # tie goes to the earlier D2
        dt = t2_list[j] - ti
        if abs(dt) > window_ps:
            out.append(
                CoincidenceRecord(ti, t2_list[j], dt, False, RejectReason.OUT_OF_WINDOW, id1[i], id2[j])
            )
            continue
        tag_a = label_from_click(0, f1[i])
        tag_b = label_from_click(1, f2[j])
        if rule.accepts(tag_a, tag_b):
            used[j] = 1
            out.append(CoincidenceRecord(ti, t2_list[j], dt, True, RejectReason.NONE, id1[i], id2[j]))
        else:
            if tag_a.pol is not tag_b.pol:
                reason = RejectReason.CROSS_POLARIZATION
            elif tag_a.detune is tag_b.detune:
                reason = RejectReason.SAME_DETUNING
            else:
                reason = RejectReason.NONE  # custom rule rejected a tag-compatible pair
            out.append(CoincidenceRecord(ti, t2_list[j], dt, False, reason, id1[i], id2[j]))
    return out


@dataclass(frozen=True, slots=True)
class TauHistogram:
    bin_lo_ps: np.ndarray
    bin_hi_ps: np.ndarray
    counts: np.ndarray

    @property
    def centers_ps(self) -> np.ndarray:
        return 0.5 * (self.bin_lo_ps + self.bin_hi_ps)


def histogram_tau_si(
    records: Sequence[CoincidenceRecord], bin_ps: float, range_ps: float
) -> TauHistogram:
    """Histogram of the inter-detector delays of accepted coincidences.

    Bins are centered on zero so a delta-distributed delay lands entirely
    in the central bin; delays beyond +-range_ps are dropped.
    """
    if bin_ps <= 0 or not math.isfinite(bin_ps):
        raise ValueError("bin width must be positive")
    if range_ps <= 0 or not math.isfinite(range_ps):
        raise ValueError("histogram range must be positive")
    if any(not rec.accepted for rec in records):
        raise ValueError("histogram expects accepted coincidence records only")
    n_side = int(math.ceil(range_ps / bin_ps))
    n_bins = 2 * n_side + 1
    counts = np.zeros(n_bins, dtype=np.int64)
    if records:
        taus = np.array([rec.tau_si_ps for rec in records], dtype=np.float64)
        k = np.floor(taus / bin_ps + 0.5).astype(np.int64)
        keep = (k >= -n_side) & (k <= n_side)
        counts = np.bincount((k[keep] + n_side).astype(np.int64), minlength=n_bins)
    k_axis = np.arange(-n_side, n_side + 1)
    lo = (k_axis - 0.5) * bin_ps
    hi = (k_axis + 0.5) * bin_ps
    return TauHistogram(lo, hi, counts.astype(np.int64))


def fit_decay_ps(hist: TauHistogram, min_count: int = 10) -> float:
    """Decay constant of the positive-side exponential envelope, fitted as a
    weighted straight line through the log counts."""
    centers = hist.centers_ps
    mask = (centers > 0) & (hist.counts >= min_count)
    if int(mask.sum()) < 2:
        raise ValueError("not enough populated bins to fit a decay")
    x = centers[mask]
    y = np.log(hist.counts[mask].astype(np.float64))
    w = np.sqrt(hist.counts[mask].astype(np.float64))
    slope, _ = np.polyfit(x, y, 1, w=w)
    if slope >= 0:
        raise ValueError("histogram envelope does not decay")
    return -1.0 / slope


class _ClickBuffer:
    def __init__(self):
        self.t: list[np.ndarray] = []
        self.ch: list[np.ndarray] = []
        self.fl: list[np.ndarray] = []
        self.id: list[np.ndarray] = []

    def add(self, t, channel, branch_plus, pol_v, pair_id):
        n = len(t)
        if n == 0:
            return
        self.t.append(np.asarray(t, dtype=np.int64))
        self.ch.append(np.full(n, channel, dtype=np.uint8))
        flags = np.zeros(n, dtype=np.uint8)
        flags |= np.where(np.asarray(branch_plus, dtype=bool), FLAG_BRANCH_PLUS, 0).astype(np.uint8)
        flags |= np.where(np.asarray(pol_v, dtype=bool), FLAG_POL_V, 0).astype(np.uint8)
        self.fl.append(flags)
        self.id.append(np.asarray(pair_id, dtype=np.uint32))

    def build(self) -> TagStream:
        if not self.t:
            return TagStream(np.zeros(0, dtype=RECORD_DTYPE))
        t = np.concatenate(self.t)
        ch = np.concatenate(self.ch)
        fl = np.concatenate(self.fl)
        pid = np.concatenate(self.id)
        order = np.lexsort((ch, t))
        return TagStream.from_fields(t[order].astype(np.uint64), ch[order], fl[order], pid[order])


def synthesize_stream(
    batch: PairBatch,
    eraser: EraserSetting | None = None,
    coincidence: CoincidenceSetting | None = None,
    jitter: bool = False,
    seed=0,
) -> TagStream:
    """Realize detector clicks for a batch of generated pairs.

    Without analyzers every photon clicks at its recorded splitter port.
    With analyzers each pair draws one outcome class from its
    distribution; the class dictates which detectors click and with which
    mode tags.  D2 clicks trail D1 by the fixed electronic delay, plus an
    exponential spread of scale tau_c / 2 per pair when ``jitter`` is on.
    """
    cs = coincidence if coincidence is not None else CoincidenceSetting()
    rng = np.random.default_rng(seed)
    n = len(batch)
    t_emit = batch.t_emit_ps.astype(np.int64)
    delay_s = np.full(n, cs.tau_si)
    if jitter:
        delay_s = delay_s + rng.exponential(cs.tau_c / 2.0, n)
    delay_ps = np.rint(delay_s * 1e12).astype(np.int64)

    s1 = batch.orientation_sign.astype(np.int8)  # branch sign of arm 1
    buf = _ClickBuffer()

    def emit(idx, channel, branch_sign, pol_v):
        t = t_emit[idx] + (delay_ps[idx] if channel == 1 else 0)
        buf.add(t, channel, np.asarray(branch_sign) > 0, pol_v, batch.pair_id[idx])

    if eraser is None:
        for route, port in ((batch.route1, batch.port1), (batch.route2, batch.port2)):
            branch = np.where(route == 1, s1, -s1)
            pol_v = (route == 1) == (port == Port.A.value)
            for channel in (0, 1):
                idx = np.flatnonzero(port == channel)
                emit(idx, channel, branch[idx], pol_v[idx])
        return buf.build()

    u_class = rng.random(n)
    u_route = rng.random(n)
    u_m1 = rng.random(n)
    u_m2 = rng.random(n)

    cross = batch.cross_mask
    cls = np.full(n, -1, dtype=np.int64)
    order = (
        Outcome.COINCIDENCE,
        Outcome.REJECTED_COINCIDENCE,
        Outcome.ONLY_D1,
        Outcome.ONLY_D2,
        Outcome.NO_CLICKS,
        Outcome.SAME_PORT_A,
        Outcome.SAME_PORT_B,
    )

    from .detection import _cross_path_distribution, _same_path_distribution

    def classify(mask, dist):
        probs = np.array([dist[o] for o in order])
        edges = np.cumsum(probs)[:-1]
        cls[mask] = np.searchsorted(edges, u_class[mask], side="right")

    classify(cross, _cross_path_distribution(eraser))
    classify(~cross & (batch.route1 == 1), _same_path_distribution(Path.PATH1, eraser))
    classify(~cross & (batch.route1 == 2), _same_path_distribution(Path.PATH2, eraser))

    def cls_idx(outcome, extra_mask=None):
        m = cls == order.index(outcome)
        if extra_mask is not None:
            m &= extra_mask
        return np.flatnonzero(m)

    # accepted coincidences: route choice decides the shared polarization
    idx = cls_idx(Outcome.COINCIDENCE, cross)
    arm1_at_a = u_route[idx] < accepted_route_split(eraser)
    emit(idx[arm1_at_a], 0, s1[idx[arm1_at_a]], np.ones(int(arm1_at_a.sum()), bool))
    emit(idx[arm1_at_a], 1, -s1[idx[arm1_at_a]], np.ones(int(arm1_at_a.sum()), bool))
    rest = idx[~arm1_at_a]
    emit(rest, 0, -s1[rest], np.zeros(len(rest), bool))
    emit(rest, 1, s1[rest], np.zeros(len(rest), bool))

    # rejected coincidences (same-path pairs behind analyzers)
    for path_value in (1, 2):
        idx = cls_idx(Outcome.REJECTED_COINCIDENCE, ~cross & (batch.route1 == path_value))
        branch = s1[idx] if path_value == 1 else -s1[idx]
        pol_v_at_a = path_value == 1
        emit(idx, 0, branch, np.full(len(idx), pol_v_at_a))
        emit(idx, 1, branch, np.full(len(idx), not pol_v_at_a))

    # lone cross-port clicks
    for outcome, channel, port in ((Outcome.ONLY_D1, 0, Port.A), (Outcome.ONLY_D2, 1, Port.B)):
        idx = cls_idx(outcome, cross)
        arm1_at_a = u_route[idx] < lone_click_route_split(eraser, port)
        if channel == 0:
            # port A clicked: arm-1 photon there is V(+s1), arm-2 photon is H(-s1)
            emit(idx[arm1_at_a], 0, s1[idx[arm1_at_a]], np.ones(int(arm1_at_a.sum()), bool))
            rest = idx[~arm1_at_a]
            emit(rest, 0, -s1[rest], np.zeros(len(rest), bool))
        else:
            # port B clicked: arm-2 photon there is V(-s1), arm-1 photon is H(+s1)
            emit(idx[arm1_at_a], 1, -s1[idx[arm1_at_a]], np.ones(int(arm1_at_a.sum()), bool))
            rest = idx[~arm1_at_a]
            emit(rest, 1, s1[rest], np.zeros(len(rest), bool))
        for path_value in (1, 2):
            sidx = cls_idx(outcome, ~cross & (batch.route1 == path_value))
            branch = s1[sidx] if path_value == 1 else -s1[sidx]
            pol_v = (path_value == 1) == (port is Port.A)
            emit(sidx, channel, branch, np.full(len(sidx), pol_v))

    # bunched outcomes: both photons on one detector, independent transmissions
    xi, theta = eraser.xi, eraser.theta
    for outcome, channel, port, angle in (
        (Outcome.SAME_PORT_A, 0, Port.A, xi),
        (Outcome.SAME_PORT_B, 1, Port.B, theta),
    ):
        c2 = math.cos(angle) ** 2
        s2 = math.sin(angle) ** 2
        idx = cls_idx(outcome)
        for route, u_m in ((batch.route1, u_m1), (batch.route2, u_m2)):
            pol_v = (route[idx] == 1) == (port is Port.A)
            p_pass = np.where(pol_v, s2, c2)
            passed = idx[u_m[idx] < p_pass]
            pol_v_passed = (route[passed] == 1) == (port is Port.A)
            branch = np.where(route[passed] == 1, s1[passed], -s1[passed])
            emit(passed, channel, branch, pol_v_passed)

    return buf.build()


def write_histogram_csv(hist: TauHistogram, path) -> None:
    lines = ["bin_lo_ps,bin_hi_ps,count"]
    for lo, hi, count in zip(hist.bin_lo_ps, hist.bin_hi_ps, hist.counts):
        lines.append(f"{format(lo, '.17g')},{format(hi, '.17g')},{int(count)}")
    FsPath(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_coincidences_csv(records: Sequence[CoincidenceRecord], path) -> None:
    lines = ["t1_ps,t2_ps,tau_si_ps,accepted,reject_reason"]
    for rec in records:
        lines.append(
            f"{rec.t1_ps},{rec.t2_ps},{rec.tau_si_ps},{int(rec.accepted)},{rec.reject_reason.value}"
        )
    FsPath(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
