"""Trace recording and run metrics: throughput, delivery ratio, delay."""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, NamedTuple

from .errors import ConservationError, InvariantViolation

TRACE_VERSION = "manetsim-trace/1"
DROP_CAUSES = (
    "QueueOverflow", "OutOfRange", "TtlExpired", "NoRoute", "BlackHole", "MacLoss", "Isolated",
)
EVENTS = ("Send", "Recv", "Drop", "Forward", "Overhear", "Verdict", "Alert", "Repair")


class TraceRecord(NamedTuple):
    time: float
    event: str
    node: int
    pkt_id: int | None = None
    pkt_kind: str | None = None
    origin: int | None = None
    target: int | None = None
    size_bytes: int | None = None
    cause: str | None = None
    suspect: int | None = None
    seq_suspect: int | None = None
    seq_current: int | None = None
    d: int | None = None
    loss_pct: float | None = None
    outcome: str | None = None


FIELDS = TraceRecord._fields
_INT_FIELDS = {"node", "pkt_id", "origin", "target", "size_bytes", "suspect",
               "seq_suspect", "seq_current", "d"}


class Trace:
    """Append-only, time-ordered list of trace records."""

    def __init__(self):
        self.records: list[TraceRecord] = []
        self._last = 0.0

    def record(self, rec: TraceRecord):
        if rec.time < self._last:
            raise InvariantViolation(
                f"trace record at t={rec.time} after t={self._last}: {rec.event}"
            )
        self._last = rec.time
        self.records.append(rec)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def _fmt(name, value):
    if value is None:
        return "-"
    if name in ("time", "loss_pct"):
        # repr round-trips exactly, so a parsed trace replays to the same summary
        return repr(float(value))
    return str(value)


def format_record(rec: TraceRecord) -> str:
    return " ".join(_fmt(name, value) for name, value in zip(FIELDS, rec))


def write_trace(records: Iterable[TraceRecord], fh):
    fh.write(f"# {TRACE_VERSION} " + " ".join(FIELDS) + "\n")
    for rec in records:
        fh.write(format_record(rec))
        fh.write("\n")


def parse_trace(text: str) -> list[TraceRecord]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line or line.startswith("#"):
            continue
        parts = line.split(" ")
        if len(parts) != len(FIELDS):
            raise ValueError(f"trace line {lineno}: expected {len(FIELDS)} fields")
        values = []
        for name, raw in zip(FIELDS, parts):
            if raw == "-":
                values.append(None)
            elif name in ("time", "loss_pct"):
                values.append(float(raw))
            elif name in _INT_FIELDS:
                values.append(int(raw))
            else:
                values.append(raw)
        out.append(TraceRecord(*values))
    return out


@dataclass
class RunSummary:
    duration_s: float
    data_sent: int = 0
    data_delivered: int = 0
    data_dropped_by_cause: dict = field(default_factory=dict)
    in_flight_at_end: int = 0
    throughput_bps: float = 0.0
    pdr: float = 0.0
    mean_e2e_delay_s: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    time_to_detection_s: float | None = None
    first_alert_s: float | None = None
    post_detection_pdr: float | None = None
    malicious_verdicts: int = 0
    local_repairs: int = 0
    blamed: tuple = ()

    @property
    def data_dropped(self) -> int:
        return sum(self.data_dropped_by_cause.values())

    def as_dict(self):
        out = asdict(self)
        out["data_dropped"] = self.data_dropped
        return out


SUMMARY_COLUMNS = (
    "duration_s", "data_sent", "data_delivered", "data_dropped", "in_flight_at_end",
    "throughput_bps", "pdr", "mean_e2e_delay_s", "tp", "fp", "fn",
    "time_to_detection_s", "first_alert_s", "post_detection_pdr",
    "malicious_verdicts", "local_repairs",
) + tuple(f"drop_{c}" for c in DROP_CAUSES)


def _value(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summary_row(s: RunSummary) -> dict:
    d = s.as_dict()
    row = {k: d[k] for k in SUMMARY_COLUMNS if not k.startswith("drop_")}
    for cause in DROP_CAUSES:
        row[f"drop_{cause}"] = s.data_dropped_by_cause.get(cause, 0)
    return row


def format_summary(s: RunSummary) -> str:
    """key=value block, a blank line, then a header + CSV row."""
    row = summary_row(s)
    lines = [f"{k}={_value(v)}" for k, v in row.items()]
    lines.append(f"blamed={','.join(str(b) for b in s.blamed)}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    writer.writerow([_value(row[k]) for k in SUMMARY_COLUMNS])
    return "\n".join(lines) + "\n\n" + buf.getvalue()


def finalize(trace, duration: float, ground_truth_attackers=(), in_flight=None) -> RunSummary:
    """Reduce a complete trace to a RunSummary.

    ``in_flight`` is the set of Data pkt_ids still alive in the network at
    the end of the run, found by inspecting queues, buffers and pending
    deliveries. When given it must match the trace's unresolved packets
    exactly; otherwise a ConservationError names the mismatching ids.
    """
    if not duration > 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    attackers = set(ground_truth_attackers)
    sent = {}
    payload = {}
    delivered = {}
    dropped = {}
    drops = Counter()
    problems = set()
    verdict_blame = {}
    first_alert = None
    malicious = 0
    repairs = 0

    for rec in trace:
        ev = rec.event
        if rec.pkt_kind == "Data":
            pid = rec.pkt_id
            if ev == "Send":
                if pid in sent:
                    problems.add(pid)
                sent[pid] = rec.time
                payload[pid] = rec.size_bytes or 0
            elif ev == "Recv" and rec.node == rec.target:
                if pid not in sent or pid in delivered or pid in dropped:
                    problems.add(pid)
                delivered[pid] = rec.time
            elif ev == "Drop":
                if pid not in sent or pid in delivered or pid in dropped:
                    problems.add(pid)
                dropped[pid] = rec.cause
                drops[rec.cause] += 1
        elif ev == "Verdict" and rec.outcome == "Malicious":
            malicious += 1
            verdict_blame.setdefault(rec.suspect, rec.time)
        elif ev == "Alert" and first_alert is None:
            first_alert = rec.time
        elif ev == "Repair":
            repairs += 1

    if problems:
        raise ConservationError("Data packets with inconsistent Send/Recv/Drop history", problems)
    unresolved = set(sent) - set(delivered) - set(dropped)
    if in_flight is not None:
        mismatch = unresolved.symmetric_difference(set(in_flight))
        if mismatch:
            raise ConservationError(
                "sent != delivered + dropped + in-flight; unaccounted packets", mismatch
            )

    n_sent = len(sent)
    n_del = len(delivered)
    bits = sum(payload[p] for p in delivered) * 8
    delays = [delivered[p] - sent[p] for p in delivered]

    blamed = set(verdict_blame)
    detect_times = [t for s, t in verdict_blame.items() if s in attackers]
    traffic_start = min(sent.values()) if sent else 0.0

    post_pdr = None
    if first_alert is not None:
        after = [p for p, t in sent.items() if t >= first_alert]
        if after:
            post_pdr = sum(1 for p in after if p in delivered) / len(after)

    return RunSummary(
        duration_s=duration,
        data_sent=n_sent,
        data_delivered=n_del,
        data_dropped_by_cause=dict(sorted(drops.items())),
        in_flight_at_end=len(unresolved),
        throughput_bps=bits / duration,
        pdr=n_del / n_sent if n_sent else 0.0,
        mean_e2e_delay_s=math.fsum(delays) / len(delays) if delays else 0.0,
        tp=len(blamed & attackers),
        fp=len(blamed - attackers),
        fn=len(attackers - blamed),
        time_to_detection_s=(min(detect_times) - traffic_start) if detect_times else None,
        first_alert_s=first_alert,
        post_detection_pdr=post_pdr,
        malicious_verdicts=malicious,
        local_repairs=repairs,
        blamed=tuple(sorted(blamed)),
    )


def time_series(trace, duration: float, bin_s: float = 1.0):
    """Per-bin rows (time_s, throughput_bps, cum_pdr, mean_delay_s)."""
    nbins = max(1, math.ceil(duration / bin_s))
    sent_at = {}
    bits = [0] * nbins
    delay_sum = [0.0] * nbins
    delay_n = [0] * nbins
    sent_n = [0] * nbins
    del_n = [0] * nbins
    for rec in trace:
        if rec.pkt_kind != "Data":
            continue
        if rec.event == "Send":
            sent_at[rec.pkt_id] = rec.time
            sent_n[min(int(rec.time // bin_s), nbins - 1)] += 1
        elif rec.event == "Recv" and rec.node == rec.target:
            b = min(int(rec.time // bin_s), nbins - 1)
            bits[b] += (rec.size_bytes or 0) * 8
            delay_sum[b] += rec.time - sent_at[rec.pkt_id]
            delay_n[b] += 1
            del_n[b] += 1
    rows = []
    cum_sent = cum_del = 0
    for b in range(nbins):
        cum_sent += sent_n[b]
        cum_del += del_n[b]
        rows.append((
            (b + 1) * bin_s,
            bits[b] / bin_s,
            cum_del / cum_sent if cum_sent else 0.0,
            delay_sum[b] / delay_n[b] if delay_n[b] else None,
        ))
    return rows


def write_time_series(rows, fh):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["time_s", "throughput_bps", "cum_pdr", "mean_delay_s"])
    for t, thr, pdr, delay in rows:
        writer.writerow([_value(t), _value(thr), _value(pdr), _value(delay)])

