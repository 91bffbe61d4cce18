"""Deterministic tick simulation, input scripts, trace output and evaluation.

The simulator drives the benchtop machine with a scripted symbol per tick on
a purely virtual clock: tick indices are the only notion of time, so runs
are reproducible byte for byte. The same scripts can instead be replayed
over a real loopback UDP socket pair (`replay_script`) to show the wire path
produces the identical trace.

Evaluation compares self-reported arousal against predictions for the
bundled three-clip study fixture and reports exact-match accuracy per clip,
alongside the figures originally reported for the prototype.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .classifier import ArousalClass
from .fsm import (
    DEFAULT_BROWNOUT_TICKS,
    ActuationCommand,
    BenchState,
    FsmRuntime,
    tick,
)
from .protocol import EndpointConfig, InputSymbol, UdpReceiver, UdpSender, encode_class

SYMBOL_TOKENS = {s.value: s for s in InputSymbol}


class ScriptError(ValueError):
    """Raised for malformed tick scripts, with the offending line number."""


def parse_script(text: str) -> list[InputSymbol]:
    """Parse a tick script: one token per line, A/B/C/X/-, # comments allowed."""
    symbols: list[InputSymbol] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line not in SYMBOL_TOKENS:
            raise ScriptError(f"line {lineno}: unknown symbol {line!r} (expected A, B, C, X or -)")
        symbols.append(SYMBOL_TOKENS[line])
    return symbols


def load_script(path: str | Path) -> list[InputSymbol]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScriptError(f"cannot read script {path}: {exc}") from exc
    try:
        return parse_script(text)
    except ScriptError as exc:
        raise ScriptError(f"{path}: {exc}") from None


def format_script(symbols: Iterable[InputSymbol]) -> str:
    return "".join(f"{s.value}\n" for s in symbols)


@dataclass
class SimStep:
    """One simulated tick: the input consumed and the resulting actuation."""

    tick: int
    input: InputSymbol
    state: BenchState
    command: ActuationCommand

    def record(self) -> dict:
        return {
            "tick": self.tick,
            "input": self.input.value,
            "state": self.state.value,
            "color": list(self.command.color),
            "tone": self.command.tone.value,
        }


def run_simulation(
    script: Sequence[InputSymbol],
    brownout_ticks: int = DEFAULT_BROWNOUT_TICKS,
    initial_state: BenchState = BenchState.NORMAL,
) -> list[SimStep]:
    """Run the machine over a script on the virtual clock."""
    runtime = FsmRuntime(initial_state, 0, brownout_ticks)
    steps: list[SimStep] = []
    for index, symbol in enumerate(script):
        runtime, command = tick(runtime, symbol)
        steps.append(SimStep(index, symbol, runtime.state, command))
    return steps


def serialize_trace(steps: Iterable[SimStep]) -> str:
    """Render steps as JSON lines. Stable key order, LF endings."""
    return "".join(json.dumps(step.record(), separators=(", ", ": ")) + "\n" for step in steps)


def replay_script(
    script: Sequence[InputSymbol],
    tick_ms: float = 50.0,
    drop_ticks: set[int] | None = None,
    brownout_ticks: int = DEFAULT_BROWNOUT_TICKS,
    initial_state: BenchState = BenchState.NORMAL,
) -> list[SimStep]:
    """Replay a script over real loopback UDP, lockstep one datagram per tick.

    Scripted ABSENT ticks send nothing, as do ticks listed in `drop_ticks`
    (simulating loss in flight); UNRECOGNIZED ticks send a byte outside the
    protocol alphabet. The receiver classifies each tick from what actually
    arrived, so the returned steps carry the symbols as seen on the wire.
    """
    drop_ticks = drop_ticks or set()
    runtime = FsmRuntime(initial_state, 0, brownout_ticks)
    steps: list[SimStep] = []
    with UdpReceiver(EndpointConfig(port=0)) as receiver:
        endpoint = EndpointConfig(port=receiver.port)
        with UdpSender(endpoint) as sender:
            for index, symbol in enumerate(script):
                if index not in drop_ticks:
                    if symbol in (InputSymbol.VALID_A, InputSymbol.VALID_B, InputSymbol.VALID_C):
                        sender.send_raw(symbol.value.encode("ascii"))
                    elif symbol is InputSymbol.UNRECOGNIZED:
                        sender.send_raw(b"?")
                received = receiver.poll_receive(tick_ms / 1000.0)
                observed = InputSymbol.ABSENT if received is None else received
                runtime, command = tick(runtime, observed)
                steps.append(SimStep(index, observed, runtime.state, command))
    return steps


@dataclass
class TraceRecord:
    """One rated interval of one clip from the study fixture."""

    clip_id: int
    interval_index: int
    self_report: ArousalClass
    predicted: ArousalClass


_CLASS_NAMES = {c.name: c for c in ArousalClass}

FIXTURE_INTERVALS_PER_CLIP = 16

# Accuracy figures originally reported for the prototype. The bundled
# fixture does not reproduce them; evaluation reports both and flags the
# discrepancy instead of hiding it.
REPORTED_ACCURACY = {1: 66.67, 2: 13.0, 3: 43.75}
REPORTED_AVERAGE = 41.0


def load_table3(path: str | Path | None = None) -> list[TraceRecord]:
    """Load the study fixture CSV; the packaged copy is used by default."""
    if path is None:
        source = resources.files("biofsm").joinpath("data/table3.csv")
        text = source.read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(text.splitlines())
    header = next(reader, None)
    if header != ["clip", "interval", "self_report", "predicted"]:
        raise ValueError("fixture header must be clip,interval,self_report,predicted")
    records: list[TraceRecord] = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ValueError(f"line {lineno}: expected 4 fields, got {len(row)}")
        try:
            clip = int(row[0])
            interval = int(row[1])
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer clip or interval") from None
        for name in (row[2], row[3]):
            if name not in _CLASS_NAMES:
                raise ValueError(f"line {lineno}: unknown class {name!r}")
        records.append(TraceRecord(clip, interval, _CLASS_NAMES[row[2]], _CLASS_NAMES[row[3]]))
    return records


@dataclass
class ClipAccuracy:
    clip_id: int
    matches: int
    total: int
    reported_percent: float | None

    @property
    def percent(self) -> float:
        return 100.0 * self.matches / self.total

    @property
    def matches_reported(self) -> bool:
        if self.reported_percent is None:
            return False
        return abs(self.percent - self.reported_percent) < 0.005


@dataclass
class AccuracyReport:
    clips: list[ClipAccuracy]
    reported_average: float | None

    @property
    def average_percent(self) -> float:
        return sum(c.percent for c in self.clips) / len(self.clips)

    @property
    def discrepancies(self) -> list[int]:
        """Clip ids whose computed accuracy differs from the reported one."""
        return [c.clip_id for c in self.clips if c.reported_percent is not None and not c.matches_reported]

    def to_dict(self) -> dict:
        return {
            "clips": [
                {
                    "clip": c.clip_id,
                    "matches": c.matches,
                    "total": c.total,
                    "accuracy_percent": round(c.percent, 2),
                    "reported_percent": c.reported_percent,
                }
                for c in self.clips
            ],
            "average_percent": round(self.average_percent, 2),
            "reported_average_percent": self.reported_average,
            "discrepancy_clips": self.discrepancies,
        }

    def render(self) -> str:
        lines = ["clip  matches  accuracy   reported"]
        for c in self.clips:
            reported = f"{c.reported_percent:.2f}%" if c.reported_percent is not None else "-"
            flag = "" if c.matches_reported else "  <- differs"
            lines.append(
                f"{c.clip_id:<4}  {c.matches}/{c.total:<5}  {c.percent:6.2f}%   {reported}{flag}"
            )
        reported_avg = f"{self.reported_average:.2f}%" if self.reported_average is not None else "-"
        lines.append(f"average {self.average_percent:.2f}% (reported {reported_avg})")
        if self.discrepancies:
            lines.append(
                "computed accuracies do not match the originally reported figures "
                f"for clips {self.discrepancies}; the reported figures are not "
                "reproducible from the published per-interval data"
            )
        return "\n".join(lines)


def evaluate_table3(records: Sequence[TraceRecord]) -> AccuracyReport:
    """Exact-match accuracy per clip plus the overall mean.

    Every clip must carry exactly the expected number of intervals; partial
    fixtures indicate a corrupted file and are rejected.
    """
    by_clip: dict[int, list[TraceRecord]] = {}
    for record in records:
        by_clip.setdefault(record.clip_id, []).append(record)
    if not by_clip:
        raise ValueError("no records to evaluate")
    clips: list[ClipAccuracy] = []
    for clip_id in sorted(by_clip):
        rows = by_clip[clip_id]
        if len(rows) != FIXTURE_INTERVALS_PER_CLIP:
            raise ValueError(
                f"clip {clip_id} has {len(rows)} intervals, expected {FIXTURE_INTERVALS_PER_CLIP}"
            )
        matches = sum(1 for r in rows if r.self_report == r.predicted)
        clips.append(ClipAccuracy(clip_id, matches, len(rows), REPORTED_ACCURACY.get(clip_id)))
    return AccuracyReport(clips, REPORTED_AVERAGE)


def replay_end_to_end(
    records: Sequence[TraceRecord],
    tick_ms: float = 50.0,
    brownout_ticks: int = DEFAULT_BROWNOUT_TICKS,
) -> list[SimStep]:
    """Feed a fixture's predicted classes through the wire path in order."""
    script = [
        SYMBOL_TOKENS[encode_class(record.predicted).decode("ascii")] for record in records
    ]
    return replay_script(script, tick_ms=tick_ms, brownout_ticks=brownout_ticks)
