"""Runnable node loops: wearable sender and benchtop receiver.

Both nodes append one JSON line per unit of work to a session log when a log
path is given: the wearable per closed window, the benchtop per tick. The
logs are complete records of a run, so a session can be audited or diffed
after the fact.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Callable, Iterable

from .classifier import FeatureExtractor, LadderConfig, WindowAccumulator
from .fsm import DEFAULT_BROWNOUT_TICKS, BenchState, FsmRuntime, tick
from .protocol import EndpointConfig, InputSymbol, UdpReceiver, UdpSender, encode_class
from .signals import DetectorConfig, PhysioSample
from .sim import SimStep

log = logging.getLogger(__name__)


def _open_log(path: str | Path | None) -> IO[str] | None:
    if path is None:
        return None
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return open(p, "w", encoding="utf-8")


@dataclass
class WindowEmission:
    """What the wearable did about one closed window."""

    window_index: int
    frames_used: int
    bpm_mean: float | None
    gsr_mean: float | None
    arousal: str | None
    byte_sent: str | None

    def record(self) -> dict:
        return {
            "window": self.window_index,
            "frames_used": self.frames_used,
            "bpm_mean": self.bpm_mean,
            "gsr_mean": self.gsr_mean,
            "arousal": self.arousal,
            "byte_sent": self.byte_sent,
        }


def run_wearable(
    samples: Iterable[PhysioSample],
    ladder: LadderConfig | None = None,
    detector: DetectorConfig | None = None,
    endpoint: EndpointConfig | None = None,
    log_path: str | Path | None = None,
    bpm_intervals: int = 1,
    inter_window_delay_s: float = 0.0,
) -> list[WindowEmission]:
    """Consume a sample stream, emit one classification byte per decided window.

    Windows that close without a usable decision are logged but nothing is
    sent; the benchtop's silence handling covers that case. An empty stream
    emits nothing and returns cleanly.
    """
    ladder = ladder or LadderConfig()
    extractor = FeatureExtractor(detector, bpm_intervals=bpm_intervals)
    accumulator = WindowAccumulator(ladder)
    emissions: list[WindowEmission] = []
    log_file = _open_log(log_path)
    try:
        with UdpSender(endpoint) as sender:
            def handle(closed_windows) -> None:
                for closed in closed_windows:
                    emission = _emit_window(closed, ladder, sender)
                    emissions.append(emission)
                    if log_file is not None:
                        log_file.write(json.dumps(emission.record()) + "\n")
                    if inter_window_delay_s > 0:
                        time.sleep(inter_window_delay_s)

            for sample in samples:
                frame = extractor.add(sample)
                if frame is not None:
                    handle(accumulator.add(frame))
            handle(accumulator.flush())
    finally:
        if log_file is not None:
            log_file.close()
    return emissions


def _emit_window(closed, ladder: LadderConfig, sender: UdpSender) -> WindowEmission:
    in_range = [f for f in closed.frames if ladder.frame_in_range(f)]
    bpm_mean = sum(f.bpm for f in in_range) / len(in_range) if in_range else None
    gsr_mean = sum(f.gsr_us for f in in_range) / len(in_range) if in_range else None
    if closed.decision is None:
        log.info("window %d: no usable frames, nothing sent", closed.window_index)
        return WindowEmission(closed.window_index, 0, bpm_mean, gsr_mean, None, None)
    arousal = closed.decision.arousal
    payload = encode_class(arousal)
    sender.send_class(arousal)
    log.info(
        "window %d: %s (bpm %.1f, gsr %.2f uS, %d frames) -> sent %s",
        closed.window_index,
        arousal.name,
        bpm_mean if bpm_mean is not None else float("nan"),
        gsr_mean if gsr_mean is not None else float("nan"),
        closed.decision.frames_used,
        payload.decode("ascii"),
    )
    return WindowEmission(
        closed.window_index,
        closed.decision.frames_used,
        bpm_mean,
        gsr_mean,
        arousal.name,
        payload.decode("ascii"),
    )


def run_benchtop(
    endpoint: EndpointConfig | None = None,
    tick_ms: float = 50.0,
    brownout_ticks: int = DEFAULT_BROWNOUT_TICKS,
    log_path: str | Path | None = None,
    max_ticks: int | None = None,
    initial_state: BenchState = BenchState.NORMAL,
    receiver: UdpReceiver | None = None,
    should_stop: Callable[[], bool] | None = None,
) -> list[SimStep]:
    """Tick the actuation machine against live datagrams until stopped.

    Each tick waits `tick_ms` for input; silence is an ABSENT tick. Stops
    after `max_ticks` if given, when `should_stop` turns true at a tick
    boundary, or on Ctrl-C. Every tick appends one JSON line to the log,
    matching the simulator's trace format.
    """
    if tick_ms <= 0:
        raise ValueError("tick_ms must be positive")
    runtime = FsmRuntime(initial_state, 0, brownout_ticks)
    steps: list[SimStep] = []
    log_file = _open_log(log_path)
    own_receiver = receiver is None
    if own_receiver:
        receiver = UdpReceiver(endpoint)
    try:
        log.info("benchtop listening on %s:%d", receiver.config.bind_host, receiver.port)
        index = 0
        while max_ticks is None or index < max_ticks:
            if should_stop is not None and should_stop():
                break
            try:
                received = receiver.poll_receive(tick_ms / 1000.0)
            except KeyboardInterrupt:
                log.info("benchtop interrupted, stopping")
                break
            symbol = InputSymbol.ABSENT if received is None else received
            runtime, command = tick(runtime, symbol)
            step = SimStep(index, symbol, runtime.state, command)
            steps.append(step)
            if log_file is not None:
                log_file.write(json.dumps(step.record()) + "\n")
            log.info(
                "tick %d: input %s -> %s color=%s tone=%s",
                index,
                symbol.value,
                runtime.state.value,
                command.color,
                command.tone.value,
            )
            index += 1
    finally:
        if log_file is not None:
            log_file.close()
        if own_receiver:
            receiver.close()
    return steps
