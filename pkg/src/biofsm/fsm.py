"""Benchtop actuation state machine.

Five states drive an RGB LED and a buzzer. Valid inputs move to the matching
arousal state from anywhere, including out of BROWNOUT. An unrecognized
payload forces INVALID, except that BROWNOUT absorbs it: garbage is not
evidence the wearable is back. Silence is counted per tick; enough
consecutive silent ticks latch BROWNOUT until a valid byte arrives.

Transitions are pure functions of (state, silence counter, input), which
makes the machine exhaustively checkable: `verify_determinism` enumerates
every configuration and proves each has exactly one successor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from enum import Enum

from .protocol import InputSymbol


class BenchState(Enum):
    NORMAL = "NORMAL"
    MILD = "MILD"
    HIGH = "HIGH"
    INVALID = "INVALID"
    BROWNOUT = "BROWNOUT"


class Tone(Enum):
    TONE1 = "TONE1"
    TONE2 = "TONE2"
    TONE3 = "TONE3"
    SILENT = "SILENT"


@dataclass(frozen=True)
class ActuationCommand:
    """LED color as an 8-bit RGB triple plus a buzzer tone selector."""

    color: tuple[int, int, int]
    tone: Tone


STATE_COLORS: dict[BenchState, tuple[int, int, int]] = {
    BenchState.NORMAL: (0, 255, 0),
    BenchState.MILD: (255, 165, 0),
    BenchState.HIGH: (255, 0, 0),
    BenchState.INVALID: (255, 255, 255),
    BenchState.BROWNOUT: (255, 0, 255),
}

STATE_TONES: dict[BenchState, Tone] = {
    BenchState.NORMAL: Tone.TONE1,
    BenchState.MILD: Tone.TONE2,
    BenchState.HIGH: Tone.TONE3,
    BenchState.INVALID: Tone.SILENT,
    BenchState.BROWNOUT: Tone.SILENT,
}

_VALID_TARGETS: dict[InputSymbol, BenchState] = {
    InputSymbol.VALID_A: BenchState.NORMAL,
    InputSymbol.VALID_B: BenchState.MILD,
    InputSymbol.VALID_C: BenchState.HIGH,
}

DEFAULT_BROWNOUT_TICKS = 10


def actuation_for(state: BenchState) -> ActuationCommand:
    return ActuationCommand(STATE_COLORS[state], STATE_TONES[state])


@dataclass(frozen=True)
class FsmRuntime:
    """Complete machine configuration between ticks."""

    state: BenchState = BenchState.NORMAL
    silence_ticks: int = 0
    brownout_ticks: int = DEFAULT_BROWNOUT_TICKS

    def __post_init__(self) -> None:
        if self.brownout_ticks < 1:
            raise ValueError("brownout_ticks must be >= 1")
        if not (0 <= self.silence_ticks <= self.brownout_ticks):
            raise ValueError(
                f"silence_ticks {self.silence_ticks} outside 0-{self.brownout_ticks}"
            )


def tick(runtime: FsmRuntime, symbol: InputSymbol) -> tuple[FsmRuntime, ActuationCommand]:
    """Advance the machine one tick. Pure: equal inputs give equal outputs."""
    if symbol is InputSymbol.ABSENT:
        silence = min(runtime.silence_ticks + 1, runtime.brownout_ticks)
        state = BenchState.BROWNOUT if silence >= runtime.brownout_ticks else runtime.state
        nxt = replace(runtime, state=state, silence_ticks=silence)
    elif symbol is InputSymbol.UNRECOGNIZED:
        # Garbage proves the link is alive, so the silence counter resets,
        # but only a valid byte may lift a brownout.
        state = runtime.state if runtime.state is BenchState.BROWNOUT else BenchState.INVALID
        nxt = replace(runtime, state=state, silence_ticks=0)
    else:
        nxt = replace(runtime, state=_VALID_TARGETS[symbol], silence_ticks=0)
    return nxt, actuation_for(nxt.state)


@dataclass
class DeterminismReport:
    """Result of exhaustively enumerating the transition function."""

    brownout_ticks: int
    configurations_checked: int
    successors: dict[tuple[BenchState, InputSymbol], set[BenchState]]
    conflicts: list[str]

    @property
    def deterministic(self) -> bool:
        return not self.conflicts

    def render(self) -> str:
        """Human-readable transition table, one row per state."""
        symbols = list(InputSymbol)
        width = max(len(s.name) for s in BenchState) + 1
        header = "state".ljust(width) + "".join(s.name.ljust(14) for s in symbols)
        lines = [header, "-" * len(header)]
        for state in BenchState:
            cells = []
            for symbol in symbols:
                names = sorted(s.name for s in self.successors[(state, symbol)])
                cells.append("/".join(names).ljust(14))
            lines.append(state.name.ljust(width) + "".join(cells))
        verdict = "deterministic" if self.deterministic else "NON-DETERMINISTIC"
        lines.append(
            f"{self.configurations_checked} configurations checked, "
            f"brownout after {self.brownout_ticks} silent ticks: {verdict}"
        )
        return "\n".join(lines)


def verify_determinism(brownout_ticks: int = DEFAULT_BROWNOUT_TICKS) -> DeterminismReport:
    """Prove each (state, silence, input) configuration has one successor.

    Every configuration is ticked twice and the two outcomes compared, so a
    hidden dependence on anything mutable would surface as a conflict. The
    successor table is keyed by (state, input); an ABSENT cell may legally
    hold several successors because the silence counter, not the state,
    picks between staying put and browning out.
    """
    successors: dict[tuple[BenchState, InputSymbol], set[BenchState]] = {
        (state, symbol): set() for state, symbol in itertools.product(BenchState, InputSymbol)
    }
    conflicts: list[str] = []
    checked = 0
    for state, symbol in itertools.product(BenchState, InputSymbol):
        for silence in range(brownout_ticks + 1):
            runtime = FsmRuntime(state, silence, brownout_ticks)
            first = tick(runtime, symbol)
            second = tick(runtime, symbol)
            checked += 1
            if first != second:
                conflicts.append(
                    f"({state.name}, silence={silence}, {symbol.name}) "
                    f"gave {first[0].state.name} then {second[0].state.name}"
                )
            successors[(state, symbol)].add(first[0].state)
        if symbol is not InputSymbol.ABSENT and len(successors[(state, symbol)]) > 1:
            names = sorted(s.name for s in successors[(state, symbol)])
            conflicts.append(f"({state.name}, {symbol.name}) has successors {names}")
    return DeterminismReport(brownout_ticks, checked, successors, conflicts)
