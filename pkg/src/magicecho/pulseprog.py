"""Line-oriented pulse-program DSL: parsing, printing, compilation.

Grammar (one statement per line, '#' starts a comment):

    init    ("dipolar" | "ix" | "seq2")
    pulse   NUMBER["deg"] AXIS            AXIS: x y z -x -y -z, angle in degrees
    burst   ("+"|"-") NUMBER"G" NUMBER("us"|"hc")
    delay   NUMBER"us"
    acquire ("Ix"|"Iy"|"Iz") "for" NUMBER"us" "step" NUMBER"us"
    frame   ("tilted" | "rotating")

The first statement must be an init, there is exactly one init, and at most
one frame declaration. Burst amplitudes are in Gauss; half-cycle ("hc")
durations must be positive integers and are converted at compile time to
n * pi / omega1 with omega1 = gamma * B1, so compiled burst durations are
exact integer multiples of the half-cycle.

Compilation is literal: each pulse statement becomes an instantaneous
rotation, each burst an evolution under the tilted-rotating-frame burst
Hamiltonian (or its infinite-field limit -H'/2 when ideal reversal is
requested), each delay a free dipolar evolution. No statement is absorbed
or reordered; the standard programs compose to the intended sequences
because a 90-degree y pulse maps dipolar order exactly onto the burst
frame's reversed Hamiltonian plus the double-quantum part. The frame
declaration is descriptive: plans always execute in the frame the burst
Hamiltonian is written in, and the explicit pulse statements carry the
frame change, so 'tilted' and 'rotating' programs compile identically.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import engine
from .lattice import GAMMA_F19


class ParseError(ValueError):
    """Syntax or structure error, carrying 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class CompileError(ValueError):
    """A parsed program that cannot be lowered to a propagation plan."""


@dataclass(frozen=True)
class Init:
    kind: str


@dataclass(frozen=True)
class Pulse:
    angle: float  # radians
    axis: str


@dataclass(frozen=True)
class Burst:
    sign: int
    amplitude_gauss: float
    seconds: float | None = None
    halfcycles: int | None = None

    def __post_init__(self):
        if (self.seconds is None) == (self.halfcycles is None):
            raise ValueError("burst needs exactly one of seconds/halfcycles")


@dataclass(frozen=True)
class Delay:
    seconds: float


@dataclass(frozen=True)
class Acquire:
    observable: str  # 'x' | 'y' | 'z'
    window: float
    step: float


@dataclass(frozen=True)
class Frame:
    kind: str


@dataclass(frozen=True)
class PulseProgram:
    statements: tuple

    @property
    def frame(self) -> str:
        for s in self.statements:
            if isinstance(s, Frame):
                return s.kind
        return "tilted"

    @property
    def init_kind(self) -> str:
        return self.statements[0].kind


_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_NUM_UNIT_RE = re.compile(rf"({_NUM})([A-Za-z]*)\Z")
_AXES = ("x", "y", "z", "-x", "-y", "-z")
_OBSERVABLES = {"Ix": "x", "Iy": "y", "Iz": "z"}


class _Tokens:
    def __init__(self, line_text: str, lineno: int):
        self.lineno = lineno
        self.items = [(m.group(), m.start() + 1)
                      for m in re.finditer(r"\S+", line_text)]
        self.pos = 0
        self.end_col = len(line_text.rstrip()) + 1

    def next(self, what: str):
        if self.pos >= len(self.items):
            raise ParseError(f"expected {what} but the line ended",
                             self.lineno, self.end_col)
        tok, col = self.items[self.pos]
        self.pos += 1
        return tok, col

    def done(self):
        if self.pos < len(self.items):
            tok, col = self.items[self.pos]
            raise ParseError(f"unexpected trailing token {tok!r}",
                             self.lineno, col)

    def number(self, what: str, units: tuple = ("",)):
        tok, col = self.next(what)
        m = _NUM_UNIT_RE.match(tok)
        if not m or m.group(2) not in units:
            shown = "/".join(u or "<none>" for u in units)
            raise ParseError(
                f"expected {what} (number with unit {shown}), got {tok!r}",
                self.lineno, col)
        return float(m.group(1)), m.group(2), col

    def keyword(self, choices: tuple, what: str):
        tok, col = self.next(what)
        if tok not in choices:
            raise ParseError(f"expected {what}, got {tok!r}", self.lineno, col)
        return tok, col


def _positive(value, what, lineno, col):
    if not value > 0:
        raise ParseError(f"{what} must be positive", lineno, col)
    return value


def _parse_statement(toks: _Tokens):
    head, col = toks.next("a statement keyword")
    line = toks.lineno
    if head == "init":
        kind, _ = toks.keyword(engine.INITIAL_STATE_KINDS, "an initial state kind")
        toks.done()
        return Init(kind)
    if head == "pulse":
        angle_deg, _, acol = toks.number("a flip angle", units=("", "deg"))
        _positive(angle_deg, "flip angle", line, acol)
        axis, _ = toks.keyword(_AXES, "an axis")
        toks.done()
        return Pulse(angle=float(np.radians(angle_deg)), axis=axis)
    if head == "burst":
        sign_tok, _ = toks.keyword(("+", "-"), "'+' or '-' after 'burst'")
        amp, _, acol = toks.number("a field amplitude", units=("G",))
        _positive(amp, "burst amplitude", line, acol)
        value, unit, dcol = toks.number("a burst duration", units=("us", "hc"))
        _positive(value, "burst duration", line, dcol)
        toks.done()
        sign = 1 if sign_tok == "+" else -1
        if unit == "hc":
            if value != int(value):
                raise ParseError("half-cycle count must be a positive integer",
                                 line, dcol)
            return Burst(sign=sign, amplitude_gauss=amp, halfcycles=int(value))
        return Burst(sign=sign, amplitude_gauss=amp, seconds=value * 1e-6)
    if head == "delay":
        value, _, dcol = toks.number("a delay duration", units=("us",))
        _positive(value, "delay duration", line, dcol)
        toks.done()
        return Delay(seconds=value * 1e-6)
    if head == "acquire":
        obs_tok, _ = toks.keyword(tuple(_OBSERVABLES), "an observable (Ix/Iy/Iz)")
        toks.keyword(("for",), "'for'")
        window, _, wcol = toks.number("an acquisition window", units=("us",))
        _positive(window, "acquisition window", line, wcol)
        toks.keyword(("step",), "'step'")
        step, _, scol = toks.number("an acquisition step", units=("us",))
        _positive(step, "acquisition step", line, scol)
        if step > window:
            raise ParseError("acquisition step exceeds the window", line, scol)
        toks.done()
        return Acquire(observable=_OBSERVABLES[obs_tok],
                       window=window * 1e-6, step=step * 1e-6)
    if head == "frame":
        kind, _ = toks.keyword(("tilted", "rotating"), "a frame kind")
        toks.done()
        return Frame(kind)
    raise ParseError(f"unknown keyword {head!r}", line, col)


def parse(text: str) -> PulseProgram:
    """Parse DSL source into a validated program."""
    statements = []
    lines = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        body = raw.split("#", 1)[0]
        toks = _Tokens(body, lineno)
        if not toks.items:
            continue
        statements.append(_parse_statement(toks))
        lines.append(lineno)
    if not statements:
        raise ParseError("empty program: missing init", 1, 1)
    if not isinstance(statements[0], Init):
        raise ParseError("missing init: the first statement must be 'init'",
                         lines[0], 1)
    inits = [k for k, s in enumerate(statements) if isinstance(s, Init)]
    if len(inits) > 1:
        raise ParseError("more than one init statement", lines[inits[1]], 1)
    frames = [k for k, s in enumerate(statements) if isinstance(s, Frame)]
    if len(frames) > 1:
        raise ParseError("more than one frame declaration", lines[frames[1]], 1)
    return PulseProgram(statements=tuple(statements))


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def print_program(program: PulseProgram) -> str:
    """Canonical text form; parse(print_program(p)) reproduces p."""
    out = []
    for s in program.statements:
        if isinstance(s, Init):
            out.append(f"init {s.kind}")
        elif isinstance(s, Pulse):
            out.append(f"pulse {_fmt(np.degrees(s.angle))} {s.axis}")
        elif isinstance(s, Burst):
            sign = "+" if s.sign > 0 else "-"
            if s.halfcycles is not None:
                dur = f"{s.halfcycles}hc"
            else:
                dur = f"{_fmt(s.seconds * 1e6)}us"
            out.append(f"burst {sign} {_fmt(s.amplitude_gauss)}G {dur}")
        elif isinstance(s, Delay):
            out.append(f"delay {_fmt(s.seconds * 1e6)}us")
        elif isinstance(s, Acquire):
            out.append(f"acquire I{s.observable} for {_fmt(s.window * 1e6)}us"
                       f" step {_fmt(s.step * 1e6)}us")
        elif isinstance(s, Frame):
            out.append(f"frame {s.kind}")
        else:
            raise TypeError(f"unknown statement {type(s).__name__}")
    return "\n".join(out) + "\n"


def compile(program: PulseProgram, cluster, ideal_reversal: bool = False
            ) -> engine.PropagationPlan:
    """Lower a program to engine segments for the given cluster.

    Each hc burst duration becomes an exact integer multiple of pi/omega1.
    With ideal_reversal, bursts evolve under -H'/2 (the infinite-amplitude
    limit) for the same duration.
    """
    gamma = getattr(getattr(cluster, "constants", None), "gamma", GAMMA_F19)
    segments = []
    init_kind = program.init_kind
    for s in program.statements:
        if isinstance(s, (Init, Frame)):
            continue
        if isinstance(s, Pulse):
            segments.append(engine.Pulse(axis=s.axis, angle=s.angle))
        elif isinstance(s, Burst):
            if not s.amplitude_gauss > 0:
                raise CompileError("burst amplitude must be positive")
            omega1 = gamma * s.amplitude_gauss
            if s.halfcycles is not None:
                duration = s.halfcycles * np.pi / omega1
            else:
                duration = s.seconds
            spec = (engine.HamiltonianSpec("ideal_burst") if ideal_reversal
                    else engine.HamiltonianSpec("burst", s.sign, omega1))
            segments.append(engine.Evolve(hamiltonian=spec, duration=duration))
        elif isinstance(s, Delay):
            segments.append(engine.Evolve(
                hamiltonian=engine.HamiltonianSpec("dipolar"),
                duration=s.seconds))
        elif isinstance(s, Acquire):
            segments.append(engine.Acquire(observable=s.observable,
                                           window=s.window, step=s.step))
        else:
            raise CompileError(f"cannot compile {type(s).__name__}")
    return engine.PropagationPlan(
        cluster=cluster, segments=tuple(segments),
        initial_state_kind=init_kind,
        meta={"frame": program.frame, "ideal_reversal": bool(ideal_reversal)})


def builtin_program(name: str, amplitude_gauss: float = 25.3,
                    halfcycles: int = 40, window_us: float = 60.0,
                    step_us: float = 0.5, gamma: float = GAMMA_F19) -> str:
    """DSL source for the standard sequences.

    'seq1': dipolar order, 90-degree pulse, phase-alternated burst of
    ``halfcycles`` total half-cycles, free evolution for half the burst
    duration, 45-degree read pulse, acquisition on Iy from the echo center.

    'seq2': same reversal block but with the 45-degree pulse applied first,
    acquisition starting at the echo center 3/2 burst durations in.

    'rpw': transverse order, free evolution, burst of twice that duration,
    acquisition on Ix from the burst end (the original magic-echo timing).

    ``halfcycles`` is the total burst length and must be even so each phase
    half is an integer number of half-cycles.
    """
    if halfcycles < 2 or halfcycles % 2:
        raise ValueError("halfcycles must be an even integer >= 2")
    if not amplitude_gauss > 0:
        raise ValueError("amplitude must be positive")
    omega1 = gamma * amplitude_gauss
    half_us = 0.5 * halfcycles * np.pi / omega1 * 1e6  # t1/2 in microseconds
    amp = _fmt(amplitude_gauss)
    n2 = halfcycles // 2
    acq = f"for {_fmt(window_us)}us step {_fmt(step_us)}us"
    if name == "seq1":
        return (
            "# time reversal of dipolar order, read through a 45-degree pulse\n"
            "init dipolar\n"
            "pulse 90 y\n"
            f"burst + {amp}G {n2}hc\n"
            f"burst - {amp}G {n2}hc\n"
            f"delay {_fmt(half_us)}us\n"
            "pulse 45 y\n"
            f"acquire Iy {acq}\n")
    if name == "seq2":
        return (
            "# 45-degree pulse first; the echo forms during acquisition\n"
            "init dipolar\n"
            "pulse 45 y\n"
            f"burst + {amp}G {n2}hc\n"
            f"burst - {amp}G {n2}hc\n"
            f"delay {_fmt(half_us)}us\n"
            f"acquire Iy {acq}\n")
    if name == "rpw":
        return (
            "# magic echo on transverse order\n"
            "init ix\n"
            f"delay {_fmt(half_us)}us\n"
            f"burst + {amp}G {n2}hc\n"
            f"burst - {amp}G {n2}hc\n"
            f"acquire Ix {acq}\n")
    raise ValueError(f"unknown builtin program {name!r}")


BUILTIN_NAMES = ("seq1", "seq2", "rpw")
