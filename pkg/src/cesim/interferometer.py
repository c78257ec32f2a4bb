"""The two-arm network and its closed-form local observables.

The carrier enters horizontally polarized, is rotated onto the diagonal by
the 22.5 degree wave plate, split across the two arms, tagged with opposite
frequency branches by the arm modulators, folded (arm 1 crosses one extra
mirror before recombination) and recombined on the polarizing splitter.

Normalization: all intensities reported here derive from squaring the
unit-carrier amplitudes, so each output port carries 1/2 before any
analyzer and at most 1/4 behind one. The per-port global phase is fixed by
convention (arm-2 term real and positive); global phases carry no
observable content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .optics import (
    Detune,
    FieldState,
    ModeLabel,
    Path,
    Pol,
    analyzer_projection,
    aom_tag,
    bs_transform,
    hwp_22_5,
    mirror,
    pbs_route,
)

# The two arms are detuned by +delta_f and -delta_f, so their interference
# beats at twice the detuning magnitude.  The 2*pi makes the phase
# dimensionally consistent for delta_f in Hz and tau in seconds.
BEAT_HARMONIC = 2


def pair_phase(delta_f: float, tau: float) -> float:
    """Interferometric phase accumulated over the arm delay ``tau``."""
    return 2.0 * math.pi * BEAT_HARMONIC * delta_f * tau


class Orientation(Enum):
    """Which arm carries the positive frequency branch."""

    PLUS_MINUS = 1  # arm 1 at +delta_f, arm 2 at -delta_f
    MINUS_PLUS = -1

    @property
    def sign(self) -> int:
        return self.value

    def arm_detune(self, path: Path) -> Detune:
        positive = (self.sign > 0) == (path is Path.PATH1)
        return Detune.PLUS if positive else Detune.MINUS

    def flipped(self) -> "Orientation":
        return Orientation.MINUS_PLUS if self is Orientation.PLUS_MINUS else Orientation.PLUS_MINUS


@dataclass(frozen=True, slots=True)
class PairSetting:
    """Physical knobs of one frequency-tagged pair: detuning magnitude,
    branch orientation and arm delay."""

    delta_f: float
    orientation: Orientation = Orientation.PLUS_MINUS
    tau: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.delta_f) or self.delta_f < 0:
            raise ValueError("delta_f must be finite and non-negative")
        if not math.isfinite(self.tau):
            raise ValueError("tau must be finite")

    @property
    def phase(self) -> float:
        return pair_phase(self.delta_f, self.tau)


@dataclass(frozen=True, slots=True)
class EraserSetting:
    """Analyzer angles in radians: ``xi`` at port A, ``theta`` at port B."""

    xi: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.xi) and math.isfinite(self.theta)):
            raise ValueError("analyzer angles must be finite")


def _split_into_arms(state: FieldState) -> FieldState:
    """Balanced splitter across the arm pair, per polarization and branch."""
    keys = sorted(
        {(l.pol, l.detune) for l in state.labels()},
        key=lambda k: (k[0].value, k[1].value),
    )
    out: list[tuple[ModeLabel, complex]] = []
    for pol, detune in keys:
        in_a = state.amplitude(ModeLabel(Path.PATH1, pol, detune))
        in_b = state.amplitude(ModeLabel(Path.PATH2, pol, detune))
        out_a, out_b = bs_transform(in_a, in_b)
        out.append((ModeLabel(Path.PATH1, pol, detune), out_a))
        out.append((ModeLabel(Path.PATH2, pol, detune), out_b))
    return FieldState(out)


def _anchor_phase(field: FieldState) -> FieldState:
    """Rotate the global phase so the arm-2 term is real and positive."""
    for label, amp in field.terms():
        if label.path is Path.PATH2 and amp != 0:
            return field.scaled((amp / abs(amp)).conjugate())
    return field


def output_fields(setting: PairSetting) -> tuple[FieldState, FieldState]:
    """Propagate a unit carrier through the network.

    Returns the port A and port B fields. Port A holds the arm-1 V term
    (amplitude -e^{i s phi}/2) and the arm-2 H term (+1/2); port B holds
    the arm-1 H term (+e^{i s phi}/2) and the arm-2 V term (+1/2), with
    s the orientation sign. Both ports carry power 1/2.
    """
    carrier = FieldState([(ModeLabel(Path.PATH1, Pol.H, Detune.PLUS), 1.0 + 0j)])
    diagonal = hwp_22_5(carrier)
    split = _split_into_arms(diagonal)
    sign1 = setting.orientation.arm_detune(Path.PATH1)
    sign2 = setting.orientation.arm_detune(Path.PATH2)
    tagged = aom_tag(split, Path.PATH1, sign1, sign1.sign * setting.phase)
    tagged = aom_tag(tagged, Path.PATH2, sign2, 0.0)
    folded = mirror(tagged, Path.PATH1)  # arm 1 crosses one extra fold
    port_a, port_b = pbs_route(folded)
    return _anchor_phase(port_a), _anchor_phase(port_b)


def local_intensity(field: FieldState) -> float:
    """Detected intensity without an analyzer.

    Distinct labels are orthogonal modes, so this is the plain power sum;
    for either network output it is 1/2 regardless of delay, detuning and
    orientation.
    """
    return field.power()


def eraser_amplitudes(setting: PairSetting, eraser: EraserSetting) -> tuple[FieldState, FieldState]:
    """Common-basis amplitudes behind the two analyzers.

    Each term keeps its (path, polarization-origin, branch) tag and its
    amplitude is scaled by the projection of its original polarization onto
    the analyzer axis. The port B field carries a conventional global i.
    """
    port_a, port_b = output_fields(setting)
    e_s = FieldState(
        [(label, amp * analyzer_projection(label.pol, eraser.xi)) for label, amp in port_a.terms()]
    )
    e_i = FieldState(
        [(label, 1j * amp * analyzer_projection(label.pol, eraser.theta)) for label, amp in port_b.terms()]
    )
    return e_s, e_i


def eraser_intensity(field: FieldState) -> float:
    """Intensity behind an analyzer: all terms share the analyzer axis and
    interfere, so this is the squared modulus of the coherent sum."""
    return abs(field.coherent_sum()) ** 2


def port_intensities(xi, theta, phi):
    """Closed forms of the analyzer-passed intensities at both ports.

    I_s = (1 - sin(2 xi) cos(phi)) / 4 and I_i = (1 + sin(2 theta) cos(phi)) / 4.
    Accepts scalars or numpy arrays; cross-checked against the structural
    amplitude path in the test suite.
    """
    cos_phi = np.cos(phi)
    i_s = 0.25 * (1.0 - np.sin(2.0 * np.asarray(xi)) * cos_phi)
    i_i = 0.25 * (1.0 + np.sin(2.0 * np.asarray(theta)) * cos_phi)
    return i_s, i_i
