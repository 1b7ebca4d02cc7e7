"""Body-segment parameters of the thigh, shank and foot from height and weight.

Contini's regressions take height in inches and weight in pounds and return
densities, volumes, masses (lb), lengths (in) and inertia diagonals
(lb*in^2). The formulas are applied literally, unit labels included, and
:func:`to_si` converts the result for the dynamics.

Measured values for the nominal subject are available as :data:`NOMINAL_SEGMENTS`,
which is what the simulations use by default.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

LB_TO_KG = 0.45359237
IN_TO_M = 0.0254
GCM2_TO_KGM2 = 1e-7
LBIN2_TO_KGM2 = LB_TO_KG * IN_TO_M**2

SEGMENT_NAMES = ("thigh", "shank", "foot")


class AnthropometryError(ValueError):
    """Invalid subject or a unit-system mix-up."""


@dataclass(frozen=True)
class SubjectProfile:
    height_in: float
    weight_lb: float

    def __post_init__(self):
        if not (np.isfinite(self.height_in) and self.height_in > 0):
            raise AnthropometryError(f"height must be positive, got {self.height_in!r} in")
        if not (np.isfinite(self.weight_lb) and self.weight_lb > 0):
            raise AnthropometryError(f"weight must be positive, got {self.weight_lb!r} lb")


NOMINAL_SUBJECT = SubjectProfile(height_in=67.0, weight_lb=163.0)


@dataclass(frozen=True)
class BodyComposition:
    c_index: float
    body_density: float
    thigh_density: float
    shank_density: float
    foot_density: float
    body_volume: float


@dataclass(frozen=True)
class SegmentParams:
    """Inertial description of one segment.

    ``inertia`` is a diagonal 3x3 tensor about the COM, in the order the
    regression lists its radii of gyration. ``com_offset`` is measured from
    the proximal joint along the segment axis. ``ankle_height`` is only set
    for the foot.
    """

    mass: float
    length: float
    com_offset: float
    inertia: np.ndarray
    ankle_height: float | None = None

    def __post_init__(self):
        inertia = np.array(self.inertia, dtype=float)
        if inertia.shape == (3,):
            inertia = np.diag(inertia)
        if inertia.shape != (3, 3):
            raise AnthropometryError(f"inertia must be 3x3, got shape {inertia.shape}")
        inertia.setflags(write=False)
        object.__setattr__(self, "inertia", inertia)

    @property
    def principal(self) -> np.ndarray:
        return np.diag(self.inertia).copy()

    def validate(self) -> None:
        if not self.mass > 0:
            raise AnthropometryError(f"segment mass must be positive, got {self.mass}")
        if not 0 < self.com_offset < self.length:
            raise AnthropometryError(
                f"COM offset {self.com_offset} must lie inside the segment (length {self.length})")
        d = self.principal
        if np.any(d <= 0):
            raise AnthropometryError(f"inertia diagonal must be positive, got {d}")
        for i in range(3):
            if d[i] > d[(i + 1) % 3] + d[(i + 2) % 3] * (1 + 1e-12):
                raise AnthropometryError(f"inertia {d} violates the triangle inequality")


@dataclass(frozen=True)
class SegmentSet:
    thigh: SegmentParams
    shank: SegmentParams
    foot: SegmentParams
    unit_system: str = "imperial"

    def __post_init__(self):
        if self.unit_system not in ("imperial", "si"):
            raise AnthropometryError(f"unknown unit system {self.unit_system!r}")

    def segments(self) -> dict[str, SegmentParams]:
        return {"thigh": self.thigh, "shank": self.shank, "foot": self.foot}

    def validate(self) -> None:
        for seg in self.segments().values():
            seg.validate()


def body_composition(subject: SubjectProfile) -> BodyComposition:
    H, W = subject.height_in, subject.weight_lb
    C = H * W ** (-1.0 / 3.0)
    Bd = 0.6905 + 0.0297 * C
    return BodyComposition(
        c_index=C,
        body_density=Bd,
        thigh_density=1.035 + 0.814 * Bd,
        shank_density=1.065 + Bd,
        foot_density=1.071 + Bd,
        body_volume=W / Bd,
    )


def segment_parameters(subject: SubjectProfile) -> SegmentSet:
    """Contini's segment regressions, imperial units (lb, in, lb*in^2)."""
    comp = body_composition(subject)
    H = subject.height_in
    Bv = comp.body_volume

    Tm = 0.0922 * Bv * comp.thigh_density
    Sm = 0.0464 * Bv * comp.shank_density
    Fm = 0.0124 * Bv * comp.foot_density

    Tl, Sl, Fl, Ag = 0.245 * H, 0.285 * H, 0.152 * H, 0.043 * H

    thigh = SegmentParams(
        mass=Tm, length=Tl, com_offset=0.41 * Tl,
        inertia=Tm * np.array([0.124 * Tl, 0.267 * Tl, 0.267 * Tl]) ** 2)
    shank = SegmentParams(
        mass=Sm, length=Sl, com_offset=0.393 * Sl,
        inertia=Sm * np.array([0.281 * Sl, 0.114 * Sl, 0.275 * Sl]) ** 2)
    foot = SegmentParams(
        mass=Fm, length=Fl, com_offset=0.445 * Fl,
        inertia=Fm * np.array([0.124 * Fl, 0.245 * Fl, 0.257 * Fl]) ** 2,
        ankle_height=Ag)
    return SegmentSet(thigh, shank, foot, unit_system="imperial")


def _convert(seg: SegmentParams, mass_k: float, len_k: float) -> SegmentParams:
    return SegmentParams(
        mass=seg.mass * mass_k,
        length=seg.length * len_k,
        com_offset=seg.com_offset * len_k,
        inertia=seg.inertia * (mass_k * len_k**2),
        ankle_height=None if seg.ankle_height is None else seg.ankle_height * len_k,
    )


def to_si(segments: SegmentSet) -> SegmentSet:
    """lb -> kg, in -> m, lb*in^2 -> kg*m^2."""
    if segments.unit_system != "imperial":
        raise AnthropometryError("segment set is already in SI units")
    conv = {name: _convert(seg, LB_TO_KG, IN_TO_M) for name, seg in segments.segments().items()}
    return SegmentSet(**conv, unit_system="si")


def to_imperial(segments: SegmentSet) -> SegmentSet:
    if segments.unit_system != "si":
        raise AnthropometryError("segment set is already in imperial units")
    conv = {name: _convert(seg, 1.0 / LB_TO_KG, 1.0 / IN_TO_M)
            for name, seg in segments.segments().items()}
    return SegmentSet(**conv, unit_system="imperial")


def gcm2_to_kgm2(value):
    return np.asarray(value, dtype=float) * GCM2_TO_KGM2


# Measured parameters of the nominal 163 lb / 67 in subject. Masses, lengths
# and COM distances come from the imperial column; inertias from g*cm^2.
NOMINAL_SEGMENTS = SegmentSet(
    thigh=SegmentParams(
        mass=12.45 * LB_TO_KG, length=16.14 * IN_TO_M, com_offset=6.69 * IN_TO_M,
        inertia=gcm2_to_kgm2([151e3, 700e3, 700e3])),
    shank=SegmentParams(
        mass=7.67 * LB_TO_KG, length=18.89 * IN_TO_M, com_offset=7.48 * IN_TO_M,
        inertia=gcm2_to_kgm2([648e3, 107e3, 620e3])),
    foot=SegmentParams(
        mass=2.05 * LB_TO_KG, length=10.23 * IN_TO_M, com_offset=4.5 * IN_TO_M,
        inertia=gcm2_to_kgm2([10e3, 37e3, 41e3]),
        ankle_height=0.043 * 67.0 * IN_TO_M),
    unit_system="si",
)


def scale_segments(base: SegmentSet, mass_ratio: float, length_ratio: float) -> SegmentSet:
    """Scale an SI segment set: masses by ``mass_ratio``, lengths by
    ``length_ratio``, inertias by ``mass_ratio * length_ratio**2``."""
    if base.unit_system != "si":
        raise AnthropometryError("scaling expects an SI segment set")
    out = {}
    for name, seg in base.segments().items():
        out[name] = replace(
            seg,
            mass=seg.mass * mass_ratio,
            length=seg.length * length_ratio,
            com_offset=seg.com_offset * length_ratio,
            inertia=seg.inertia * mass_ratio * length_ratio**2,
            ankle_height=None if seg.ankle_height is None else seg.ankle_height * length_ratio,
        )
    return SegmentSet(**out, unit_system="si")


def write_segment_csv(segments: SegmentSet, path) -> Path:
    """CSV report: segment, mass_kg, length_m, com_m, Ixx, Iyy, Izz."""
    if segments.unit_system != "si":
        segments = to_si(segments)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["segment", "mass_kg", "length_m", "com_m", "Ixx", "Iyy", "Izz"])
        for name, seg in segments.segments().items():
            w.writerow([name] + [f"{v:.9g}" for v in
                                 (seg.mass, seg.length, seg.com_offset, *seg.principal)])
    return path
