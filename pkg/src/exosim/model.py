"""Seven-joint leg chain: DH table, link inertial data and gravity."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anthropometry import NOMINAL_SEGMENTS, AnthropometryError, SegmentSet, to_si

N_JOINTS = 7
STANDARD_GRAVITY = 9.81

JOINT_NAMES = (
    "hip_abduction",
    "hip_flexion",
    "hip_rotation",
    "knee_flexion",
    "knee_rotation",
    "ankle_flexion",
    "ankle_inversion",
)

# link that carries each anatomical segment (0-based)
THIGH_LINK, SHANK_LINK, FOOT_LINK = 2, 4, 6


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class DhRow:
    """Modified DH row: theta = q + theta_offset, then d, a_{i-1}, alpha_{i-1}."""

    theta_offset: float = 0.0
    d: float = 0.0
    a_prev: float = 0.0
    alpha_prev: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite([self.theta_offset, self.d, self.a_prev, self.alpha_prev])):
            raise ModelError(f"non-finite DH row {self}")


def standard_dh_rows(l1: float, l2: float, a1: float) -> tuple[DhRow, ...]:
    h = np.pi / 2
    return (
        DhRow(0.0, 0.0, 0.0, 0.0),
        DhRow(-h, 0.0, 0.0, -h),
        DhRow(0.0, -l1, 0.0, -h),
        DhRow(0.0, 0.0, 0.0, h),
        DhRow(0.0, -l2, 0.0, -h),
        DhRow(-h, 0.0, 0.0, h),
        DhRow(0.0, 0.0, a1, -h),
    )


@dataclass(frozen=True)
class ChainGeometry:
    l1: float
    l2: float
    a1: float
    dh_rows: tuple[DhRow, ...] = field(default=None)

    def __post_init__(self):
        if not (self.l1 > 0 and self.l2 > 0 and self.a1 >= 0):
            raise ModelError(f"link lengths must be positive: l1={self.l1}, l2={self.l2}, a1={self.a1}")
        if self.dh_rows is None:
            object.__setattr__(self, "dh_rows", standard_dh_rows(self.l1, self.l2, self.a1))
        if len(self.dh_rows) != N_JOINTS:
            raise ModelError(f"expected {N_JOINTS} DH rows, got {len(self.dh_rows)}")

    @property
    def dh_array(self) -> np.ndarray:
        """(7, 4) array of theta_offset, d, a_prev, alpha_prev."""
        return np.array([[r.theta_offset, r.d, r.a_prev, r.alpha_prev] for r in self.dh_rows])


@dataclass(frozen=True, eq=False)
class RobotModel:
    """Immutable rigid-body description of the leg.

    Per-link arrays are indexed by joint. Links without an anatomical
    segment are massless frames. ``com`` is in link coordinates and
    ``inertia`` is about the COM, expressed in the link frame.
    """

    geometry: ChainGeometry
    mass: np.ndarray
    com: np.ndarray
    inertia: np.ndarray
    gravity: np.ndarray
    u_ref: float = 0.0

    def __post_init__(self):
        arrays = {
            "mass": (np.array(self.mass, dtype=float), (N_JOINTS,)),
            "com": (np.array(self.com, dtype=float), (N_JOINTS, 3)),
            "inertia": (np.array(self.inertia, dtype=float), (N_JOINTS, 3, 3)),
            "gravity": (np.array(self.gravity, dtype=float), (3,)),
        }
        for name, (arr, shape) in arrays.items():
            if arr.shape != shape:
                raise ModelError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.mass < 0) or not np.any(self.mass > 0):
            raise ModelError("link masses must be non-negative with at least one massive link")
        for i, I in enumerate(self.inertia):
            if not np.allclose(I, I.T, atol=1e-14):
                raise ModelError(f"inertia of link {i + 1} is not symmetric")
            if np.linalg.eigvalsh(I).min() < -1e-14:
                raise ModelError(f"inertia of link {i + 1} is not positive semidefinite")
            if self.mass[i] > 0 and np.linalg.eigvalsh(I).min() <= 0:
                raise ModelError(f"inertia of massive link {i + 1} must be positive definite")
        g = np.linalg.norm(self.gravity)
        if g > 20.0:
            raise ModelError(f"|gravity| = {g:.3g} m/s^2 is outside [0, 20]")

    @property
    def dh(self) -> np.ndarray:
        return self.geometry.dh_array

    def arrays(self):
        """Tuple consumed by the compiled kernels."""
        return (np.ascontiguousarray(self.dh), np.ascontiguousarray(self.mass),
                np.ascontiguousarray(self.com), np.ascontiguousarray(self.inertia),
                np.ascontiguousarray(self.gravity))

    def with_gravity(self, gravity) -> "RobotModel":
        return RobotModel(self.geometry, self.mass, self.com, self.inertia, gravity, self.u_ref)


def _long_axis_first(principal: np.ndarray) -> tuple[float, float, float]:
    """Split principal moments into (longitudinal, transverse_1, transverse_2).

    The smallest radius of gyration belongs to the long axis."""
    k = int(np.argmin(principal))
    rest = [principal[i] for i in range(3) if i != k]
    return principal[k], rest[0], rest[1]


def default_gravity(geometry: ChainGeometry, magnitude: float = STANDARD_GRAVITY) -> np.ndarray:
    """Gravity along the hip-to-foot direction of the straight leg (q = 0)."""
    from .kinematics import forward_kinematics

    p = forward_kinematics(np.zeros(N_JOINTS), geometry).translation
    return magnitude * p / np.linalg.norm(p)


def build_robot_model(segments: SegmentSet = NOMINAL_SEGMENTS, gravity=None, u_ref: float = 0.0) -> RobotModel:
    """Attach thigh, shank and foot to links 3, 5 and 7 of the chain.

    The thigh and shank long axes are the z axes of their link frames (the
    frame origins sit at the distal joint); the foot long axis is x of link 7,
    whose origin lies one foot length beyond the ankle.
    """
    if segments.unit_system != "si":
        segments = to_si(segments)
    try:
        segments.validate()
    except AnthropometryError as exc:
        raise ModelError(str(exc)) from exc
    th, sh, ft = segments.thigh, segments.shank, segments.foot
    geom = ChainGeometry(l1=th.length, l2=sh.length, a1=ft.length)

    mass = np.zeros(N_JOINTS)
    com = np.zeros((N_JOINTS, 3))
    inertia = np.zeros((N_JOINTS, 3, 3))

    lon, t1, t2 = _long_axis_first(th.principal)
    mass[THIGH_LINK] = th.mass
    com[THIGH_LINK] = (0.0, 0.0, th.length - th.com_offset)
    inertia[THIGH_LINK] = np.diag([t1, t2, lon])

    lon, t1, t2 = _long_axis_first(sh.principal)
    mass[SHANK_LINK] = sh.mass
    com[SHANK_LINK] = (0.0, 0.0, sh.length - sh.com_offset)
    inertia[SHANK_LINK] = np.diag([t1, t2, lon])

    lon, t1, t2 = _long_axis_first(ft.principal)
    mass[FOOT_LINK] = ft.mass
    com[FOOT_LINK] = (ft.com_offset - ft.length, 0.0, 0.0)
    inertia[FOOT_LINK] = np.diag([lon, t1, t2])

    if gravity is None:
        gravity = default_gravity(geom)
    return RobotModel(geom, mass, com, inertia, gravity, u_ref)
