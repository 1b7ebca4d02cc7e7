"""Modified-DH forward kinematics and per-link COM velocities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import N_JOINTS, ChainGeometry, DhRow, RobotModel


@dataclass(frozen=True)
class HomTransform:
    rotation: np.ndarray
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "HomTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "HomTransform":
        return cls(T[:3, :3].copy(), T[:3, 3].copy())

    @property
    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def __matmul__(self, other: "HomTransform") -> "HomTransform":
        return HomTransform(self.rotation @ other.rotation,
                            self.rotation @ other.translation + self.translation)


def dh_transform(q_joint: float, row: DhRow) -> HomTransform:
    """Frame i relative to frame i-1: Rx(alpha) Dx(a) Rz(theta) Dz(d)."""
    th = q_joint + row.theta_offset
    ct, st = np.cos(th), np.sin(th)
    ca, sa = np.cos(row.alpha_prev), np.sin(row.alpha_prev)
    R = np.array([
        [ct, -st, 0.0],
        [st * ca, ct * ca, -sa],
        [st * sa, ct * sa, ca],
    ])
    p = np.array([row.a_prev, -sa * row.d, ca * row.d])
    return HomTransform(R, p)


def link_transforms(q, geom: ChainGeometry) -> list[HomTransform]:
    q = np.asarray(q, dtype=float)
    return [dh_transform(q[i], row) for i, row in enumerate(geom.dh_rows)]


def link_poses(q, geom: ChainGeometry) -> list[HomTransform]:
    """Pose of every link frame in the base (hip) frame."""
    poses = []
    T = HomTransform.identity()
    for Ti in link_transforms(q, geom):
        T = T @ Ti
        poses.append(T)
    return poses


def forward_kinematics(q, geom: ChainGeometry, n_links: int = N_JOINTS) -> HomTransform:
    """Foot frame (or frame ``n_links``) relative to the hip."""
    T = HomTransform.identity()
    for Ti in link_transforms(q, geom)[:n_links]:
        T = T @ Ti
    return T


@dataclass(frozen=True)
class ComKinematics:
    com_position: np.ndarray        # (7, 3) base frame
    com_velocity: np.ndarray        # (7, 3) base frame
    angular_velocity: np.ndarray    # (7, 3) link frame
    rotation: np.ndarray            # (7, 3, 3) link -> base


def com_jacobians(q, model: RobotModel):
    """Geometric Jacobians of every link COM.

    Returns ``(Jv, Jw, positions, rotations)`` with ``Jv, Jw`` of shape
    (7, 3, 7) in base coordinates.
    """
    poses = link_poses(q, model.geometry)
    axes = np.array([T.rotation[:, 2] for T in poses])
    origins = np.array([T.translation for T in poses])
    pos = np.array([T.translation + T.rotation @ c for T, c in zip(poses, model.com)])
    Jv = np.zeros((N_JOINTS, 3, N_JOINTS))
    Jw = np.zeros((N_JOINTS, 3, N_JOINTS))
    for i in range(N_JOINTS):
        for j in range(i + 1):
            Jw[i, :, j] = axes[j]
            Jv[i, :, j] = np.cross(axes[j], pos[i] - origins[j])
    rot = np.array([T.rotation for T in poses])
    return Jv, Jw, pos, rot


def com_kinematics(q, qdot, model: RobotModel) -> ComKinematics:
    Jv, Jw, pos, rot = com_jacobians(q, model)
    qdot = np.asarray(qdot, dtype=float)
    v = Jv @ qdot
    w_base = Jw @ qdot
    w_link = np.einsum("kji,kj->ki", rot, w_base)
    return ComKinematics(pos, v, w_link, rot)
