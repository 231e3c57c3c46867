"""Kinematic chain, box-obstacle worlds, collision checks and damped least-squares IK.

Frames follow ``T_j = T_{j-1} @ Rot(axis_j, q_j) @ Trans(offset_j)``: joint ``j`` sits at
the origin of frame ``j-1`` and its link extends by ``offset_j`` in the rotated frame.
Collision geometry is a set of spheres rigidly attached to links.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class KinematicChain:
    axes: np.ndarray  # (n, 3) unit rotation axes in the parent frame
    offsets: np.ndarray  # (n, 3) link vectors, meters
    lower: np.ndarray  # (n,) radians
    upper: np.ndarray  # (n,) radians
    max_speed: np.ndarray  # (n,) rad/s
    sphere_link: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    sphere_offset: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    sphere_radius: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.axes = np.asarray(self.axes, dtype=float).reshape(-1, 3)
        n = len(self.axes)
        norms = np.linalg.norm(self.axes, axis=1)
        if np.any(norms == 0):
            raise ValueError("joint axes must be non-zero")
        self.axes = self.axes / norms[:, None]
        self.offsets = np.asarray(self.offsets, dtype=float).reshape(n, 3)
        self.lower = np.asarray(self.lower, dtype=float).reshape(n)
        self.upper = np.asarray(self.upper, dtype=float).reshape(n)
        self.max_speed = np.broadcast_to(np.asarray(self.max_speed, dtype=float), (n,)).copy()
        self.sphere_link = np.asarray(self.sphere_link, dtype=int).reshape(-1)
        m = len(self.sphere_link)
        self.sphere_offset = np.asarray(self.sphere_offset, dtype=float).reshape(m, 3)
        self.sphere_radius = np.asarray(self.sphere_radius, dtype=float).reshape(m)
        if np.any(self.lower >= self.upper):
            raise ValueError("joint limits need min < max")
        if np.any(self.sphere_radius <= 0):
            raise ValueError("sphere radii must be positive")
        if m and (self.sphere_link.min() < 0 or self.sphere_link.max() >= n):
            raise ValueError("sphere attached to a non-existent link")
        self._lipschitz = None
        self._rodrigues = None

    @property
    def dof(self) -> int:
        return len(self.axes)

    @property
    def reach(self) -> float:
        return float(np.linalg.norm(self.offsets, axis=1).sum())

    @property
    def sphere_lipschitz(self) -> float:
        """Upper bound on sphere-center speed (m) per radian of joint motion.

        A sphere on link ``l`` is at most ``R_j`` from joint ``j <= l``, where ``R_j`` sums
        the link lengths in between plus the sphere offset; so ``|dc| <= |R| |dq|``.
        """
        if self._lipschitz is None:
            lengths = np.linalg.norm(self.offsets, axis=1)
            best = 0.0
            for link, off in zip(self.sphere_link, self.sphere_offset):
                radii = [lengths[j:link].sum() + np.linalg.norm(off) for j in range(link + 1)]
                best = max(best, float(np.linalg.norm(radii)))
            self._lipschitz = best
        return self._lipschitz


@dataclass
class BoxObstacle:
    center: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(3)
        self.half_extents = np.asarray(self.half_extents, dtype=float).reshape(3)
        if np.any(self.half_extents <= 0):
            raise ValueError("box half-extents must be positive")


@dataclass
class WorldModel:
    chain: KinematicChain
    obstacles: list[BoxObstacle] = field(default_factory=list)
    name: str = "world"

    def __post_init__(self):
        if self.obstacles:
            self._centers = np.stack([b.center for b in self.obstacles])
            self._halves = np.stack([b.half_extents for b in self.obstacles])
        else:
            self._centers = np.zeros((0, 3))
            self._halves = np.zeros((0, 3))

    def with_obstacles(self, obstacles) -> "WorldModel":
        return WorldModel(self.chain, list(obstacles), self.name)


@dataclass
class FKResult:
    positions: np.ndarray  # (..., n+1, 3): base, then the end of every link
    rotations: np.ndarray  # (..., n+1, 3, 3)
    sphere_centers: np.ndarray  # (..., m, 3)

    @property
    def end_effector(self) -> np.ndarray:
        return self.positions[..., -1, :]


_EYE3 = np.eye(3)


def _joint_rotations(chain: KinematicChain, Q: np.ndarray) -> np.ndarray:
    """All joint rotations at once, shape (k, n, 3, 3)."""
    if chain._rodrigues is None:
        A = chain.axes[:, :, None] * chain.axes[:, None, :]
        x, y, z = chain.axes.T
        o = np.zeros_like(x)
        K = np.stack([np.stack([o, -z, y], -1), np.stack([z, o, -x], -1), np.stack([-y, x, o], -1)], 1)
        chain._rodrigues = (A, _EYE3 - A, K)
    A, B, K = chain._rodrigues
    return A + B * np.cos(Q)[..., None, None] + K * np.sin(Q)[..., None, None]


def _as_batch(chain: KinematicChain, q) -> tuple[np.ndarray, bool]:
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    if q.shape[-1] != chain.dof:
        raise ValueError(f"expected {chain.dof} joint values, got {q.shape[-1]}")
    return q, single


def forward_kinematics(chain: KinematicChain, q) -> FKResult:
    """Link frames and world-space sphere centers for one configuration or a batch ``(k, n)``."""
    Q, single = _as_batch(chain, q)
    k, n = Q.shape
    Rj = _joint_rotations(chain, Q)
    R = np.broadcast_to(_EYE3, (k, 3, 3))
    p = np.zeros((k, 3))
    positions = [p]
    rotations = [R]  # rotations[j + 1] is the frame right after joint j turns
    for j in range(n):
        R = R @ Rj[:, j]
        p = p + R @ chain.offsets[j]
        positions.append(p)
        rotations.append(R)
    P = np.stack(positions, axis=1)
    Rs = np.stack(rotations, axis=1)
    if len(chain.sphere_link):
        JR = Rs[:, chain.sphere_link + 1]  # (k, m, 3, 3)
        origins = P[:, chain.sphere_link]  # joint l sits at the end of link l-1
        centers = origins + np.einsum("kmij,mj->kmi", JR, chain.sphere_offset)
    else:
        centers = np.zeros((k, 0, 3))
    if single:
        return FKResult(P[0], Rs[0], centers[0])
    return FKResult(P, Rs, centers)


def sphere_centers(chain: KinematicChain, Q: np.ndarray) -> np.ndarray:
    return forward_kinematics(chain, np.atleast_2d(Q)).sphere_centers


def clearance(world: WorldModel, q) -> np.ndarray:
    """Minimum over spheres and boxes of (signed distance - radius); negative means contact.

    Returns a scalar for a single configuration and shape ``(k,)`` for a batch.
    """
    Q, single = _as_batch(world.chain, q)
    if not len(world.obstacles) or not len(world.chain.sphere_link):
        out = np.full(len(Q), np.inf)
        return out[0] if single else out
    c = sphere_centers(world.chain, Q)  # (k, m, 3)
    d = np.abs(c[:, :, None, :] - world._centers) - world._halves  # (k, m, b, 3)
    outside = np.linalg.norm(np.maximum(d, 0.0), axis=-1)
    inside = np.minimum(d.max(axis=-1), 0.0)
    gap = outside + inside - world.chain.sphere_radius[None, :, None]
    out = gap.reshape(len(Q), -1).min(axis=1)
    return out[0] if single else out


def check_collision(world: WorldModel, q) -> bool | np.ndarray:
    """True where any sphere is strictly closer to a box than its radius; touching is free."""
    return clearance(world, q) < 0.0


def check_joint_limits(chain: KinematicChain, q) -> bool:
    """True if any joint lies outside its closed ``[min, max]`` interval."""
    q = np.asarray(q, dtype=float)
    return bool(np.any(q < chain.lower) or np.any(q > chain.upper))


def _interpolate(qa, qb, resolution):
    span = float(np.linalg.norm(qb - qa))
    count = max(int(np.ceil(span / resolution)), 1)
    s = np.linspace(0.0, 1.0, count + 1)
    return qa + s[:, None] * (qb - qa), span / count


def segment_collision_free(world: WorldModel, qa, qb, resolution: float = 0.02) -> bool:
    """Check the straight joint-space segment ``qa -> qb``.

    Samples spaced at most ``resolution`` apart are tested directly. Gaps between
    samples are then certified with the sphere Lipschitz bound: an interval of length
    ``h`` whose endpoint clearances satisfy ``c_a + c_b > L h`` cannot touch a box.
    Uncertified gaps are bisected; one that cannot be certified down to
    ``resolution * 1e-3`` is reported as colliding, so a True result covers the whole
    continuous segment.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    qa = np.asarray(qa, dtype=float)
    qb = np.asarray(qb, dtype=float)
    if not len(world.obstacles):
        return True
    pts, h = _interpolate(qa, qb, resolution)
    c = clearance(world, pts)
    if np.any(c < 0.0):
        return False
    if len(pts) == 1:
        return True
    L = world.chain.sphere_lipschitz
    floor = resolution * 1e-3
    pending = [(pts[i], pts[i + 1], c[i], c[i + 1], h) for i in np.flatnonzero(c[:-1] + c[1:] <= L * h)]
    while pending:
        a, b, ca, cb, length = pending.pop()
        if length < floor:
            return False
        mid = 0.5 * (a + b)
        cm = float(clearance(world, mid))
        if cm < 0.0:
            return False
        half = 0.5 * length
        if ca + cm <= L * half:
            pending.append((a, mid, ca, cm, half))
        if cm + cb <= L * half:
            pending.append((mid, b, cm, cb, half))
    return True


def jacobian(chain: KinematicChain, q) -> np.ndarray:
    """Geometric position Jacobian of the end effector, shape ``(3, n)``."""
    q = np.asarray(q, dtype=float)
    fk = forward_kinematics(chain, q)
    ee = fk.end_effector
    J = np.empty((3, chain.dof))
    for j in range(chain.dof):
        axis = fk.rotations[j] @ chain.axes[j]
        J[:, j] = np.cross(axis, ee - fk.positions[j])
    return J


def solve_ik(
    chain: KinematicChain,
    target,
    seed,
    tol: float = 1e-4,
    max_iters: int = 200,
    damping: float = 0.05,
) -> np.ndarray | None:
    """Damped least-squares position IK, projected onto the joint limits each iteration.

    Returns the joint vector, or None when it does not converge or the target is out of reach.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    target = np.asarray(target, dtype=float)
    q = np.asarray(seed, dtype=float).copy()
    if np.linalg.norm(target) > chain.reach:
        return None
    for _ in range(max_iters + 1):
        err = target - forward_kinematics(chain, q).end_effector
        if np.linalg.norm(err) <= tol:
            return None if check_joint_limits(chain, q) else q
        J = jacobian(chain, q)
        dq = J.T @ np.linalg.solve(J @ J.T + damping**2 * np.eye(3), err)
        q = np.clip(q + dq, chain.lower, chain.upper)
    return None


def chain_from_dict(d: dict) -> KinematicChain:
    joints = d["joints"]
    spheres = d.get("spheres", [])
    offsets = []
    for s in spheres:
        off = s["offset"]
        if np.isscalar(off):  # fraction along the link
            off = float(off) * np.asarray(joints[s["link"]]["offset"], dtype=float)
        offsets.append(off)
    return KinematicChain(
        axes=[j["axis"] for j in joints],
        offsets=[j["offset"] for j in joints],
        lower=np.radians([j["min_deg"] for j in joints]),
        upper=np.radians([j["max_deg"] for j in joints]),
        max_speed=np.radians([j["max_speed"] for j in joints]),
        sphere_link=[s["link"] for s in spheres],
        sphere_offset=np.reshape(offsets, (-1, 3)),
        sphere_radius=[s["radius"] for s in spheres],
    )


def world_from_dict(d: dict) -> WorldModel:
    obstacles = [BoxObstacle(o["center"], o["half_extents"]) for o in d.get("obstacles", [])]
    return WorldModel(chain_from_dict(d["chain"]), obstacles, d.get("name", "world"))


def world_to_dict(world: WorldModel) -> dict:
    ch = world.chain
    return {
        "name": world.name,
        "chain": {
            "joints": [
                {
                    "axis": ch.axes[j].tolist(),
                    "offset": ch.offsets[j].tolist(),
                    "min_deg": float(np.degrees(ch.lower[j])),
                    "max_deg": float(np.degrees(ch.upper[j])),
                    "max_speed": float(np.degrees(ch.max_speed[j])),
                }
                for j in range(ch.dof)
            ],
            "spheres": [
                {"link": int(l), "offset": o.tolist(), "radius": float(r)}
                for l, o, r in zip(ch.sphere_link, ch.sphere_offset, ch.sphere_radius)
            ],
        },
        "obstacles": [{"center": b.center.tolist(), "half_extents": b.half_extents.tolist()} for b in world.obstacles],
    }


def load_world(path) -> WorldModel:
    with open(path) as f:
        return world_from_dict(json.load(f))


def save_world(world: WorldModel, path) -> None:
    Path(path).write_text(json.dumps(world_to_dict(world), indent=2))
