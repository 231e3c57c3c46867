"""Regenerate the bundled world JSON files under src/reftraj/data/worlds."""

from pathlib import Path

import numpy as np

from reftraj.arm import BoxObstacle, KinematicChain, WorldModel, save_world

OUT = Path(__file__).resolve().parents[1] / "src" / "reftraj" / "data" / "worlds"


def spheres(link, offset, count, radius, start=0.0, end=1.0):
    return [(link, t * np.asarray(offset, dtype=float), radius) for t in np.linspace(start, end, count)]


def six_dof_chain():
    offsets = [[0, 0, 0.35], [0, 0, 0.31], [0, 0, 0.335], [0, 0, 0.0], [0, 0, 0.09], [0, 0, 0.0]]
    sph = spheres(1, offsets[1], 4, 0.05, 0.15) + spheres(2, offsets[2], 5, 0.045) + spheres(4, offsets[4], 2, 0.035, 0.4)
    return KinematicChain(
        axes=[[0, 0, 1], [0, 1, 0], [0, 1, 0], [0, 0, 1], [0, 1, 0], [0, 0, 1]],
        offsets=offsets,
        lower=np.radians([-240, -115, 0, -200, -120, -360]),
        upper=np.radians([240, 125, 161, 200, 120, 360]),
        max_speed=np.radians([420, 336, 250, 540, 623, 720]),
        sphere_link=[s[0] for s in sph],
        sphere_offset=[s[1] for s in sph],
        sphere_radius=[s[2] for s in sph],
    )


def box(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    return BoxObstacle((lo + hi) / 2, (hi - lo) / 2)


def bookshelf():
    # two columns of 500 mm, three stages of 200 mm, 300 mm deep, opening toward +y
    t = 0.01
    front, back = -0.315, -0.615
    x0, x1 = -0.5, 0.5
    z_boards = [0.08, 0.27, 0.46, 0.65]
    obs = [box([x0 - t, back, z - t], [x1 + t, front, z + t]) for z in z_boards]
    for x in (x0, 0.0, x1):
        obs.append(box([x - t, back, z_boards[0]], [x + t, front, z_boards[-1]]))
    obs.append(box([x0 - t, back - 2 * t, z_boards[0]], [x1 + t, back, z_boards[-1]]))
    obs.append(box([x0 - t, back, -0.05], [x1 + t, front, z_boards[0] - t]))  # plinth
    return WorldModel(six_dof_chain(), obs, "bookshelf")


def open_computer():
    t = 0.01
    obs = [
        box([-0.2, -0.6, 0.0], [0.4, -0.12, 0.02]),  # motherboard tray
        box([-0.2, -0.6, 0.0], [0.4, -0.6 + 2 * t, 0.3]),  # back panel
        box([-0.2, -0.6, 0.0], [-0.2 + 2 * t, -0.12, 0.3]),  # side panels
        box([0.4 - 2 * t, -0.6, 0.0], [0.4, -0.12, 0.3]),
        box([-0.2, -0.12 - 2 * t, 0.0], [0.4, -0.12, 0.12]),  # low front lip
        box([0.06, -0.58, 0.02], [0.1, -0.16, 0.36]),  # expansion card between connector and socket
        box([-0.18, -0.42, 0.02], [-0.08, -0.3, 0.18]),  # drive cage
    ]
    return WorldModel(six_dof_chain(), obs, "open-computer")


def planar_chain():
    offsets = [[0.5, 0, 0], [0.4, 0, 0]]
    sph = spheres(0, offsets[0], 5, 0.04, 0.2) + spheres(1, offsets[1], 5, 0.04, 0.1)
    return KinematicChain(
        axes=[[0, 0, 1], [0, 0, 1]],
        offsets=offsets,
        lower=np.radians([-170, -160]),
        upper=np.radians([170, 160]),
        max_speed=np.radians([90, 90]),
        sphere_link=[s[0] for s in sph],
        sphere_offset=[s[1] for s in sph],
        sphere_radius=[s[2] for s in sph],
    )


def toy_planar():
    obs = [
        box([0.62, 0.2, -0.1], [0.78, 0.36, 0.1]),
        box([-0.3, 0.62, -0.1], [-0.14, 0.78, 0.1]),
    ]
    return WorldModel(planar_chain(), obs, "toy-planar")


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for world in (bookshelf(), open_computer(), toy_planar()):
        save_world(world, OUT / f"{world.name}.json")
        print("wrote", world.name)
