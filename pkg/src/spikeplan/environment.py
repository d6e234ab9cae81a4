"""Kinematic 2D workspace with static obstacles and a safety stop."""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .network import Trajectory

WORLD_FORMAT = "spikeplan-world"
WORLD_VERSION = 1

# contact points are backed off this far from the boundary, outward
CONTACT_BACKOFF = 1e-9


class WorldFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Circle:
    center: tuple
    radius: float
    id: str = ""

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("circle radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def contains(self, point, strict=True):
        d = np.linalg.norm(np.asarray(point, dtype=float) - self.center)
        return bool(d < self.radius) if strict else bool(d <= self.radius)

    def entry_interval(self, p0, p1):
        """Parameter interval ``(t_in, t_out)`` of the line inside the open disc."""
        c = np.asarray(self.center)
        d = p1 - p0
        f = p0 - c
        a = d @ d
        if a == 0.0:
            return (-np.inf, np.inf) if self.contains(p0) else None
        b = 2.0 * (f @ d)
        cc = f @ f - self.radius**2
        disc = b * b - 4 * a * cc
        if disc <= 0:
            return None
        s = np.sqrt(disc)
        return (-b - s) / (2 * a), (-b + s) / (2 * a)

    def vertices_bbox(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def to_dict(self):
        return {"type": "circle", "id": self.id, "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Polygon:
    """Convex polygon; vertices may be given in either orientation."""

    vertices: tuple
    id: str = ""

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("polygon needs at least three 2D vertices")
        x, y = v[:, 0], v[:, 1]
        area2 = np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)
        if abs(area2) < 1e-12:
            raise ValueError("degenerate polygon")
        if area2 < 0:
            v = v[::-1]
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        if np.any(cross < -1e-12):
            raise ValueError("polygon must be convex")
        object.__setattr__(self, "vertices", tuple(map(tuple, v)))

    @property
    def _edges(self):
        v = np.asarray(self.vertices)
        e = np.roll(v, -1, axis=0) - v
        normals = np.stack([e[:, 1], -e[:, 0]], axis=1)  # outward for CCW
        return v, normals

    def contains(self, point, strict=True):
        v, n = self._edges
        s = ((np.asarray(point, dtype=float) - v) * n).sum(axis=1)
        return bool(np.all(s < 0)) if strict else bool(np.all(s <= 0))

    def entry_interval(self, p0, p1):
        """Cyrus-Beck clip of the line against the open polygon."""
        v, n = self._edges
        d = p1 - p0
        t_in, t_out = -np.inf, np.inf
        for q, nn in zip(v, n):
            num = nn @ (q - p0)
            den = nn @ d
            if den == 0.0:
                if num <= 0:
                    return None
                continue
            t = num / den
            if den < 0:
                t_in = max(t_in, t)
            else:
                t_out = min(t_out, t)
        if not t_in < t_out:
            return None
        return t_in, t_out

    def vertices_bbox(self):
        v = np.asarray(self.vertices)
        return v.min(axis=0), v.max(axis=0)

    def to_dict(self):
        return {"type": "polygon", "id": self.id, "vertices": [list(p) for p in self.vertices]}


def collides(segment, obstacle):
    """First entry of the directed segment into the obstacle's interior.

    Returns ``(hit, contact)``. Touching or leaving the boundary is not a hit.
    A segment starting inside hits at its start point.
    """
    p0, p1 = (np.asarray(p, dtype=float) for p in segment)
    iv = obstacle.entry_interval(p0, p1)
    if iv is None:
        return False, None
    t_in, t_out = iv
    lo, hi = max(t_in, 0.0), min(t_out, 1.0)
    if not lo < hi:
        return False, None
    length = np.linalg.norm(p1 - p0)
    if t_in <= 0.0 or length == 0.0:
        return True, p0.copy()
    t = max(0.0, t_in - CONTACT_BACKOFF / length)
    return True, p0 + t * (p1 - p0)


@dataclass
class World:
    obstacles: list = field(default_factory=list)
    waypoints: np.ndarray = None
    bounds: tuple = (-1.0, 1.0)
    # index of the waypoint that ends the obstructed leg, if any
    blocked_target: int = None
    name: str = ""

    def __post_init__(self):
        lo, hi = self.bounds
        self.bounds = (float(lo), float(hi))
        self.waypoints = np.asarray(
            self.waypoints if self.waypoints is not None else np.zeros((0, 2)), dtype=float
        ).reshape(-1, 2)
        for ob in self.obstacles:
            bmin, bmax = ob.vertices_bbox()
            if np.any(bmin < lo - 1e-12) or np.any(bmax > hi + 1e-12):
                raise ValueError(f"obstacle {ob.id!r} leaves the workspace")
        for w in self.waypoints:
            if np.any(w < lo) or np.any(w > hi):
                raise ValueError(f"waypoint {w} outside workspace")
            if self.inside_obstacle(w, strict=False):
                raise ValueError(f"waypoint {w} lies inside an obstacle")

    def inside_obstacle(self, point, strict=True):
        return any(ob.contains(point, strict) for ob in self.obstacles)

    def first_contact(self, p0, p1):
        """Closest contact over all obstacles along ``p0 -> p1``."""
        best = None
        for ob in self.obstacles:
            hit, c = collides((p0, p1), ob)
            if hit:
                dist = np.linalg.norm(c - p0)
                if best is None or dist < best[0]:
                    best = (dist, c, ob)
        return best

    def with_obstacles(self, extra, name=None):
        return replace(self, obstacles=list(self.obstacles) + list(extra), name=name or self.name)

    def to_dict(self):
        return {
            "format": WORLD_FORMAT,
            "version": WORLD_VERSION,
            "name": self.name,
            "bounds": list(self.bounds),
            "obstacles": [ob.to_dict() for ob in self.obstacles],
            "waypoints": self.waypoints.tolist(),
            "blocked_target": self.blocked_target,
        }


def execute(mental, world, start=None, noise=0.0, rng=None, standoff=0.0):
    """Track ``mental`` until the first obstacle contact, then hold position.

    ``start`` is the robot's actual position before the segment; the move to
    the first mental state is checked too. The safety stop halts ``standoff``
    before the contact along the current motion step (never behind the step's
    start). Optional Gaussian tracking noise with standard deviation ``noise``
    perturbs the followed states.

    Returns ``(executed, collided, contact)``.
    """
    target = mental.states
    if noise > 0:
        rng = rng if rng is not None else np.random.default_rng()
        target = np.clip(target + noise * rng.standard_normal(target.shape), *world.bounds)
    prev = np.asarray(start, dtype=float) if start is not None else target[0]
    out = target.copy()
    for t in range(len(target)):
        hit = world.first_contact(prev, target[t])
        if hit is not None:
            contact = hit[1]
            if standoff > 0:
                step = target[t] - prev
                n = np.linalg.norm(step)
                if n > 0:
                    back = min(standoff, hit[0])
                    contact = contact - back * step / n
            out[t:] = contact
            return replace(mental, states=out), True, contact
        prev = target[t]
    return replace(mental, states=out), False, None


def load_world(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise WorldFormatError(f"cannot read world file {path}: {exc}") from exc
    return world_from_dict(data)


def world_from_dict(data):
    if data.get("format") != WORLD_FORMAT:
        raise WorldFormatError("not a world description")
    if data.get("version") != WORLD_VERSION:
        raise WorldFormatError(f"unsupported world version {data.get('version')}")
    obstacles = []
    for i, ob in enumerate(data.get("obstacles", [])):
        kind = ob.get("type")
        oid = ob.get("id", f"obstacle{i}")
        try:
            if kind == "circle":
                obstacles.append(Circle(tuple(ob["center"]), float(ob["radius"]), oid))
            elif kind == "polygon":
                obstacles.append(Polygon(tuple(map(tuple, ob["vertices"])), oid))
            else:
                raise WorldFormatError(f"unknown obstacle type {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise WorldFormatError(f"bad obstacle {oid}: {exc}") from exc
    try:
        return World(
            obstacles=obstacles,
            waypoints=data.get("waypoints", []),
            bounds=tuple(data.get("bounds", (-1.0, 1.0))),
            blocked_target=data.get("blocked_target"),
            name=data.get("name", ""),
        )
    except ValueError as exc:
        raise WorldFormatError(str(exc)) from exc


def save_world(world, path):
    Path(path).write_text(json.dumps(world.to_dict(), indent=2) + "\n")


# Obstacle geometry for the presets is a reconstruction; the layout only
# matters qualitatively (one leg blocked, asymmetric detours).
PAPER_WAYPOINTS = [(-0.6, -0.6), (0.6, -0.6), (0.6, 0.6), (-0.6, 0.6)]


def paper_sim():
    ob = Polygon(((0.35, -0.1), (0.75, -0.05), (0.72, 0.15), (0.38, 0.2)), "block")
    return World([ob], PAPER_WAYPOINTS, blocked_target=2, name="paper-sim")


def paper_transfer():
    extra = Polygon(((-0.35, 0.4), (0.05, 0.4), (0.05, 0.85), (-0.35, 0.85)), "new")
    world = paper_sim().with_obstacles([extra], name="paper-transfer")
    return world


PRESETS = {"paper-sim": paper_sim, "paper-transfer": paper_transfer, "free": lambda: World(
    [], PAPER_WAYPOINTS, name="free")}


def get_world(name_or_path):
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]()
    return load_world(name_or_path)
