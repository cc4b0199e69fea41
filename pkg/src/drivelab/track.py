"""Reference track: declarative section lists sampled into dense paths.

A track file lists one section per line:

    straight length=100 id=1
    arc radius=20 angle=180 id=2     # angle in degrees, positive = left

The default track is a closed 522 m circuit of seven sections alternating
straights and arcs, with a 20 m radius curve as section 2 and a tight 10 m
radius curve as section 6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import ConfigError

DEFAULT_V_REF = 10.0
SAMPLE_SPACING = 0.25

DEFAULT_TRACK_TEXT = """\
# default test track: closed 545 m circuit alternating long straights and
# left arcs of 20 m, 15 m and 10 m radius; the final 135 deg bend of
# section 6 has a kinematic speed limit of 7 m/s, well below the 10 m/s
# reference speed
straight length=130 id=1
arc radius=20 angle=135 id=2
straight length=120 id=3
arc radius=15 angle=90 id=4
straight length=144.14213562373095 id=5
arc radius=10 angle=135 id=6
straight length=56.77669529663686 id=7
"""


@dataclass
class TrackSection:
    kind: str                 # "straight" | "arc"
    section_id: int
    length: float = 0.0       # straights
    radius: float = 0.0       # arcs
    angle_deg: float = 0.0    # arcs, positive turns left

    @property
    def arc_length(self) -> float:
        if self.kind == "straight":
            return self.length
        return abs(math.radians(self.angle_deg)) * self.radius


class DivergenceError(RuntimeError):
    """Vehicle left the neighborhood of the reference path."""


@dataclass
class PathPoint:
    s: float
    lateral: float        # signed, positive when left of the path tangent
    heading: float
    section: int
    distance: float


@dataclass
class ReferencePath:
    xy: np.ndarray          # (N, 2)
    heading: np.ndarray     # (N,), unwrapped, continuous
    curvature: np.ndarray   # (N,)
    s: np.ndarray           # (N,), strictly increasing from 0
    section: np.ndarray     # (N,) int section ids
    v_ref: float = DEFAULT_V_REF
    closed: bool = False

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def wrap_s(self, s: float) -> float:
        if self.closed:
            return float(s % self.length)
        return float(np.clip(s, 0.0, self.length))

    def point_at(self, s: float) -> np.ndarray:
        sw = self.wrap_s(s)
        return np.array([np.interp(sw, self.s, self.xy[:, 0]),
                         np.interp(sw, self.s, self.xy[:, 1])])

    def heading_at(self, s: float) -> float:
        return float(np.interp(self.wrap_s(s), self.s, self.heading))

    def section_at(self, s: float) -> int:
        idx = int(np.searchsorted(self.s, self.wrap_s(s), side="right") - 1)
        return int(self.section[max(idx, 0)])


def parse_track_text(text: str) -> list[TrackSection]:
    sections: list[TrackSection] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind = tokens[0]
        kv: dict[str, float] = {}
        for token in tokens[1:]:
            if "=" not in token:
                raise ConfigError(f"track line {lineno}: expected key=value")
            key, _, value = token.partition("=")
            kv[key] = float(value)
        if "id" not in kv:
            raise ConfigError(f"track line {lineno}: missing section id")
        if kind == "straight":
            sections.append(TrackSection("straight", int(kv["id"]),
                                         length=kv["length"]))
        elif kind == "arc":
            sections.append(TrackSection("arc", int(kv["id"]),
                                         radius=kv["radius"],
                                         angle_deg=kv["angle"]))
        else:
            raise ConfigError(f"track line {lineno}: unknown section kind {kind!r}")
    if not sections:
        raise ConfigError("track file has no sections")
    return sections


def build_path(sections: list[TrackSection], v_ref: float = DEFAULT_V_REF,
               spacing: float = SAMPLE_SPACING) -> ReferencePath:
    xs, ys, headings, curvatures, ids = [0.0], [0.0], [0.0], [], []
    pos = np.zeros(2)
    heading = 0.0
    first_kappa = 0.0 if sections[0].kind == "straight" else \
        math.copysign(1.0 / sections[0].radius, sections[0].angle_deg)
    curvatures.append(first_kappa)
    ids.append(sections[0].section_id)

    for sec in sections:
        n = max(2, int(math.ceil(sec.arc_length / spacing)) + 1)
        u = np.linspace(0.0, 1.0, n)[1:]
        if sec.kind == "straight":
            direction = np.array([math.cos(heading), math.sin(heading)])
            pts = pos + u[:, None] * sec.length * direction
            hs = np.full(len(u), heading)
            kappa = np.zeros(len(u))
            pos = pts[-1]
        else:
            turn = math.radians(sec.angle_deg)
            side = 1.0 if turn >= 0 else -1.0
            center = pos + sec.radius * np.array([-math.sin(heading) * side,
                                                  math.cos(heading) * side])
            angles = heading - side * math.pi / 2.0 + u * turn
            pts = center + sec.radius * np.column_stack([np.cos(angles),
                                                         np.sin(angles)])
            hs = heading + u * turn
            kappa = np.full(len(u), side / sec.radius)
            pos = pts[-1]
            heading += turn
        xs.extend(pts[:, 0])
        ys.extend(pts[:, 1])
        headings.extend(hs)
        curvatures.extend(kappa)
        ids.extend([sec.section_id] * len(u))

    xy = np.column_stack([xs, ys])
    seg = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    closed = bool(np.linalg.norm(xy[-1] - xy[0]) < 1e-6)
    return ReferencePath(xy=xy, heading=np.asarray(headings),
                         curvature=np.asarray(curvatures), s=s,
                         section=np.asarray(ids, dtype=int),
                         v_ref=v_ref, closed=closed)


def default_track(v_ref: float = DEFAULT_V_REF) -> ReferencePath:
    return build_path(parse_track_text(DEFAULT_TRACK_TEXT), v_ref=v_ref)


def load_track(path: str, v_ref: float = DEFAULT_V_REF) -> ReferencePath:
    with open(path, "r", encoding="utf-8") as fh:
        return build_path(parse_track_text(fh.read()), v_ref=v_ref)


def path_from_points(xy: np.ndarray, v_ref: float, section_id: int = 1) -> ReferencePath:
    """Reference path through given samples (e.g. a recorded trajectory)."""
    xy = np.asarray(xy, dtype=float)
    diffs = np.diff(xy, axis=0)
    seg = np.linalg.norm(diffs, axis=1)
    keep = np.concatenate([[True], seg > 1e-9])
    xy = xy[keep]
    diffs = np.diff(xy, axis=0)
    seg = np.linalg.norm(diffs, axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    head = np.unwrap(np.arctan2(diffs[:, 1], diffs[:, 0]))
    heading = np.concatenate([head, [head[-1]]])
    kappa = np.gradient(heading, s)
    return ReferencePath(xy=xy, heading=heading, curvature=kappa, s=s,
                         section=np.full(len(xy), section_id, dtype=int),
                         v_ref=v_ref, closed=False)


MAX_OFFTRACK_DISTANCE = 50.0


def nearest_path_point(path: ReferencePath, position) -> PathPoint:
    """Closest path point, refined by projection onto adjacent segments.

    Lateral error is positive when the position lies left of the local
    tangent. Raises DivergenceError beyond MAX_OFFTRACK_DISTANCE.
    """
    pos = np.asarray(position, dtype=float)
    xy = path.xy
    n = len(xy)
    d2 = np.sum((xy - pos) ** 2, axis=1)
    i = int(np.argmin(d2))

    best = None
    for a in (i - 1, i):
        b = a + 1
        if path.closed:
            a %= n - 1 if np.allclose(xy[0], xy[-1]) else n
            b = a + 1 if a + 1 < n else 0
        elif a < 0 or b >= n:
            continue
        p0, p1 = xy[a], xy[b]
        seg = p1 - p0
        seg_len2 = float(seg @ seg)
        if seg_len2 == 0.0:
            continue
        t = float(np.clip((pos - p0) @ seg / seg_len2, 0.0, 1.0))
        foot = p0 + t * seg
        dist = float(np.linalg.norm(pos - foot))
        if best is None or dist < best[0]:
            s_here = path.s[a] + t * math.sqrt(seg_len2)
            cross = seg[0] * (pos - foot)[1] - seg[1] * (pos - foot)[0]
            lateral = math.copysign(dist, cross) if dist > 0 else 0.0
            best = (dist, s_here, lateral, a)
    dist, s_here, lateral, idx = best
    if dist > MAX_OFFTRACK_DISTANCE:
        raise DivergenceError(f"{dist:.1f} m from the reference path")
    return PathPoint(s=float(s_here), lateral=float(lateral),
                     heading=path.heading_at(s_here),
                     section=int(path.section[idx]), distance=dist)


def kinematic_speed_limit(radius: float, mu: float = 1.0, g: float = 9.81) -> float:
    """Highest speed for which the kinematic single-track model stays valid
    in a curve of the given radius: sqrt(0.5 mu g R)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    return math.sqrt(0.5 * mu * g * radius)
