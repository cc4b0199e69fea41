"""Cubic Bezier query trajectories joining the vehicle to the reference path.

A query spans the controller horizon T (3 s): it starts at the vehicle,
leaves along the current heading at the current speed, and lands on the
reference path at the point the reference will reach in T seconds, arriving
tangent to the path at the reference speed:

    P0 = vehicle position
    P1 = P0 + (V_g T / 3) * heading unit vector
    P3 = path point at s_now + V_ref T
    P2 = P3 - (V_ref T / 3) * path tangent at P3

301 samples at uniform parameter values are rigidly mapped into the body
frame (P0 at the origin, heading along +x), which is the frame the training
trajectories live in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .track import ReferencePath, nearest_path_point

HORIZON = 3.0
N_QUERY = 301


@dataclass
class BezierQuery:
    control_points: np.ndarray   # (4, 2) in the ground frame
    samples_body: np.ndarray     # (N_QUERY, 2) in the body frame


def cubic_bezier(points: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Evaluate a cubic Bezier with control points (4, 2) at parameters u."""
    u = u[:, None]
    w = 1.0 - u
    return (w ** 3 * points[0] + 3.0 * w ** 2 * u * points[1]
            + 3.0 * w * u ** 2 * points[2] + u ** 3 * points[3])


def build_bezier_query(state: np.ndarray, path: ReferencePath,
                       horizon: float = HORIZON,
                       n_samples: int = N_QUERY) -> BezierQuery:
    """Query for a canonical 14-entry vehicle state (see dynamics)."""
    pos = state[0:2]
    psi = state[2]
    v_g = math.hypot(state[5], state[6])
    here = nearest_path_point(path, pos)

    p0 = pos
    p1 = p0 + (v_g * horizon / 3.0) * np.array([math.cos(psi), math.sin(psi)])
    s_target = here.s + path.v_ref * horizon
    p3 = path.point_at(s_target)
    h3 = path.heading_at(s_target)
    p2 = p3 - (path.v_ref * horizon / 3.0) * np.array([math.cos(h3), math.sin(h3)])

    points = np.stack([p0, p1, p2, p3])
    samples = cubic_bezier(points, np.linspace(0.0, 1.0, n_samples))
    rel = samples - p0
    cos_p, sin_p = math.cos(psi), math.sin(psi)
    body = np.column_stack([rel[:, 0] * cos_p + rel[:, 1] * sin_p,
                            -rel[:, 0] * sin_p + rel[:, 1] * cos_p])
    return BezierQuery(control_points=points, samples_body=body)
