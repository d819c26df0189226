"""Projection of a guidance algorithm to a bounded radius around the request.

The wrapper shadows a simulator with servers that are guaranteed to
stay within a fixed radius of the current request: inside the inner
circle the shadow copies the simulated server; outside it keeps its
last position, except at phase ends, where it is pulled onto the inner
boundary.  A phase ends once the request has drifted an inner radius
away from the phase anchor.
"""
from __future__ import annotations

from typing import Optional

from kmobile.core import Config, Point, ProblemParams, distance
from kmobile.kserver import GuidanceSimulator, SimStep


def inner_radius(params: ProblemParams, weighted: bool) -> float:
    """Tracking radius: 4k*mc unweighted, 16kD*mc weighted."""
    if weighted:
        return 16.0 * params.k * params.D * params.mc
    return 4.0 * params.k * params.mc


def outer_radius(params: ProblemParams, weighted: bool) -> float:
    """Containment guarantee: (8k+1)*mc unweighted, (32kD+1)*mc weighted."""
    if weighted:
        return (32.0 * params.k * params.D + 1.0) * params.mc
    return (8.0 * params.k + 1.0) * params.mc


def boundary_point(r: Point, c: Point, radius: float) -> Point:
    """Point on the circle of given radius around r closest to c (c outside)."""
    d = distance(r, c)
    f = radius / d
    return tuple(rc + f * (cc - rc) for rc, cc in zip(r, c))


class ProjectionWrapper(GuidanceSimulator):
    """Wraps a simulator; exposes the projected servers as its positions.

    Serving and movement costs of both the raw and the projected
    algorithm are accumulated, and the largest projected-server
    distance to the request is tracked for containment audits.
    """

    def __init__(self, sim: GuidanceSimulator, params: ProblemParams, weighted: bool):
        self.sim = sim
        self.params = params
        self.weighted = weighted
        self.inner = inner_radius(params, weighted)
        self.outer = outer_radius(params, weighted)
        self.anchor: Optional[Point] = None
        self.positions = tuple(sim.positions)
        self.raw_serving = 0.0
        self.raw_movement = 0.0
        self.proj_serving = 0.0
        self.proj_movement = 0.0
        self.max_request_distance = 0.0
        self.phase_ends = 0

    def _place(self, hat: list[Point], inner_pos: Config, r: Point, phase_end: bool) -> list[Point]:
        for i, c in enumerate(inner_pos):
            if distance(c, r) <= self.inner:
                hat[i] = c
            elif phase_end:
                hat[i] = boundary_point(r, c, self.inner)
        return hat

    def step(self, r: Point) -> SimStep:
        raw = self.sim.step(r)
        self.raw_serving += raw.serving
        self.raw_movement += raw.movement
        hat = list(self.positions)
        if self.anchor is None:
            # First request opens the first phase; outside servers are
            # pulled to the boundary immediately so containment holds
            # from the start.
            self.anchor = r
            hat = self._place(hat, raw.positions, r, phase_end=True)
        else:
            phase_end = distance(self.anchor, r) >= self.inner
            hat = self._place(hat, raw.positions, r, phase_end)
            if phase_end:
                self.anchor = r
                self.phase_ends += 1
        movement = sum(distance(a, b) for a, b in zip(self.positions, hat))
        self.positions = tuple(hat)
        serving = min(distance(p, r) for p in self.positions)
        self.proj_serving += serving
        self.proj_movement += movement
        self.max_request_distance = max(
            self.max_request_distance,
            max(distance(p, r) for p in self.positions))
        return SimStep(self.positions, serving, movement)

    def raw_cost(self) -> float:
        return self.raw_serving + self.params.D * self.raw_movement

    def projected_cost(self) -> float:
        return self.proj_serving + self.params.D * self.proj_movement
