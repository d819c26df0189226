"""Ground-truth machinery: discretized offline optimum and the offline helper.

The DP oracle computes the exact optimum over grid-restricted server
trajectories on the line.  The offline helper is an analysis-only
virtual server that tracks the optimum's serving server smoothly under
speed and containment guarantees; it is computed from a full offline
trajectory plus the online run it is compared against.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from kmobile.core import (
    Config,
    InputError,
    Point,
    ProblemParams,
    ResourceBudgetError,
    Trace,
    distance,
    move_toward,
)

DP_MAX_POINTS = 41
DP_MAX_STEPS = 30
DP_MAX_K = 2


def _dp_budget_cells() -> Optional[int]:
    env = os.environ.get("KMOB_BUDGET")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise InputError(f"KMOB_BUDGET must be an integer, got {env!r}") from exc
    return None


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on [lo, hi] with n points (dimension 1)."""

    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if self.n < 1 or self.hi < self.lo:
            raise InputError("grid needs hi >= lo and at least one point")

    @property
    def h(self) -> float:
        return (self.hi - self.lo) / (self.n - 1) if self.n > 1 else 0.0

    def positions(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    @classmethod
    def from_resolution(cls, trace: Trace, h: float) -> "GridSpec":
        coords = [p[0] for p in trace.requests] + [p[0] for p in trace.start_config]
        lo, hi = min(coords), max(coords)
        if hi == lo:
            return cls(lo, hi, 1)
        n = math.ceil((hi - lo) / h - 1e-12) + 1
        return cls(lo, lo + (n - 1) * h, n)

    def snap(self, x: float) -> float:
        if self.n == 1:
            return self.lo
        i = round((x - self.lo) / self.h)
        i = min(max(i, 0), self.n - 1)
        return self.lo + i * self.h


def snap_trace(trace: Trace, grid: GridSpec) -> Trace:
    """Trace with all requests and start positions moved to grid points."""
    return Trace(
        requests=[(grid.snap(r[0]),) for r in trace.requests],
        start_config=tuple((grid.snap(p[0]),) for p in trace.start_config),
        certificate=None)


def dp_optimum(trace: Trace, params: ProblemParams,
               grid: GridSpec) -> tuple[float, list[Config]]:
    """Exact optimum over grid-restricted trajectories on the line.

    Movement is billed D per unit distance, serving at the nearest
    server's distance, and per-server moves are capped at ms.  Returns
    the optimal cost and an optimal trajectory (one configuration per
    request), which is a valid offline certificate.
    """
    if params.dim != 1:
        raise InputError("the DP oracle is restricted to dimension 1")
    if params.k > DP_MAX_K:
        raise ResourceBudgetError(f"DP oracle supports k <= {DP_MAX_K}, got {params.k}")
    if len(trace.requests) > DP_MAX_STEPS:
        raise ResourceBudgetError(
            f"DP oracle supports up to {DP_MAX_STEPS} steps, got {len(trace.requests)}")
    if grid.n > DP_MAX_POINTS:
        raise ResourceBudgetError(
            f"DP oracle supports up to {DP_MAX_POINTS} grid points, got {grid.n}")
    cells = (grid.n ** params.k) ** 2
    budget = _dp_budget_cells()
    if budget is not None and cells > budget:
        raise ResourceBudgetError(f"DP transition table needs {cells} cells (budget {budget})")

    pos = grid.positions()
    n = grid.n
    k = params.k
    cap = params.ms * (1.0 + 1e-9)
    step = np.abs(pos[:, None] - pos[None, :])
    step_cost = np.where(step <= cap, step, np.inf)

    if k == 1:
        move = params.D * step_cost
        state_pos = pos[:, None]
    else:
        m2 = step_cost[:, None, :, None] + step_cost[None, :, None, :]
        move = (params.D * m2).reshape(n * n, n * n)
        ii, jj = np.meshgrid(pos, pos, indexing="ij")
        state_pos = np.stack([ii.ravel(), jj.ravel()], axis=1)

    requests = np.array([r[0] for r in trace.requests])
    serve = np.min(np.abs(state_pos[:, :, None] - requests[None, None, :]), axis=1)

    start = np.array([p[0] for p in trace.start_config])
    init = np.abs(state_pos - start[None, :])
    init = np.where(init <= cap, init, np.inf).sum(axis=1) * params.D
    dp = init + serve[:, 0]
    if not np.isfinite(dp).any():
        raise InputError("start configuration cannot reach the grid within ms")
    parents = []
    for t in range(1, len(trace.requests)):
        tmp = dp[:, None] + move
        parents.append(np.argmin(tmp, axis=0))
        dp = np.min(tmp, axis=0) + serve[:, t]
    best = int(np.argmin(dp))
    cost = float(dp[best])
    states = [best]
    for parent in reversed(parents):
        states.append(int(parent[states[-1]]))
    states.reverse()
    trajectory = [tuple((float(c),) for c in state_pos[s]) for s in states]
    return cost, trajectory


# ---------------------------------------------------------------------------
# Offline helper
# ---------------------------------------------------------------------------

# Scale knob sigma multiplies these constants so the guarded regimes
# become reachable at desk scale; sigma=1 is the faithful setting.
INNER_DIVISOR = 48960.0
SPEED_FACTOR = 1020.0
ENGAGE_FACTOR = 51483.0
PHI_FACTOR = 107548.0
OUTER_DIVISOR = 48.0        # not scaled: outer/inner stays the chase speed ratio
HOLD_CIRCLE_DIVISOR = 145.0  # not scaled: must stay between inner and outer


def helper_speed_cap(params: ProblemParams, sigma: float = 1.0) -> float:
    _require_delta(params)
    return (2.0 + SPEED_FACTOR * sigma * params.k / params.delta) * params.mc


def engage_threshold(params: ProblemParams, sigma: float = 1.0) -> float:
    _require_delta(params)
    return ENGAGE_FACTOR * sigma * params.k * params.mc / params.delta ** 2


def follow_speed(params: ProblemParams) -> float:
    return (1.0 + params.delta / 8.0) * params.ms


def _require_delta(params: ProblemParams) -> None:
    if params.delta <= 0.0:
        raise InputError("the offline helper needs delta > 0")


@dataclass
class StepGeometry:
    """Per-step quantities around the optimum's serving server."""

    o_star: int         # index of the offline server nearest the request
    o_star_pos: Point
    d_oa: float         # distance from it to the nearest online server
    inner: float
    outer: float
    in_inner: bool


def step_geometry(offline_conf: Config, online_conf: Config, r: Point,
                  params: ProblemParams, sigma: float) -> StepGeometry:
    _require_delta(params)
    dists = [distance(p, r) for p in offline_conf]
    i = dists.index(min(dists))
    o_pos = offline_conf[i]
    d_oa = min(distance(o_pos, a) for a in online_conf)
    inner = params.delta ** 2 / (INNER_DIVISOR * sigma * params.k) * d_oa
    outer = params.delta / OUTER_DIVISOR * d_oa
    return StepGeometry(o_star=i, o_star_pos=o_pos, d_oa=d_oa, inner=inner,
                        outer=outer, in_inner=dists[i] <= inner)


def trajectory_geometry(offline: Sequence[Config], online: Sequence[Config],
                        requests: Sequence[Point], params: ProblemParams,
                        sigma: float) -> list[StepGeometry]:
    if not len(offline) == len(online) == len(requests):
        raise InputError("offline, online and request sequences must share a length")
    return [step_geometry(o, a, r, params, sigma)
            for o, a, r in zip(offline, online, requests)]


def classify_transition(offline: Sequence[Config], online: Sequence[Config],
                        requests: Sequence[Point], params: ProblemParams,
                        t1: int, t2: int, sigma: float = 1.0) -> str:
    """Long or short transition between two in-inner steps (1-based)."""
    n = len(requests)
    if not 1 <= t1 < t2 <= n:
        raise InputError(f"need 1 <= t1 < t2 <= {n}")
    g1 = step_geometry(offline[t1 - 1], online[t1 - 1], requests[t1 - 1], params, sigma)
    g2 = step_geometry(offline[t2 - 1], online[t2 - 1], requests[t2 - 1], params, sigma)
    if not (g1.in_inner and g2.in_inner):
        raise InputError("transition endpoints must have the request inside the inner circle")
    return "long" if (t2 - t1) > g1.inner / params.mc + 2.0 else "short"


@dataclass
class HelperTrajectory:
    start: Point
    positions: list[Point]      # one per step
    modes: list[str]            # behavior tag per step
    geometry: list[StepGeometry]
    diagnostics: list[str] = field(default_factory=list)


class _Plan:
    kind = "?"
    last = 0

    def covers(self, t: int) -> bool:
        return t <= self.last

    def action(self, t: int, o_hat: Point) -> tuple[Optional[Point], float, str]:
        raise NotImplementedError

    def end_anchor(self) -> Optional[int]:
        return None


class _ChasePlan(_Plan):
    """Chase the request at the helper speed cap, landing one step early."""

    kind = "chase"

    def __init__(self, ctx: "_HelperContext", s0: int, target_anchor: Optional[int]):
        self.ctx = ctx
        self.anchor = target_anchor
        self.last = target_anchor if target_anchor is not None else ctx.n

    def action(self, t, o_hat):
        ctx = self.ctx
        if self.anchor is not None:
            if t == self.anchor:
                return None, 0.0, self.kind
            if t == self.anchor - 1:
                return ctx.requests[self.anchor - 1], ctx.speed_cap, self.kind
        return ctx.requests[t - 1], ctx.speed_cap, self.kind

    def end_anchor(self):
        return self.anchor


class _Step3Plan(_ChasePlan):
    """Low-separation regime: chase the request until separation recovers."""

    kind = "step3"

    def __init__(self, ctx: "_HelperContext", s0: int):
        release = None
        thresh = 2.0 * ctx.engage
        for t in range(s0, ctx.n + 1):
            if ctx.geo[t - 1].d_oa >= thresh:
                release = t
                break
        super().__init__(ctx, s0, release)

    def end_anchor(self):
        if self.anchor is not None and self.ctx.geo[self.anchor - 1].in_inner:
            return self.anchor
        return None


class _SequencePlan(_Plan):
    """Behavior over one sequence of short transitions and its terminator."""

    def __init__(self, ctx: "_HelperContext", anchor: int, exec_from: int, o_hat: Point):
        self.ctx = ctx
        self.anchor = anchor
        term = ctx.find_termination(anchor)
        self.term = term
        if term is None:
            self.kind = "follow"
            self.last = ctx.n
        elif term[0] == "long":
            self.kind = "follow-long"
            self.last = term[3]
        else:
            self.kind = "circle"
            _, self.o_ell, self.t2, self.t3 = term
            self.last = self.t3
            self.target_point = ctx.offline[self.t3 - 1][ctx.geo[self.t3 - 1].o_star]
            self.direct = self._direct_feasible(exec_from, o_hat)
        if term is not None and term[0] == "long":
            _, self.o_ell, self.t2, self.t3 = term

    def _direct_feasible(self, s0: int, o_hat: Point) -> bool:
        ctx = self.ctx
        tmp = o_hat
        for t in range(s0, self.t3 + 1):
            tmp = move_toward(tmp, self.target_point, ctx.follow)
            g = ctx.geo[t - 1]
            if distance(tmp, g.o_star_pos) > g.outer * (1.0 + 1e-9):
                return False
        return True

    def action(self, t, o_hat):
        ctx = self.ctx
        if self.term is None:
            g = ctx.geo[t - 1]
            return ctx.offline[t - 1][g.o_star], ctx.follow, "follow"
        if self.term[0] == "long":
            if t <= self.t2:
                return ctx.offline[t - 1][self.o_ell], ctx.follow, "follow-long"
            if t == self.t3:
                return None, 0.0, "long-land"
            if t == self.t3 - 1:
                return ctx.requests[self.t3 - 1], ctx.speed_cap, "long-skip"
            return ctx.requests[t - 1], ctx.speed_cap, "long-chase"
        # Short-transition terminator.
        if self.direct:
            return self.target_point, ctx.follow, "circle-direct"
        center = ctx.offline[t - 1][self.o_ell]
        radius = 2.0 * ctx.params.delta / HOLD_CIRCLE_DIVISOR * ctx.d_to_online(t, self.o_ell)
        if distance(center, self.target_point) <= radius:
            return self.target_point, ctx.follow, "circle-inside"
        f = radius / distance(center, self.target_point)
        p = tuple(c + f * (tp - c) for c, tp in zip(center, self.target_point))
        return p, ctx.follow, "circle-hold"

    def end_anchor(self):
        if self.term is None:
            return None
        return self.term[3]


class _HelperContext:
    def __init__(self, offline, online, requests, params, sigma):
        self.offline = offline
        self.online = online
        self.requests = requests
        self.params = params
        self.sigma = sigma
        self.n = len(requests)
        self.geo = trajectory_geometry(offline, online, requests, params, sigma)
        self.speed_cap = helper_speed_cap(params, sigma)
        self.follow = follow_speed(params)
        self.engage = engage_threshold(params, sigma)
        self.anchors = [t for t in range(1, self.n + 1) if self.geo[t - 1].in_inner]

    def d_to_online(self, t: int, server: int) -> float:
        pos = self.offline[t - 1][server]
        return min(distance(pos, a) for a in self.online[t - 1])

    def next_anchor(self, t: int) -> Optional[int]:
        for a in self.anchors:
            if a >= t:
                return a
        return None

    def find_termination(self, anchor: int):
        """First terminating event of the sequence starting at an anchor.

        Returns ("long"|"short", passing server, t2, t3) or None.  A
        short transition terminates the sequence only if its receiving
        server was at distance more than a third of the outer radius
        from the serving server at some earlier step of the sequence.
        """
        idx = self.anchors.index(anchor)
        seen_far: set[int] = set()
        updated_to = anchor - 1

        def update_far(until: int):
            nonlocal updated_to
            for s in range(updated_to + 1, until + 1):
                g = self.geo[s - 1]
                for j, p in enumerate(self.offline[s - 1]):
                    if distance(p, g.o_star_pos) > g.outer / 3.0:
                        seen_far.add(j)
            updated_to = until

        prev = anchor
        for nxt in self.anchors[idx + 1:]:
            update_far(prev)
            g1 = self.geo[prev - 1]
            if (nxt - prev) > g1.inner / self.params.mc + 2.0:
                return ("long", g1.o_star, prev, nxt)
            if self.geo[nxt - 1].o_star in seen_far:
                return ("short", g1.o_star, prev, nxt)
            prev = nxt
        return None


def compute_helper(offline: Sequence[Config], online: Sequence[Config],
                   requests: Sequence[Point], params: ProblemParams,
                   sigma: float = 1.0,
                   offline_start: Optional[Config] = None) -> HelperTrajectory:
    """Offline helper trajectory for a full run.

    ``offline``/``online`` hold the end-of-step configurations; the
    helper starts on the offline server nearest the first request.
    """
    ctx = _HelperContext(list(offline), list(online), list(requests), params, sigma)
    start_conf = offline_start if offline_start is not None else offline[0]
    d0 = [distance(p, requests[0]) for p in start_conf]
    o_hat: Point = start_conf[d0.index(min(d0))]
    start = o_hat
    positions: list[Point] = []
    modes: list[str] = []
    diagnostics: list[str] = []
    plan: Optional[_Plan] = None
    pending_anchor: Optional[int] = None

    for t in range(1, ctx.n + 1):
        engaged_now = ctx.geo[t - 1].d_oa < ctx.engage
        if plan is not None and plan.kind != "step3" and engaged_now:
            plan = None  # preempted by the low-separation regime
        if plan is None or not plan.covers(t):
            if plan is not None:
                pending_anchor = plan.end_anchor()
            if engaged_now:
                plan = _Step3Plan(ctx, t)
            elif pending_anchor is not None:
                plan = _SequencePlan(ctx, pending_anchor, t, o_hat)
            elif ctx.geo[t - 1].in_inner:
                plan = _SequencePlan(ctx, t, t, o_hat)
            else:
                plan = _ChasePlan(ctx, t, ctx.next_anchor(t))
            pending_anchor = None
        target, cap, tag = plan.action(t, o_hat)
        if target is not None:
            moved = move_toward(o_hat, target, cap)
            if tag in ("long-skip", "chase", "step3") and t == plan.last - 1 \
                    and distance(moved, target) > 1e-9 * max(1.0, params.mc):
                diagnostics.append(f"t={t}: landing target missed by "
                                   f"{distance(moved, target):.6g}")
            o_hat = moved
        positions.append(o_hat)
        modes.append(tag)
        if plan.covers(t) and plan.last == t:
            pending_anchor = plan.end_anchor()
            plan = None

    return HelperTrajectory(start=start, positions=positions, modes=modes,
                            geometry=ctx.geo, diagnostics=diagnostics)


@dataclass
class HelperAudit:
    steps: int
    guard_fired: int
    guard_vacuous: int
    speed_violations: int
    guard_speed_violations: int
    containment_violations: int
    distance_bound_violations: int
    max_speed: float
    speed_cap: float

    def ok(self) -> bool:
        return (self.speed_violations == 0 and self.guard_speed_violations == 0
                and self.containment_violations == 0)


def audit_helper(helper: HelperTrajectory, online: Sequence[Config],
                 requests: Sequence[Point], params: ProblemParams,
                 sigma: float = 1.0) -> HelperAudit:
    """Audit the helper's speed cap and guarded containment guarantees."""
    cap = helper_speed_cap(params, sigma)
    follow = follow_speed(params)
    engage2 = 2.0 * engage_threshold(params, sigma)
    tol = 1e-9
    fired = vacuous = 0
    speed_v = guard_speed_v = contain_v = dist_v = 0
    max_speed = 0.0
    prev = helper.start
    for t, (pos, geo) in enumerate(zip(helper.positions, helper.geometry), start=1):
        moved = distance(prev, pos)
        max_speed = max(max_speed, moved)
        if moved > cap * (1.0 + tol) + tol:
            speed_v += 1
        guard = geo.in_inner and geo.d_oa >= engage2
        if guard:
            fired += 1
            if moved > follow * (1.0 + tol) + tol:
                guard_speed_v += 1
            if distance(pos, geo.o_star_pos) > geo.outer * (1.0 + tol) + tol:
                contain_v += 1
        else:
            vacuous += 1
        conf = online[t - 1]
        a_hat = min(conf, key=lambda a: distance(a, pos))
        a_star = min(conf, key=lambda a: distance(a, requests[t - 1]))
        bound = 2.0 * geo.d_oa + distance(a_star, requests[t - 1])
        if distance(a_hat, pos) > bound * (1.0 + tol) + tol:
            dist_v += 1
        prev = pos
    return HelperAudit(steps=len(helper.positions), guard_fired=fired,
                       guard_vacuous=vacuous, speed_violations=speed_v,
                       guard_speed_violations=guard_speed_v,
                       containment_violations=contain_v,
                       distance_bound_violations=dist_v,
                       max_speed=max_speed, speed_cap=cap)
