"""Adversarial instance generators with paired offline certificates.

Each construction emits a locality-valid trace together with a feasible
offline trajectory of known cost, so measured online costs can be
turned into competitive-ratio estimates.  Randomized choices are either
seeded or enumerated explicitly.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Optional, Sequence

from kmobile.core import (
    Config,
    InputError,
    Point,
    ProblemParams,
    Trace,
    distance,
    move_toward,
)

CONSTRUCTIONS = ("thm3", "thm4", "simple-cx", "walk")

# Number of enumerable target choices in the two-server jump/walk
# constructions (symmetric quarter points on either side of the start).
TWO_SERVER_CHOICES = 4


@dataclass
class GeneratedInstance:
    construction: str
    trace: Trace
    params: ProblemParams
    offline_cost_bound: Optional[float]
    online_cost_lower_bound: Optional[float] = None
    choices: dict = field(default_factory=dict)


def _two_server_targets(x: int, ms: float) -> list[float]:
    return [-0.75 * x * ms, -0.25 * x * ms, 0.25 * x * ms, 0.75 * x * ms]


def _follow_certificate(start: Config, targets: Sequence[Point], ms: float,
                        n: int) -> list[Config]:
    """All offline servers head to their targets simultaneously at speed ms."""
    confs = []
    cur = list(start)
    for _ in range(n):
        cur = [move_toward(p, tgt, ms) for p, tgt in zip(cur, targets)]
        confs.append(tuple(cur))
    return confs


def _max_jump(requests: Sequence[Point]) -> float:
    return max((distance(requests[t - 1], requests[t])
                for t in range(1, len(requests))), default=0.0)


def _pick_target(k: int, x: int, ms: float, rng: Optional[random.Random],
                 z_choice: Optional[int]):
    """Z points for the jump constructions; returns (list of Z, choice record)."""
    if k == 2:
        values = _two_server_targets(x, ms)
        if z_choice is not None:
            if not 0 <= z_choice < TWO_SERVER_CHOICES:
                raise InputError(f"z_choice must be in 0..{TWO_SERVER_CHOICES - 1}")
            idx = z_choice
        else:
            idx = (rng or random.Random(0)).randrange(TWO_SERVER_CHOICES)
        return [values[idx]], {"z_index": idx}
    if z_choice is not None:
        raise InputError("z_choice enumeration is only defined for k=2")
    return None, None


def gen_thm3(k: int, x: int, D: float = 1.0, ms: float = 1.0, *,
             seed: Optional[int] = None, z_choice: Optional[int] = None,
             delta: float = 0.5) -> GeneratedInstance:
    """Two-phase jump construction on the line.

    A long block of requests at the origin is followed by a block at a
    point Z chosen among far-apart candidates unknown to the online
    algorithm; the offline solution walks one server to Z during the
    first block.  For k > 2 the line is split into 4(k-1) segments
    grouped in fours and one inner segment per group receives a Z.
    The first block is long enough for every offline server to arrive
    before its Z is requested.
    """
    if k < 2:
        raise InputError("construction needs k >= 2")
    if x <= 0 or x % 8 != 0:
        raise InputError("x must be a positive multiple of 8")
    rng = random.Random(seed if seed is not None else 0)
    origin = (0.0,)
    start = tuple(origin for _ in range(k))

    if k == 2:
        zs, choice = _pick_target(k, x, ms, rng, z_choice)
        z = zs[0]
        phase1 = x
        requests = [origin] * phase1 + [(z,)] * (x // 8)
        cert = _follow_certificate(start, [origin, (z,)], ms, len(requests))
        bound = D * x * ms
        lower = x * x * ms / 264.0
        choices = dict(choice, Z=[z], phase1_len=phase1, phase2_start=phase1 + 1)
    else:
        if z_choice is not None:
            raise InputError("z_choice enumeration is only defined for k=2")
        seg = x * ms
        zs = []
        for g in range(k - 1):
            inner = 4 * g + 1 + rng.randrange(2)  # segment index 4g+1 or 4g+2
            zs.append((inner + 0.5) * seg)
        block = x // 4
        phase1 = max(k * x,
                     max(math.ceil(abs(z) / ms) - g * block for g, z in enumerate(zs)))
        requests = [origin] * phase1
        for z in zs:
            requests.extend([(z,)] * block)
        targets = [origin] + [(z,) for z in zs]
        cert = _follow_certificate(start, targets, ms, len(requests))
        bound = D * sum(abs(z) for z in zs)
        lower = None
        choices = {"Z": zs, "phase1_len": phase1, "phase2_start": phase1 + 1}

    mc = max(_max_jump(requests), ms)
    params = ProblemParams(k=k, ms=ms, mc=mc, delta=delta, D=D, dim=1)
    trace = Trace(requests=requests, start_config=start, certificate=cert)
    return GeneratedInstance("thm3", trace, params, bound, lower, choices)


def gen_thm4(k: int, x: int, ms: float, mc: float, D: float = 1.0, *,
             seed: Optional[int] = None, z_choice: Optional[int] = None,
             delta: float = 0.5) -> GeneratedInstance:
    """Locality-respecting variant of the jump construction.

    Instead of jumping, the request walks toward each hidden target Z
    in steps of mc, so the trace is valid for the instance's own
    locality bound.  For k > 2 the line is split into 5(k-1) segments
    grouped in fives; the chosen inner segments neighbor an outer one.
    """
    if k < 2:
        raise InputError("construction needs k >= 2")
    if x <= 0 or x % 8 != 0:
        raise InputError("x must be a positive multiple of 8")
    if mc < ms:
        raise InputError("needs mc >= ms")
    rng = random.Random(seed if seed is not None else 0)
    origin = (0.0,)
    start = tuple(origin for _ in range(k))

    def walk(frm: float, to: float) -> list[Point]:
        out = []
        pos = frm
        while pos != to:
            pos = move_toward((pos,), (to,), mc)[0]
            out.append((pos,))
        return out

    if k == 2:
        zs, choice = _pick_target(k, x, ms, rng, z_choice)
        z = zs[0]
        phase1 = x
        walk_steps = walk(0.0, z)
        requests = [origin] * phase1 + walk_steps + [(z,)] * (x // 8)
        cert = _follow_certificate(start, [origin, (z,)], ms, len(requests))
        bound = D * x * ms + x * x * ms * ms / (2.0 * mc)
        choices = dict(choice, Z=[z], phase1_len=phase1,
                       walk_start=phase1 + 1,
                       final_start=phase1 + len(walk_steps) + 1)
    else:
        if z_choice is not None:
            raise InputError("z_choice enumeration is only defined for k=2")
        seg = x * ms
        zs = []
        for g in range(k - 1):
            inner = 5 * g + 1 + 2 * rng.randrange(2)  # segment index 5g+1 or 5g+3
            zs.append((inner + 0.5) * seg)
        block = x // 4
        # Arrival times of the walking request at each Z, counted from
        # the end of the first phase.
        offsets = []
        elapsed = 0
        prev = 0.0
        for z in zs:
            elapsed += math.ceil(abs(z - prev) / mc)
            offsets.append(elapsed)
            elapsed += block
            prev = z
        phase1 = max(k * x,
                     max(math.ceil(abs(z) / ms) - off
                         for z, off in zip(zs, offsets)))
        requests = [origin] * phase1
        prev = 0.0
        for z in zs:
            requests.extend(walk(prev, z))
            requests.extend([(z,)] * block)
            prev = z
        targets = [origin] + [(z,) for z in zs]
        cert = _follow_certificate(start, targets, ms, len(requests))
        bound = None  # evaluated below: exact cost of the certificate
        choices = {"Z": zs, "phase1_len": phase1, "phase2_start": phase1 + 1}

    params = ProblemParams(k=k, ms=ms, mc=mc, delta=delta, D=D, dim=1)
    trace = Trace(requests=requests, start_config=start, certificate=cert)
    if bound is None:
        from kmobile.core import certificate_cost

        bound = certificate_cost(trace, params)
    return GeneratedInstance("thm4", trace, params, bound, None, choices)


def gen_simple_counterexample(x: int, y: int, ms: float = 1.0) -> GeneratedInstance:
    """Out-and-back request walk that defeats matching-only algorithms.

    The request moves right x steps, back left y steps, then stays for
    the remaining x-2y steps.  A single offline server following the
    request pays (x+y)*ms; a matching-only online algorithm paired with
    a guidance that switches serving servers at the turning point pays
    at least x*ms + (x-3y)*y*ms.
    """
    if x <= 0 or y <= 0 or y >= x / 4.0:
        raise InputError("needs 0 < y < x/4")
    requests: list[Point] = []
    for t in range(1, x + 1):
        requests.append((t * ms,))
    for j in range(1, y + 1):
        requests.append(((x - j) * ms,))
    requests.extend([((x - y) * ms,)] * (x - 2 * y))
    start = ((0.0,), (0.0,))
    cert = [((0.0,), r) for r in requests]
    params = ProblemParams(k=2, ms=ms, mc=ms, delta=0.0, D=1.0, dim=1)
    trace = Trace(requests=requests, start_config=start, certificate=cert)
    return GeneratedInstance(
        "simple-cx", trace, params,
        offline_cost_bound=(x + y) * ms,
        online_cost_lower_bound=x * ms + (x - 3 * y) * y * ms,
        choices={"x": x, "y": y})


def _unit_direction(rng: random.Random, dim: int) -> list[float]:
    while True:
        v = [rng.gauss(0.0, 1.0) for _ in range(dim)]
        norm = math.sqrt(sum(c * c for c in v))
        if norm > 1e-12:
            return [c / norm for c in v]


def local_walk_requests(n: int, dim: int, mc: float, step_scale: float,
                        seed: int) -> list[Point]:
    """Random walk with per-step displacement uniform in [0, step_scale*mc]."""
    if not 0.0 <= step_scale <= 1.0:
        raise InputError("step_scale must lie in [0, 1]")
    if n < 1:
        raise InputError("n must be positive")
    rng = random.Random(seed)
    cur = [0.0] * dim
    out = [tuple(cur)]
    for _ in range(n - 1):
        direction = _unit_direction(rng, dim)
        step = rng.uniform(0.0, step_scale * mc)
        cur = [c + step * d for c, d in zip(cur, direction)]
        out.append(tuple(cur))
    return out


def gen_local_walk(n: int, params: ProblemParams, step_scale: float,
                   seed: int) -> GeneratedInstance:
    """Seeded locality-respecting workload; all servers start on the first request."""
    requests = local_walk_requests(n, params.dim, params.mc, step_scale, seed)
    start = tuple(requests[0] for _ in range(params.k))
    trace = Trace(requests=requests, start_config=start, certificate=None)
    return GeneratedInstance("walk", trace, params, offline_cost_bound=None,
                             choices={"seed": seed, "step_scale": step_scale})
