"""Geometry, problem parameters, traces, matchings and cost accounting.

Points are plain tuples of floats; configurations are tuples of points.
Everything in this module is a pure function over immutable values, so
all of it is safe to share between concurrent runs.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

Point = tuple[float, ...]
Config = tuple[Point, ...]

# Default relative slack for floating-point comparisons.
REL_TOL = 1e-9


class KMobileError(Exception):
    """Base class for library errors."""


class InputError(KMobileError):
    """Malformed input: bad parameters, invalid traces, dimension mismatches."""


class ResourceBudgetError(KMobileError):
    """An operation would exceed its configured size budget."""


class ContractViolationError(KMobileError):
    """A component broke an interface guarantee it was relied upon for."""


class CheckFailure(KMobileError):
    """A verifier found a hard violation."""


def as_point(coords: Sequence[float]) -> Point:
    p = tuple(float(c) for c in coords)
    if not p:
        raise InputError("a point needs at least one coordinate")
    for c in p:
        if not math.isfinite(c):
            raise InputError(f"non-finite coordinate in point {p}")
    return p


def distance(p: Point, q: Point) -> float:
    """Euclidean distance between two points of equal dimension."""
    if len(p) != len(q):
        raise InputError(f"dimension mismatch: {len(p)} vs {len(q)}")
    return math.dist(p, q)


def move_toward(p: Point, target: Point, cap: float) -> Point:
    """Move p toward target, by at most cap.

    Returns target itself once it is within reach, so repeated moves
    terminate exactly on the target instead of oscillating around it.
    """
    if cap < 0:
        raise InputError("movement cap must be nonnegative")
    d = distance(p, target)
    if d <= cap:
        return target
    if cap == 0.0:
        return p
    f = cap / d
    return tuple(pc + f * (tc - pc) for pc, tc in zip(p, target))


@dataclass(frozen=True)
class ProblemParams:
    """The quintuple (k, m_s, m_c, delta, D) plus the space dimension.

    m_s bounds the offline per-step movement, m_c the distance between
    consecutive requests, delta the speed augmentation granted to the
    online algorithm, and D the weight of movement cost.
    """

    k: int
    ms: float
    mc: float
    delta: float
    D: float = 1.0
    dim: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise InputError("k must be a positive integer")
        if self.ms <= 0 or self.mc <= 0:
            raise InputError("ms and mc must be positive")
        if not 0.0 <= self.delta < 1.0:
            raise InputError("delta must lie in [0, 1)")
        if self.D < 1.0:
            raise InputError("D must be at least 1")
        if self.dim < 1:
            raise InputError("dim must be a positive integer")

    @property
    def online_speed(self) -> float:
        return (1.0 + self.delta) * self.ms


@dataclass
class Trace:
    """A request sequence with its start configuration.

    ``certificate``, when present, is a feasible offline trajectory:
    one configuration per request, with per-server displacement at most
    m_s per step.  Generators attach certificates of known cost.
    """

    requests: list[Point]
    start_config: Config
    certificate: Optional[list[Config]] = None

    def __len__(self) -> int:
        return len(self.requests)

    @property
    def dim(self) -> int:
        return len(self.requests[0]) if self.requests else len(self.start_config[0])


class TraceViolation(NamedTuple):
    kind: str  # "request-locality" | "certificate-speed" | "certificate-length"
    index: int
    measured: float
    bound: float


def validate_trace(trace: Trace, params: ProblemParams,
                   rel_tol: float = REL_TOL) -> Optional[TraceViolation]:
    """Check locality of requests and certificate feasibility.

    Returns None if the trace is valid, otherwise the first violation.
    Dimension mismatches raise InputError.
    """
    if not trace.requests:
        raise InputError("empty trace")
    if len(trace.start_config) != params.k:
        raise InputError(f"start config has {len(trace.start_config)} servers, expected {params.k}")
    dim = params.dim
    for p in itertools.chain(trace.requests, trace.start_config):
        if len(p) != dim:
            raise InputError(f"point {p} has dimension {len(p)}, expected {dim}")
    slack = 1.0 + rel_tol
    for t in range(1, len(trace.requests)):
        d = distance(trace.requests[t - 1], trace.requests[t])
        if d > params.mc * slack:
            return TraceViolation("request-locality", t, d, params.mc)
    cert = trace.certificate
    if cert is not None:
        if len(cert) != len(trace.requests):
            return TraceViolation("certificate-length", len(cert), float(len(cert)),
                                  float(len(trace.requests)))
        prev = trace.start_config
        for t, conf in enumerate(cert):
            if len(conf) != params.k:
                raise InputError(f"certificate step {t} has {len(conf)} servers")
            for i in range(params.k):
                d = distance(prev[i], conf[i])
                if d > params.ms * slack:
                    return TraceViolation("certificate-speed", t + 1, d, params.ms)
            prev = conf
    return None


def certificate_cost(trace: Trace, params: ProblemParams) -> float:
    """Evaluated cost of the attached offline trajectory."""
    if trace.certificate is None:
        raise InputError("trace carries no certificate")
    total = 0.0
    prev = trace.start_config
    for conf, r in zip(trace.certificate, trace.requests):
        total += params.D * sum(distance(prev[i], conf[i]) for i in range(params.k))
        total += min(distance(p, r) for p in conf)
        prev = conf
    return total


class Matching(NamedTuple):
    """perm maps index in A to its partner index in B; weight is the matched distance sum."""

    perm: tuple[int, ...]
    weight: float


def _matching_weight(cost: list[list[float]], perm: Sequence[int]) -> float:
    return sum(cost[i][j] for i, j in enumerate(perm))


def min_weight_matching(a: Sequence[Point], b: Sequence[Point]) -> Matching:
    """Minimum-weight perfect matching between two equal-size configurations.

    Among all optimal assignments the lexicographically smallest
    permutation is returned, so repeated runs are reproducible.  Small
    instances are resolved by ordered enumeration with early exit; the
    optimal value itself comes from the Hungarian method (scipy) for
    k > 2, which also serves larger k.
    """
    k = len(a)
    if len(b) != k:
        raise InputError(f"configuration sizes differ: {k} vs {len(b)}")
    if k == 0:
        return Matching((), 0.0)
    cost = [[distance(p, q) for q in b] for p in a]
    if k <= 2:
        best = min(_matching_weight(cost, perm)
                   for perm in itertools.permutations(range(k)))
    else:
        from scipy.optimize import linear_sum_assignment

        rows, cols = linear_sum_assignment(cost)
        best = sum(cost[i][j] for i, j in zip(rows, cols))
    tol = 1e-12 * (1.0 + best)
    if k <= 6:
        for perm in itertools.permutations(range(k)):
            w = _matching_weight(cost, perm)
            if w <= best + tol:
                return Matching(perm, w)
        raise AssertionError("unreachable: optimum not met by any permutation")
    # Large k: fix one row at a time on the remaining submatrix.
    from scipy.optimize import linear_sum_assignment

    chosen: list[int] = []
    free = list(range(k))
    fixed_cost = 0.0
    for i in range(k):
        for j in sorted(free):
            rest_rows = list(range(i + 1, k))
            rest_cols = [c for c in free if c != j]
            rest = 0.0
            if rest_rows:
                sub = [[cost[r][c] for c in rest_cols] for r in rest_rows]
                rr, cc = linear_sum_assignment(sub)
                rest = sum(sub[x][y] for x, y in zip(rr, cc))
            if fixed_cost + cost[i][j] + rest <= best + tol:
                chosen.append(j)
                free.remove(j)
                fixed_cost += cost[i][j]
                break
        else:
            raise AssertionError("unreachable: no extendable column")
    return Matching(tuple(chosen), _matching_weight(cost, chosen))


@dataclass
class CostLedger:
    """Per-step serving and movement records with D-weighted totals."""

    D: float = 1.0
    serving: list[float] = field(default_factory=list)
    movement: list[float] = field(default_factory=list)

    def add(self, serving: float, movement: float) -> None:
        if serving < 0 or movement < 0:
            raise InputError("costs must be nonnegative")
        self.serving.append(serving)
        self.movement.append(movement)

    @property
    def serving_total(self) -> float:
        return sum(self.serving)

    @property
    def movement_total(self) -> float:
        return sum(self.movement)

    @property
    def grand_total(self) -> float:
        return self.serving_total + self.D * self.movement_total

    def step_cost(self, t: int) -> float:
        return self.serving[t] + self.D * self.movement[t]

    def __len__(self) -> int:
        return len(self.serving)


# ---------------------------------------------------------------------------
# Trace files: one JSON object per line.  The header carries the problem
# parameters; request lines are {"t": ..., "r": [...]}; optional
# certificate lines are {"t": ..., "o": [[...], ...]}.
# ---------------------------------------------------------------------------

def write_trace(path: str, trace: Trace, params: ProblemParams) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "dim": params.dim,
            "k": params.k,
            "ms": params.ms,
            "mc": params.mc,
            "delta": params.delta,
            "D": params.D,
            "start": [list(p) for p in trace.start_config],
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for t, r in enumerate(trace.requests, start=1):
            fh.write(json.dumps({"t": t, "r": list(r)}) + "\n")
        if trace.certificate is not None:
            for t, conf in enumerate(trace.certificate, start=1):
                fh.write(json.dumps({"t": t, "o": [list(p) for p in conf]}) + "\n")


def read_trace(path: str) -> tuple[Trace, ProblemParams]:
    header = None
    requests: dict[int, Point] = {}
    cert: dict[int, Config] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "start" in obj:
                header = obj
            elif "r" in obj:
                requests[int(obj["t"])] = as_point(obj["r"])
            elif "o" in obj:
                cert[int(obj["t"])] = tuple(as_point(p) for p in obj["o"])
            else:
                raise InputError(f"{path}:{lineno}: unrecognized record {sorted(obj)}")
    if header is None:
        raise InputError(f"{path}: missing header line")
    try:
        params = ProblemParams(k=int(header["k"]), ms=float(header["ms"]),
                               mc=float(header["mc"]), delta=float(header["delta"]),
                               D=float(header["D"]), dim=int(header["dim"]))
        start = tuple(as_point(p) for p in header["start"])
    except KeyError as exc:
        raise InputError(f"{path}: header missing field {exc}") from exc
    if not requests:
        raise InputError(f"{path}: no request lines")
    n = max(requests)
    if sorted(requests) != list(range(1, n + 1)):
        raise InputError(f"{path}: request steps are not contiguous 1..{n}")
    req_list = [requests[t] for t in range(1, n + 1)]
    certificate = None
    if cert:
        if sorted(cert) != list(range(1, n + 1)):
            raise InputError(f"{path}: certificate steps are not contiguous 1..{n}")
        certificate = [cert[t] for t in range(1, n + 1)]
    trace = Trace(requests=req_list, start_config=start, certificate=certificate)
    for p in itertools.chain(req_list, start):
        if len(p) != params.dim:
            raise InputError(f"{path}: point dimension {len(p)} != header dim {params.dim}")
    return trace, params
