"""Instances, grids, distributions and certificates.

An instance has ``I >= 2`` agents. Agent ``i`` has a type interval
``[t_lo[i], t_hi[i]]``, a verification cost ``c[i] > 0`` and, under the mean
ambiguity sets, mean bounds ``[mu_lo[i], mu_hi[i]]``. Agents are labelled
``1..I`` wherever a label is user-facing; arrays are indexed from zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

DEFAULT_TOL = 1e-9
SNAP = 1e-12
GRID_CAP = 10**6


class DomainError(ValueError):
    """A type profile or distribution lies outside the type space."""


class GridSizeError(ValueError):
    """A requested grid is too small or exceeds the scenario cap."""


class PreconditionError(ValueError):
    """An operation was called outside the setting it is defined for."""


class Ambiguity(str, enum.Enum):
    SUPPORT_ONLY = "support_only"
    MARKOV = "markov"
    MARKOV_INDEPENDENT = "markov_independent"

    @property
    def has_means(self) -> bool:
        return self is not Ambiguity.SUPPORT_ONLY


def _as_floats(values, name: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in values)
    except TypeError as exc:
        raise ValueError(f"{name} must be a sequence of numbers") from exc


@dataclass(frozen=True)
class Instance:
    """Primitives of one allocation problem.

    Construction only checks shapes; use :func:`validate_instance` for the
    model restrictions.
    """

    t_lo: tuple[float, ...]
    t_hi: tuple[float, ...]
    c: tuple[float, ...]
    ambiguity: Ambiguity = Ambiguity.SUPPORT_ONLY
    mu_lo: tuple[float, ...] | None = None
    mu_hi: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "t_lo", _as_floats(self.t_lo, "t_lo"))
        object.__setattr__(self, "t_hi", _as_floats(self.t_hi, "t_hi"))
        object.__setattr__(self, "c", _as_floats(self.c, "c"))
        object.__setattr__(self, "ambiguity", Ambiguity(self.ambiguity))
        n = len(self.t_lo)
        if len(self.t_hi) != n or len(self.c) != n:
            raise ValueError("t_lo, t_hi and c must have one entry per agent")
        for name in ("mu_lo", "mu_hi"):
            v = getattr(self, name)
            if v is not None:
                v = _as_floats(v, name)
                if len(v) != n:
                    raise ValueError(f"{name} must have one entry per agent")
                object.__setattr__(self, name, v)

    @property
    def num_agents(self) -> int:
        return len(self.t_lo)

    @property
    def costs(self) -> np.ndarray:
        return np.array(self.c)

    def with_ambiguity(self, ambiguity: Ambiguity | str) -> "Instance":
        return Instance(self.t_lo, self.t_hi, self.c, Ambiguity(ambiguity), self.mu_lo, self.mu_hi)

    def contains(self, t, tol: float = SNAP) -> bool:
        t = np.asarray(t, dtype=float)
        return bool(
            t.shape == (self.num_agents,)
            and np.all(t >= np.array(self.t_lo) - tol)
            and np.all(t <= np.array(self.t_hi) + tol)
        )

    def require_contains(self, t, tol: float = SNAP) -> np.ndarray:
        arr = np.asarray(t, dtype=float)
        if arr.shape != (self.num_agents,):
            raise DomainError(f"type profile must have {self.num_agents} entries, got shape {arr.shape}")
        if not self.contains(arr, tol):
            raise DomainError(f"type profile {tuple(arr.tolist())} lies outside the type space")
        return arr


@dataclass(frozen=True)
class Certificate:
    """Outcome of a check, with a witness when it fails."""

    check: str
    passed: bool
    message: str = ""
    witness: Mapping[str, Any] | None = None
    gap: float | None = None
    tolerance: float = DEFAULT_TOL
    flags: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.passed

    def to_record(self) -> dict:
        return {
            "check": self.check,
            "pass": self.passed,
            "witness": _jsonable(self.witness),
            "gap": self.gap,
            "tolerance": self.tolerance,
        }

    def summary(self) -> str:
        text = f"[{'PASS' if self.passed else 'FAIL'}] {self.check}"
        if self.message:
            text += f": {self.message}"
        if self.flags:
            text += f" (flags: {', '.join(self.flags)})"
        return text


def _jsonable(obj):
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return str(obj)


def validate_instance(inst: Instance) -> Certificate:
    """Check every model restriction; the first violation is reported."""
    problems: list[str] = []
    flags: list[str] = []
    if inst.num_agents < 2:
        problems.append(f"at least 2 agents are required, got {inst.num_agents}")
    for k in range(inst.num_agents):
        a = k + 1
        lo, hi, c = inst.t_lo[k], inst.t_hi[k], inst.c[k]
        if not all(math.isfinite(v) for v in (lo, hi, c)):
            problems.append(f"agent {a}: bounds and cost must be finite")
            continue
        if lo < 0:
            problems.append(f"agent {a}: t_lo >= 0 violated (t_lo={lo:g})")
        if not lo < hi:
            problems.append(f"agent {a}: t_lo < t_hi violated (t_lo={lo:g}, t_hi={hi:g})")
        if not c > 0:
            problems.append(f"agent {a}: c_i > 0 violated (c={c:g})")
    if inst.ambiguity.has_means:
        if inst.mu_lo is None or inst.mu_hi is None:
            problems.append(f"ambiguity '{inst.ambiguity.value}' requires mu_lo and mu_hi")
        else:
            for k in range(inst.num_agents):
                a = k + 1
                lo, hi = inst.t_lo[k], inst.t_hi[k]
                ml, mh = inst.mu_lo[k], inst.mu_hi[k]
                if not lo < ml:
                    problems.append(f"agent {a}: t_lo < mu_lo violated (t_lo={lo:g}, mu_lo={ml:g})")
                if not ml <= mh:
                    problems.append(f"agent {a}: mu_lo <= mu_hi violated (mu_lo={ml:g}, mu_hi={mh:g})")
                elif ml == mh:
                    flags.append(f"degenerate_mean_agent_{a}")
                if not mh < hi:
                    problems.append(f"agent {a}: mu_hi < t_hi violated (mu_hi={mh:g}, t_hi={hi:g})")
    if problems:
        return Certificate("validate_instance", False, problems[0], {"violations": problems}, flags=tuple(flags))
    return Certificate("validate_instance", True, "instance is valid", flags=tuple(flags))


def require_valid(inst: Instance) -> None:
    cert = validate_instance(inst)
    if not cert.passed:
        raise DomainError(cert.message)


def _dedup_sorted(values: Iterable[float], tol: float = SNAP) -> tuple[float, ...]:
    out: list[float] = []
    for v in sorted(float(x) for x in values):
        if out and v - out[-1] <= tol:
            continue
        out.append(v)
    return tuple(out)


@dataclass(frozen=True)
class Grid:
    """Finite product grid of type profiles.

    Scenarios are enumerated in C order, so scenario ``s`` and the
    lexicographic order of profiles coincide.
    """

    axes: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        axes = tuple(_dedup_sorted(ax) for ax in self.axes)
        if any(len(ax) == 0 for ax in axes):
            raise GridSizeError("every grid axis needs at least one point")
        object.__setattr__(self, "axes", axes)

    @property
    def num_agents(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(ax) for ax in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def scenarios(self) -> np.ndarray:
        mesh = np.meshgrid(*[np.array(ax) for ax in self.axes], indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def index_of(self, t, tol: float = SNAP) -> int | None:
        """Flat index of profile ``t``, or ``None`` when it is not a grid point."""
        t = np.asarray(t, dtype=float)
        if t.shape != (self.num_agents,):
            return None
        pos = []
        for v, ax in zip(t, self.axes):
            arr = np.array(ax)
            j = int(np.argmin(np.abs(arr - v)))
            if abs(arr[j] - v) > tol:
                return None
            pos.append(j)
        return int(np.ravel_multi_index(pos, self.shape))

    def contains(self, t, tol: float = SNAP) -> bool:
        return self.index_of(t, tol) is not None

    def contains_axis_values(self, agent: int, values: Iterable[float], tol: float = SNAP) -> bool:
        """Whether every value lies on the axis at 0-based position ``agent``."""
        ax = np.array(self.axes[agent])
        return all(np.abs(ax - v).min() <= tol for v in values)

    def covers_endpoints(self, inst: Instance) -> bool:
        return all(
            ax[0] == lo and ax[-1] == hi for ax, lo, hi in zip(self.axes, inst.t_lo, inst.t_hi)
        )

    def within(self, inst: Instance, tol: float = SNAP) -> bool:
        return all(
            ax[0] >= lo - tol and ax[-1] <= hi + tol for ax, lo, hi in zip(self.axes, inst.t_lo, inst.t_hi)
        )


def make_grid(
    inst: Instance,
    points_per_agent: int,
    anchors: Mapping[int, Iterable[float]] | Sequence[Iterable[float]] | None = None,
    cap: int = GRID_CAP,
) -> Grid:
    """Uniform per-agent points unioned with endpoints, mean bounds and anchors.

    ``anchors`` maps a 1-based agent label to extra values, or is a sequence
    with one iterable per agent.
    """
    if points_per_agent < 2:
        raise GridSizeError(f"points_per_agent must be at least 2, got {points_per_agent}")
    n = inst.num_agents
    extra: list[list[float]] = [[] for _ in range(n)]
    if anchors is not None:
        if isinstance(anchors, Mapping):
            for agent, vals in anchors.items():
                if not 1 <= int(agent) <= n:
                    raise ValueError(f"anchor agent {agent} out of range 1..{n}")
                extra[int(agent) - 1].extend(float(v) for v in vals)
        else:
            if len(anchors) != n:
                raise ValueError("anchors must have one entry per agent")
            for k, vals in enumerate(anchors):
                extra[k].extend(float(v) for v in vals)
    axes = []
    for k in range(n):
        lo, hi = inst.t_lo[k], inst.t_hi[k]
        pts = list(np.linspace(lo, hi, points_per_agent))
        pts[0], pts[-1] = lo, hi
        pts += extra[k]
        if inst.ambiguity.has_means and inst.mu_lo is not None and inst.mu_hi is not None:
            pts += [inst.mu_lo[k], inst.mu_hi[k]]
        for v in extra[k]:
            if v < lo - SNAP or v > hi + SNAP:
                raise DomainError(f"anchor {v:g} for agent {k + 1} lies outside [{lo:g}, {hi:g}]")
        axes.append(pts)
    size = 1
    # keep endpoints exact even when an anchor lands within SNAP of them
    deduped = [(lo,) + _dedup_sorted(ax)[1:-1] + (hi,) for ax, lo, hi in zip(axes, inst.t_lo, inst.t_hi)]
    for ax in deduped:
        size *= len(ax)
    if size > cap:
        raise GridSizeError(f"grid has {size} scenarios, above the cap of {cap}")
    return Grid(tuple(deduped))


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finitely supported distribution over type profiles."""

    support: tuple[tuple[float, ...], ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        support = tuple(tuple(float(v) for v in pt) for pt in self.support)
        weights = tuple(float(w) for w in self.weights)
        if len(support) == 0 or len(support) != len(weights):
            raise ValueError("support and weights must be non-empty and of equal length")
        dims = {len(pt) for pt in support}
        if len(dims) != 1:
            raise ValueError("all support points must have the same dimension")
        if any(w < 0 for w in weights):
            raise ValueError("weights must be non-negative")
        if abs(math.fsum(weights) - 1.0) > SNAP:
            raise ValueError(f"weights must sum to 1, got {math.fsum(weights)!r}")
        if len(set(support)) != len(support):
            raise ValueError("support points must be distinct")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @property
    def num_agents(self) -> int:
        return len(self.support[0])

    def points(self) -> np.ndarray:
        return np.array(self.support)

    def mean(self) -> np.ndarray:
        pts = self.points()
        return np.array([math.fsum(w * v for w, v in zip(self.weights, pts[:, k])) for k in range(pts.shape[1])])

    def prob(self, t, tol: float = SNAP) -> float:
        t = np.asarray(t, dtype=float)
        return math.fsum(w for pt, w in zip(self.support, self.weights) if np.all(np.abs(np.array(pt) - t) <= tol))

    def marginal(self, agent: int) -> dict[float, float]:
        """Marginal law of the agent at 0-based position ``agent``."""
        out: dict[float, float] = {}
        for pt, w in zip(self.support, self.weights):
            out[pt[agent]] = out.get(pt[agent], 0.0) + w
        return out

    def to_discrete(self) -> "DiscreteDistribution":
        return self


@dataclass(frozen=True)
class ProductTwoPointDistribution:
    """Independent marginals, each supported on ``{lo[i], hi[i]}``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    prob_hi: tuple[float, ...]

    def __post_init__(self):
        lo = _as_floats(self.lo, "lo")
        hi = _as_floats(self.hi, "hi")
        ph = _as_floats(self.prob_hi, "prob_hi")
        if not (len(lo) == len(hi) == len(ph)) or len(lo) == 0:
            raise ValueError("lo, hi and prob_hi must be non-empty and of equal length")
        for a, b, p in zip(lo, hi, ph):
            if a > b:
                raise ValueError("each marginal needs lo <= hi")
            if not 0.0 <= p <= 1.0:
                raise ValueError("prob_hi entries must lie in [0, 1]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "prob_hi", ph)

    @property
    def num_agents(self) -> int:
        return len(self.lo)

    def marginal_mean(self) -> np.ndarray:
        return np.array([a + p * (b - a) for a, b, p in zip(self.lo, self.hi, self.prob_hi)])

    def mean(self) -> np.ndarray:
        return self.marginal_mean()

    def marginal_atoms(self, agent: int) -> list[tuple[float, float]]:
        a, b, p = self.lo[agent], self.hi[agent], self.prob_hi[agent]
        if a == b:
            return [(a, 1.0)]
        return [(a, 1.0 - p), (b, p)]

    def to_discrete(self) -> DiscreteDistribution:
        """Joint law on the product of the marginal supports (lexicographic order)."""
        pts: list[tuple[float, ...]] = [()]
        ws: list[float] = [1.0]
        for k in range(self.num_agents):
            new_pts, new_ws = [], []
            for pt, w in zip(pts, ws):
                for v, pv in self.marginal_atoms(k):
                    new_pts.append(pt + (v,))
                    new_ws.append(w * pv)
            pts, ws = new_pts, new_ws
        return DiscreteDistribution(tuple(pts), tuple(ws))

    def prob(self, t) -> float:
        return self.to_discrete().prob(t)

    def other_point(self, t) -> tuple[float, ...]:
        """For each agent, the support value that differs from ``t[i]`` (or ``t[i]`` for a Dirac)."""
        out = []
        for k, v in enumerate(t):
            a, b = self.lo[k], self.hi[k]
            if a == b:
                out.append(a)
            elif abs(v - a) <= SNAP:
                out.append(b)
            else:
                out.append(a)
        return tuple(out)


Distribution = DiscreteDistribution | ProductTwoPointDistribution


def dirac(t) -> DiscreteDistribution:
    return DiscreteDistribution((tuple(float(v) for v in t),), (1.0,))


def expected_payoff(
    payoff_fn: Callable[[np.ndarray], float],
    dist: Distribution,
    inst: Instance | None = None,
) -> float:
    """Exact weighted sum of the payoff over the support."""
    d = dist.to_discrete()
    total = []
    for pt, w in zip(d.support, d.weights):
        t = np.array(pt)
        if inst is not None:
            inst.require_contains(t)
        total.append(w * float(payoff_fn(t)))
    return math.fsum(total)


def check_membership(
    dist: Distribution,
    inst: Instance,
    ambiguity: Ambiguity | str | None = None,
    tol: float = DEFAULT_TOL,
) -> Certificate:
    """Whether ``dist`` lies in the instance's ambiguity set."""
    amb = Ambiguity(ambiguity) if ambiguity is not None else inst.ambiguity
    d = dist.to_discrete()
    if d.num_agents != inst.num_agents:
        return Certificate("membership", False, "distribution dimension does not match the instance", tolerance=tol)
    for pt in d.support:
        if not inst.contains(pt, tol):
            return Certificate(
                "membership", False, f"support point {pt} lies outside the type space", {"point": pt}, tolerance=tol
            )
    if amb.has_means:
        mean = d.mean()
        for k in range(inst.num_agents):
            if mean[k] < inst.mu_lo[k] - tol:
                return Certificate(
                    "membership", False, f"agent {k + 1}: mean {mean[k]:.12g} below mu_lo={inst.mu_lo[k]:g}",
                    {"agent": k + 1, "mean": mean[k], "bound": "mu_lo"}, inst.mu_lo[k] - mean[k], tol,
                )
            if mean[k] > inst.mu_hi[k] + tol:
                return Certificate(
                    "membership", False, f"agent {k + 1}: mean {mean[k]:.12g} above mu_hi={inst.mu_hi[k]:g}",
                    {"agent": k + 1, "mean": mean[k], "bound": "mu_hi"}, mean[k] - inst.mu_hi[k], tol,
                )
    if amb is Ambiguity.MARKOV_INDEPENDENT and not isinstance(dist, ProductTwoPointDistribution):
        gap = factorization_gap(d)
        if gap > tol:
            return Certificate(
                "membership", False, "joint law does not factor into its marginals", gap=gap, tolerance=tol
            )
    return Certificate("membership", True, f"distribution lies in the {amb.value} set", tolerance=tol)


def factorization_gap(dist: DiscreteDistribution) -> float:
    """Largest |P(t) - prod_i P_i(t_i)| over the product of marginal supports."""
    marg = [dist.marginal(k) for k in range(dist.num_agents)]
    joint = dict(zip(dist.support, dist.weights))
    worst = 0.0
    for idx in np.ndindex(*[len(m) for m in marg]):
        pt = tuple(list(m.keys())[j] for m, j in zip(marg, idx))
        prod = math.prod(m[v] for m, v in zip(marg, pt))
        worst = max(worst, abs(joint.get(pt, 0.0) - prod))
    return worst


@dataclass(frozen=True)
class WorstCase:
    """Value of a worst-case evaluation together with the minimizing law."""

    value: float
    witness: Distribution
    method: str
    upper_bound_only: bool = False
    details: Mapping[str, Any] = field(default_factory=dict)
