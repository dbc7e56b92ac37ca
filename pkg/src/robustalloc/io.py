"""File formats: instance and distribution JSON, mechanism and gap CSV, certificate records."""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import (
    Ambiguity,
    Certificate,
    DiscreteDistribution,
    Grid,
    Instance,
    ProductTwoPointDistribution,
)
from .mechanisms import GridMechanism

BUILTINS = ("support_only_example", "markov_example", "independent_example")


class FormatError(ValueError):
    """A file could not be parsed into the expected structure."""


def instance_from_dict(data: dict) -> Instance:
    try:
        agents = data["agents"]
        amb = Ambiguity(data.get("ambiguity", "support_only"))
        t_lo = [a["t_lo"] for a in agents]
        t_hi = [a["t_hi"] for a in agents]
        c = [a["c"] for a in agents]
        has_mu = any("mu_lo" in a or "mu_hi" in a for a in agents)
        mu_lo = [a["mu_lo"] for a in agents] if has_mu else None
        mu_hi = [a["mu_hi"] for a in agents] if has_mu else None
        return Instance(t_lo, t_hi, c, amb, mu_lo, mu_hi)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed instance: {exc}") from exc


def instance_to_dict(inst: Instance) -> dict:
    agents = []
    for k in range(inst.num_agents):
        a = {"t_lo": inst.t_lo[k], "t_hi": inst.t_hi[k], "c": inst.c[k]}
        if inst.mu_lo is not None:
            a["mu_lo"] = inst.mu_lo[k]
            a["mu_hi"] = inst.mu_hi[k]
        agents.append(a)
    return {"ambiguity": inst.ambiguity.value, "agents": agents}


def _read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def load_instance(path) -> Instance:
    """Read an instance file; ``builtin:<name>`` selects a shipped example."""
    text = str(path)
    if text.startswith("builtin:"):
        return load_builtin(text.split(":", 1)[1])
    return instance_from_dict(_read_json(path))


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2) + "\n", encoding="utf-8")


def load_builtin(name: str) -> Instance:
    if name not in BUILTINS:
        raise FormatError(f"unknown built-in instance {name!r}; choose from {', '.join(BUILTINS)}")
    text = resources.files("robustalloc").joinpath("data", f"{name}.json").read_text(encoding="utf-8")
    return instance_from_dict(json.loads(text))


def distribution_from_dict(data: dict):
    try:
        kind = data["kind"]
        if kind == "discrete":
            pts = data["points"]
            return DiscreteDistribution(tuple(tuple(p["t"]) for p in pts), tuple(p["w"] for p in pts))
        if kind == "product_two_point":
            m = data["marginals"]
            return ProductTwoPointDistribution([x["lo"] for x in m], [x["hi"] for x in m], [x["p_hi"] for x in m])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed distribution: {exc}") from exc
    raise FormatError(f"unknown distribution kind {data.get('kind')!r}")


def distribution_to_dict(dist) -> dict:
    if isinstance(dist, ProductTwoPointDistribution):
        return {
            "kind": "product_two_point",
            "marginals": [{"lo": a, "hi": b, "p_hi": p} for a, b, p in zip(dist.lo, dist.hi, dist.prob_hi)],
        }
    return {"kind": "discrete", "points": [{"t": list(t), "w": w} for t, w in zip(dist.support, dist.weights)]}


def load_distribution(path):
    return distribution_from_dict(_read_json(path))


def save_distribution(dist, path) -> None:
    Path(path).write_text(json.dumps(distribution_to_dict(dist), indent=2) + "\n", encoding="utf-8")


def fmt(x: float) -> str:
    """12 significant digits, no trailing noise."""
    return f"{float(x):.12g}"


def mechanism_rows(mech: GridMechanism) -> list[list[str]]:
    n = mech.grid.num_agents
    header = [f"t_{k}" for k in range(1, n + 1)] + [f"p_{k}" for k in range(1, n + 1)] + [f"q_{k}" for k in range(1, n + 1)]
    rows = [header]
    for t, p, q in zip(mech.grid.scenarios(), mech.p, mech.q):
        rows.append([fmt(v) for v in (*t, *p, *q)])
    return rows


def save_mechanism_csv(mech: GridMechanism, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(mechanism_rows(mech))


def load_mechanism_csv(path, costs: Iterable[float]) -> GridMechanism:
    """Read a tabulated mechanism; the grid is the product of the distinct ``t`` values."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        n = sum(1 for h in header if h.startswith("t_"))
        if n == 0 or len(header) != 3 * n:
            raise FormatError(f"{path}: header must list t_1..t_I, p_1..p_I, q_1..q_I")
        data = np.array([[float(v) for v in r] for r in body if r])
    except (OSError, ValueError, IndexError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != 3 * n:
        raise FormatError(f"{path}: every row needs {3 * n} values")
    grid = Grid(tuple(tuple(np.unique(data[:, k])) for k in range(n)))
    if grid.size != data.shape[0]:
        raise FormatError(f"{path}: rows do not form a full product grid")
    p = np.zeros((grid.size, n))
    q = np.zeros((grid.size, n))
    seen = np.zeros(grid.size, dtype=bool)
    for row in data:
        s = grid.index_of(row[:n])
        if seen[s]:
            raise FormatError(f"{path}: duplicate scenario {tuple(row[:n])}")
        seen[s] = True
        p[s] = row[n : 2 * n]
        q[s] = row[2 * n :]
    return GridMechanism(grid, p, q, tuple(costs))


def save_gaps_csv(labels, gaps, path, label_name: str = "item") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([label_name, "gap"])
        for lab, g in zip(labels, gaps):
            w.writerow([lab, fmt(g)])


def save_certificates(certs: Iterable[Certificate], path) -> None:
    records = [c.to_record() for c in certs]
    Path(path).write_text(json.dumps(records, indent=2, sort_keys=True) + "\n", encoding="utf-8")
