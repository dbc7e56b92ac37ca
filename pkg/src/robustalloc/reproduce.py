"""Claim tables for the built-in examples and seeded property suites."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ambiguity import (
    construct_product_two_point,
    construct_two_point_markov,
    counterexample_distribution,
    worst_case_independent,
    worst_case_markov,
    worst_case_support_only,
)
from .core import (
    Ambiguity,
    Grid,
    Instance,
    check_membership,
    dirac,
    expected_payoff,
    factorization_gap,
    make_grid,
)
from .io import load_builtin
from .mechanisms import (
    FavoredAgentMechanism,
    TieRule,
    check_constant_net_allocation,
    check_fc,
    check_ic,
    fam_payoff,
    fam_to_grid,
    inspection_perturbation,
    mix,
)
from .optimality import (
    LABELS,
    Partition,
    classify_region,
    designated_mechanism,
    display_predicates,
    optimal_value,
    region_payoff,
    region_predicates,
)
from .pareto import Relation, distributional_dominance, pointwise_dominance

TARGETS = ("remark1", "remark2", "remark3", "remark4", "section3", "partitions", "lemma_constructions")


@dataclass(frozen=True)
class Claim:
    """One reproduced number compared with its expected value.

    ``kind`` is ``eq`` (within ``tol``), ``le``/``lt`` (observed at most /
    below expected) or ``true`` (observed is a boolean that must hold).
    """

    name: str
    observed: float | bool
    expected: float | bool
    tol: float = 1e-9
    kind: str = "eq"

    @property
    def passed(self) -> bool:
        if self.kind == "true":
            return bool(self.observed)
        o, e = float(self.observed), float(self.expected)
        if self.kind == "eq":
            return abs(o - e) <= self.tol
        if self.kind == "le":
            return o <= e + self.tol
        if self.kind == "lt":
            return o < e - self.tol
        raise ValueError(f"unknown claim kind {self.kind!r}")

    def row(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        if self.kind == "true":
            return f"{status}  {self.name}"
        sym = {"eq": "==", "le": "<=", "lt": "<"}[self.kind]
        return f"{status}  {self.name}: {float(self.observed):.12g} {sym} {float(self.expected):.12g} (tol {self.tol:g})"


def _fam(i, nu, tie="I"):
    return FavoredAgentMechanism(i, nu, TieRule(tie))


def remark1_grid(inst: Instance, nu_values=(0.5, 1.0, 1.5, 1.9)) -> Grid:
    """Grid carrying every scenario at which a low threshold is shown to lose."""
    return make_grid(inst, 5, {1: [2.0], 2: [2.0] + [2.0 + nu / 2.0 for nu in nu_values]})


def claims_remark1() -> list[Claim]:
    inst = load_builtin("support_only_example")
    grid = remark1_grid(inst)
    out = [Claim("optimal value", optimal_value(inst), 2.0, 1e-12)]
    w = worst_case_support_only(_fam(1, 0.5), grid, inst)
    out.append(Claim("nu=0.5: worst case over grid with (2,2)", w.value, 1.0, kind="le"))
    for nu in (1.0, 1.5, 1.9):
        w = worst_case_support_only(_fam(1, nu), grid, inst)
        out.append(Claim(f"nu={nu:g}: worst case over grid with (2,{2 + nu / 2:g})", w.value, 1.0 + nu / 2.0, kind="le"))
        out.append(Claim(f"nu={nu:g}: strictly below optimum", w.value, 2.0, kind="lt"))
    w = worst_case_support_only(designated_mechanism(inst), grid, inst)
    out.append(Claim("designated mechanism worst case", w.value, 2.0))
    return out


def markov_anchor_grid(inst: Instance, nu: float = 2.0) -> Grid:
    return make_grid(inst, 2, {1: [1, 2, 4, 5, 6], 2: [0, 3, 6.5 + nu / 4.0, 7, 8, 10]})


def claims_remark2() -> list[Claim]:
    inst = load_builtin("markov_example")
    out = [Claim("optimal value", optimal_value(inst), 4.0, 1e-12)]
    for nu in (1.0, 2.0, 5.9):
        d = counterexample_distribution("R2", nu)
        fam = _fam(1, nu, "II")
        e = expected_payoff(lambda t: fam_payoff(fam, inst, t), d, inst)
        out.append(Claim(f"nu={nu:g}: expected payoff under R2", e, 3.25 + nu / 8.0))
        out.append(Claim(f"nu={nu:g}: {e:.12g} vs bound 4", e, 4.0, kind="lt"))
    grid = markov_anchor_grid(inst)
    w = worst_case_markov(designated_mechanism(inst), grid, inst)
    out.append(Claim("designated mechanism LP worst case", w.value, 4.0))
    w = worst_case_markov(_fam(1, 2.0, "II"), grid, inst)
    out.append(Claim("nu=2: LP worst case", w.value, 3.5, kind="le"))
    return out


def claims_remark3() -> list[Claim]:
    inst = load_builtin("independent_example")
    out = [Claim("optimal value", optimal_value(inst), 4.0, 1e-12)]
    for nu in (1.0, 2.0, 3.9):
        d = counterexample_distribution("R3", nu)
        fam = _fam(1, nu, "I")
        e = expected_payoff(lambda t: fam_payoff(fam, inst, t), d, inst)
        out.append(Claim(f"nu={nu:g}: expected payoff under R3", e, 3.5 + nu / 8.0))
        out.append(Claim(f"nu={nu:g}: {e:.12g} vs bound 4", e, 4.0, kind="lt"))
        out.append(Claim(f"nu={nu:g}: R3 factorizes", factorization_gap(d.to_discrete()), 0.0, 1e-12))
    w = worst_case_independent(designated_mechanism(inst), inst, make_grid(inst, 3))
    out.append(Claim("designated mechanism product-law search", w.value, 4.0))
    return out


def claims_remark4() -> list[Claim]:
    inst = load_builtin("independent_example")
    d = counterexample_distribution("R4")
    alpha = d.prob_hi[1]
    out = [Claim("alpha", alpha, 0.4, 1e-12)]
    a = _fam(1, inst.mu_hi[0], "I")
    for nu in (6.0, 8.0):
        b = _fam(1, nu, "II")
        # brute-force expectation over the two support points
        pts = d.to_discrete()
        ea = sum(w * fam_payoff(a, inst, t) for t, w in zip(pts.support, pts.weights))
        eb = sum(w * fam_payoff(b, inst, t) for t, w in zip(pts.support, pts.weights))
        out.append(Claim(f"nu={nu:g}: E[A] - E[B]", ea - eb, 0.6))
        rep = distributional_dominance(a, b, [d], inst)
        out.append(Claim(f"nu={nu:g}: A strictly better under the two-point law",
                         rep.relation is Relation.A_STRICTLY_DOMINATES, True, kind="true"))
    # no mass where t_2 - c_2 falls strictly between mu_hi_1 and nu
    rep = distributional_dominance(a, _fam(1, 6.0, "II"), [dirac(inst.mu_lo)], inst)
    out.append(Claim("Dirac at mu_lo: equal", rep.relation is Relation.EQUAL, True, kind="true"))
    return out


def claims_section3() -> list[Claim]:
    inst = load_builtin("support_only_example")
    grid = Grid(((2.0, 5.0, 8.0), (0.0, 2.0, 3.0, 10.0)))
    base_fam = _fam(1, 10.0, "I")
    base = fam_to_grid(base_fam, inst, grid)
    pert = inspection_perturbation(base_fam, inst, grid)
    out = [
        Claim("perturbation is feasible", check_fc(pert).passed, True, kind="true"),
        Claim("perturbation is incentive compatible", check_ic(pert).passed, True, kind="true"),
        Claim("perturbation worst case", worst_case_support_only(pert, grid).value, 2.0),
    ]
    rep = pointwise_dominance(base, pert)
    out.append(Claim("base strictly dominates perturbation", rep.relation is Relation.A_STRICTLY_DOMINATES, True, kind="true"))
    out.append(Claim("dominance witness at (8,0)", tuple(rep.witness["at"]) == (8.0, 0.0), True, kind="true"))
    out.append(Claim("dominance gap at (8,0)", rep.witness["gap"], 1.0))
    out.append(Claim("perturbation varies p-q on own axis", not check_constant_net_allocation(pert).passed, True, kind="true"))
    out.append(Claim("base has constant p-q on own axes", check_constant_net_allocation(base).passed, True, kind="true"))
    fams = [fam_to_grid(_fam(i, nu, tie), inst, grid) for i, nu, tie in ((1, 2, "I"), (2, 4, "II"), (1, 10, "I"))]
    mixed = mix(fams, [0.2, 0.3, 0.5])
    out.append(Claim("mixture of favored-agent mechanisms has constant p-q",
                     check_constant_net_allocation(mixed).passed, True, kind="true"))
    out.append(Claim("optimal yet dominated",
                     worst_case_support_only(pert, grid).value == optimal_value(inst)
                     and rep.relation is Relation.A_STRICTLY_DOMINATES, True, kind="true"))
    return out


# --- random instances and profiles ----------------------------------------------


def random_instance(rng: np.random.Generator, num_agents: int, ambiguity: Ambiguity | str = "markov") -> Instance:
    """Valid instance with a unique top-ranked agent (almost surely)."""
    amb = Ambiguity(ambiguity)
    t_lo = rng.uniform(0.0, 5.0, num_agents)
    width = rng.uniform(1.0, 10.0, num_agents)
    t_hi = t_lo + width
    c = rng.uniform(0.2, 3.0, num_agents)
    mu_lo = t_lo + width * rng.uniform(0.1, 0.6, num_agents)
    mu_hi = mu_lo + (t_hi - mu_lo) * rng.uniform(0.0, 0.8, num_agents)
    if amb is Ambiguity.SUPPORT_ONLY:
        return Instance(t_lo, t_hi, c, amb)
    return Instance(t_lo, t_hi, c, amb, mu_lo, mu_hi)


def random_profile(rng: np.random.Generator, inst: Instance, star: int, tie_prob: float = 0.3) -> np.ndarray:
    """Uniform profile, sometimes moved onto a region boundary to exercise ties."""
    lo, hi = np.array(inst.t_lo), np.array(inst.t_hi)
    t = rng.uniform(lo, hi)
    if rng.random() < tie_prob:
        k = int(rng.integers(inst.num_agents))
        marks = [lo[star], hi[star], t[star]]
        if inst.mu_lo is not None:
            marks += [inst.mu_lo[star], inst.mu_hi[star]]
        target = float(rng.choice(marks))
        if k == star:
            t[k] = target
        else:
            t[k] = target + (inst.c[k] if rng.random() < 0.5 else 0.0)
        t = np.clip(t, lo, hi)
    return t


def partition_check(rng: np.random.Generator, partition: Partition, num_agents: int, samples: int) -> dict:
    """Counts of profiles with exactly one label, display agreement and payoff matches."""
    amb = Ambiguity.SUPPORT_ONLY if partition is Partition.SUPPORT_ONLY else (
        Ambiguity.MARKOV if partition is Partition.MARKOV else Ambiguity.MARKOV_INDEPENDENT
    )
    inst = random_instance(rng, num_agents, amb)
    fam = designated_mechanism(inst)
    star = fam.i_star - 1
    unique = display_ok = payoff_ok = 0
    worst_payoff_gap = 0.0
    for _ in range(samples):
        t = random_profile(rng, inst, star)
        preds = region_predicates(inst, t, partition)
        hits = [k for k, v in preds.items() if v]
        if len(hits) == 1:
            unique += 1
            label = classify_region(inst, t, partition)
            gap = abs(region_payoff(inst, t, label) - fam_payoff(fam, inst, t))
            worst_payoff_gap = max(worst_payoff_gap, gap)
            payoff_ok += gap <= 1e-9
        if num_agents == 2:
            display_ok += display_predicates(inst, t, partition) == preds
        else:
            display_ok += 1
    return {"samples": samples, "unique": unique, "display_agree": display_ok, "payoff_match": payoff_ok,
            "worst_payoff_gap": worst_payoff_gap, "labels": LABELS[partition]}


def claims_partitions(seed: int = 0, samples: int = 10_000) -> list[Claim]:
    rng = np.random.default_rng(seed)
    out = []
    for partition in Partition:
        for n in (2, 3, 4):
            r = partition_check(rng, partition, n, samples)
            tag = f"{partition.value} I={n}"
            out.append(Claim(f"{tag}: exactly one label", r["unique"], samples, 0))
            out.append(Claim(f"{tag}: region payoff matches designated mechanism", r["payoff_match"], samples, 0))
            if n == 2:
                out.append(Claim(f"{tag}: two-agent form agrees", r["display_agree"], samples, 0))
    return out


def two_point_properties(inst: Instance, t: np.ndarray, tol: float = 1e-9) -> dict[str, bool]:
    d = construct_two_point_markov(inst, t)
    star = int(np.argmax(inst.mu_lo))
    t_hat = np.array(d.support[-1])
    alpha = d.weights[0]
    others = np.delete(t_hat, star)
    return {
        "mean": bool(np.all(np.abs(d.mean() - np.array(inst.mu_lo)) <= tol)),
        "alpha": 0.0 < alpha <= 1.0,
        "support": all(inst.contains(p, tol) for p in d.support) and d.prob(t) > 0,
        "ordering": len(d.support) == 1 or bool(others.max() < t_hat[star]),
        "membership": check_membership(d, inst, Ambiguity.MARKOV, tol).passed,
    }


def product_properties(inst: Instance, t: np.ndarray, target: float, tol: float = 1e-9) -> dict[str, bool]:
    d = construct_product_two_point(inst, t, target)
    star = int(np.argmax(inst.mu_lo))
    t_hat = np.array(d.other_point(t))
    mean = d.marginal_mean()
    return {
        "target_mean": abs(mean[star] - target) <= tol,
        "positive": d.prob(t) > 0,
        "ordering": bool(np.delete(t_hat, star).max() < inst.mu_lo[star]),
        "means_in_bounds": bool(np.all(mean >= np.array(inst.mu_lo) - tol) and np.all(mean <= np.array(inst.mu_hi) + tol)),
        "membership": check_membership(d, inst, Ambiguity.MARKOV_INDEPENDENT, tol).passed,
    }


def claims_lemma_constructions(seed: int = 0, draws: int = 1000) -> list[Claim]:
    rng = np.random.default_rng(seed)
    joint: dict[str, int] = {}
    prod: dict[str, int] = {}
    for _ in range(draws):
        n = int(rng.integers(2, 5))
        inst = random_instance(rng, n, Ambiguity.MARKOV)
        t = rng.uniform(inst.t_lo, inst.t_hi)
        for k, v in two_point_properties(inst, t).items():
            joint[k] = joint.get(k, 0) + v
        star = int(np.argmax(inst.mu_lo))
        target = float(rng.uniform(inst.mu_lo[star], inst.mu_hi[star]))
        for k, v in product_properties(inst.with_ambiguity(Ambiguity.MARKOV_INDEPENDENT), t, target).items():
            prod[k] = prod.get(k, 0) + v
    out = [Claim(f"joint two-point: {k}", v, draws, 0) for k, v in joint.items()]
    out += [Claim(f"product two-point: {k}", v, draws, 0) for k, v in prod.items()]
    return out


def run(target: str, seed: int = 0) -> list[Claim]:
    table: dict[str, Callable[[], list[Claim]]] = {
        "remark1": claims_remark1,
        "remark2": claims_remark2,
        "remark3": claims_remark3,
        "remark4": claims_remark4,
        "section3": claims_section3,
        "partitions": lambda: claims_partitions(seed),
        "lemma_constructions": lambda: claims_lemma_constructions(seed),
    }
    if target not in table:
        raise ValueError(f"unknown target {target!r}; choose from {', '.join(TARGETS)}")
    return table[target]()
