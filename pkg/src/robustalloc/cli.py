"""Command-line front end."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import reproduce
from .ambiguity import worst_case_independent, worst_case_markov, worst_case_support_only
from .core import (
    Ambiguity,
    DomainError,
    GridSizeError,
    PreconditionError,
    check_membership,
    expected_payoff,
    make_grid,
    validate_instance,
)
from .io import (
    FormatError,
    fmt,
    load_distribution,
    load_instance,
    load_mechanism_csv,
    save_certificates,
    save_distribution,
    save_gaps_csv,
    save_mechanism_csv,
)
from .lp import LPError
from .mechanisms import (
    FavoredAgentMechanism,
    GridMechanism,
    TieRule,
    check_fc,
    check_ic,
    fam_allocate,
    fam_to_grid,
    inspection_perturbation,
    payoff_function,
)
from .optimality import designated_mechanism
from .pareto import pareto_search_markov, pareto_search_support_only, probe_anchors

EXIT_OK, EXIT_MISMATCH, EXIT_DOMAIN, EXIT_IO = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    command: str
    instance: str | None = None
    grid: int = 5
    anchors: tuple[tuple[int, float], ...] = ()
    fam: str | None = None
    mech: str | None = None
    dist: str | None = None
    t: tuple[float, ...] | None = None
    out: str | None = None
    tol: float | None = None
    seed: int = 0
    target: str | None = None
    perturb: bool = False

    def __post_init__(self):
        if self.grid < 2:
            raise ValueError("--grid must be at least 2")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("--tol must be positive")


class _Report:
    """Collects output lines so the same text can go to stdout and to ``--out``."""

    def __init__(self):
        self.lines: list[str] = []

    def __call__(self, text: str = "") -> None:
        self.lines.append(text)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _anchor(text: str) -> tuple[int, float]:
    try:
        agent, value = text.split(":", 1)
        return int(agent), float(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"anchor must look like AGENT:VALUE, got {text!r}") from exc


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def parse_fam(text: str) -> FavoredAgentMechanism:
    """``I,NU,TIE`` with a 1-based agent index and tie rule ``I`` or ``II``."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise FormatError(f"--fam expects I,NU,TIE, got {text!r}")
    try:
        return FavoredAgentMechanism(int(parts[0]), float(parts[1]), TieRule.parse(parts[2]))
    except ValueError as exc:
        raise FormatError(f"--fam: {exc}") from exc


def _instance(cfg: RunConfig):
    if cfg.instance is None:
        raise FormatError("--instance is required")
    inst = load_instance(cfg.instance)
    cert = validate_instance(inst)
    if not cert.passed:
        raise DomainError(cert.message)
    return inst


def _grid(cfg: RunConfig, inst, extra=None):
    anchors: dict[int, list[float]] = {k + 1: list(v) for k, v in enumerate(extra or [])}
    for agent, value in cfg.anchors:
        if not 1 <= agent <= inst.num_agents:
            raise DomainError(f"anchor agent {agent} out of range 1..{inst.num_agents}")
        anchors.setdefault(agent, []).append(value)
    return make_grid(inst, cfg.grid, anchors)


def _mechanism(cfg: RunConfig, inst, grid=None):
    """FAM from ``--fam`` (designated by default), or a tabulated mechanism from ``--mech``."""
    if cfg.mech is not None:
        mech = load_mechanism_csv(cfg.mech, inst.c)
        if mech.grid.num_agents != inst.num_agents:
            raise DomainError("mechanism and instance disagree on the number of agents")
        return mech
    fam = parse_fam(cfg.fam) if cfg.fam else designated_mechanism(inst)
    fam.check_agents(inst)
    if cfg.perturb:
        if grid is None:
            raise DomainError("--perturb needs a grid")
        return inspection_perturbation(fam, inst, grid)
    return fam


def _label(mech) -> str:
    if isinstance(mech, FavoredAgentMechanism):
        return mech.label()
    return f"tabulated mechanism on grid {mech.grid.shape}"


def _vec(v) -> str:
    return "(" + ", ".join(fmt(x) for x in v) + ")"


def _out_dir(cfg: RunConfig) -> Path | None:
    if cfg.out is None:
        return None
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# --- commands -----------------------------------------------------------------


def cmd_validate(cfg: RunConfig, say: _Report) -> int:
    if cfg.instance is None:
        raise FormatError("--instance is required")
    inst = load_instance(cfg.instance)
    cert = validate_instance(inst)
    say(cert.summary())
    if not cert.passed:
        for v in cert.witness["violations"]:
            say(f"  {v}")
    out = _out_dir(cfg)
    if out:
        save_certificates([cert], out / "certificates.json")
    return EXIT_OK if cert.passed else EXIT_DOMAIN


def cmd_evaluate(cfg: RunConfig, say: _Report) -> int:
    inst = _instance(cfg)
    if (cfg.t is None) == (cfg.dist is None):
        raise FormatError("evaluate needs exactly one of --t or --dist")
    mech = _mechanism(cfg, inst)
    say(f"mechanism: {_label(mech)}")
    out = _out_dir(cfg)
    if out and isinstance(mech, GridMechanism):
        # re-print of the parsed table, for round-trip checks
        save_mechanism_csv(mech, out / "mechanism.csv")
    f = payoff_function(mech, inst)
    if cfg.t is not None:
        t = inst.require_contains(cfg.t)
        if isinstance(mech, GridMechanism):
            s = mech.grid.index_of(t)
            if s is None:
                raise DomainError(f"profile {_vec(t)} is not on the mechanism grid")
            p, q = mech.p[s], mech.q[s]
        else:
            p, q = fam_allocate(mech, inst, t)
        say(f"profile: {_vec(t)}")
        say(f"allocation p: {_vec(p)}")
        say(f"inspection q: {_vec(q)}")
        say(f"payoff: {fmt(f(t))}")
        return EXIT_OK
    dist = load_distribution(cfg.dist)
    cert = check_membership(dist, inst, tol=cfg.tol or 1e-9)
    if not cert.passed:
        raise DomainError(f"distribution not admissible: {cert.message}")
    say(f"distribution: {Path(cfg.dist).name}")
    say(f"expected payoff: {fmt(expected_payoff(f, dist, inst))}")
    return EXIT_OK


def cmd_worst_case(cfg: RunConfig, say: _Report) -> int:
    inst = _instance(cfg)
    grid = _grid(cfg, inst) if cfg.mech is None else None
    mech = _mechanism(cfg, inst, grid)
    if isinstance(mech, GridMechanism):
        grid = mech.grid
    say(f"mechanism: {_label(mech)}")
    say(f"ambiguity: {inst.ambiguity.value}")
    say(f"grid shape: {grid.shape}")
    if inst.ambiguity is Ambiguity.SUPPORT_ONLY:
        wc = worst_case_support_only(mech, grid, inst)
    elif inst.ambiguity is Ambiguity.MARKOV:
        wc = worst_case_markov(mech, grid, inst)
    else:
        wc = worst_case_independent(mech, inst, grid)
    say(f"method: {wc.method}")
    say(f"worst-case value: {fmt(wc.value)}")
    if wc.upper_bound_only:
        say("note: value is an upper bound on the infimum over all admissible laws")
    say("witness:")
    w = wc.witness.to_discrete() if hasattr(wc.witness, "to_discrete") else wc.witness
    for t, p in zip(w.support, w.weights):
        say(f"  {_vec(t)}  weight {fmt(p)}")
    out = _out_dir(cfg)
    if out:
        save_distribution(wc.witness, out / "witness.json")
    return EXIT_OK


def cmd_pareto(cfg: RunConfig, say: _Report) -> int:
    inst = _instance(cfg)
    if inst.ambiguity is Ambiguity.MARKOV_INDEPENDENT:
        say("Pareto search is not available under independence: product laws make the robust")
        say("constraint non-convex. Compare candidate mechanisms on chosen product laws with")
        say("pareto.distributional_dominance instead.")
        return EXIT_DOMAIN
    # Markov searches score probes centered on mu_lo; keep those values on the grid
    extra = probe_anchors(inst) if inst.ambiguity is Ambiguity.MARKOV else None
    grid = _grid(cfg, inst, extra) if cfg.mech is None else None
    base = _mechanism(cfg, inst, grid)
    if isinstance(base, FavoredAgentMechanism):
        base = fam_to_grid(base, inst, grid)
    grid = base.grid
    say(f"ambiguity: {inst.ambiguity.value}")
    say(f"grid shape: {grid.shape}")
    for cert in (check_fc(base), check_ic(base)):
        say(f"base {cert.summary()}")
    if inst.ambiguity is Ambiguity.SUPPORT_ONLY:
        res = pareto_search_support_only(inst, grid, base)
    else:
        res = pareto_search_markov(inst, grid, base)
    tol = cfg.tol or 1e-6
    say(f"slack: {fmt(res.value)}")
    if res.flags:
        say(f"flags: {', '.join(res.flags)}")
    improves = res.value > tol
    if improves:
        gain = res.witness.payoffs() - base.payoffs()
        s = int(np.argmax(gain))
        say(f"improvement found; largest gain {fmt(gain[s])} at {_vec(grid.scenarios()[s])}")
    else:
        say(f"no improvement at this resolution (slack <= {tol:g})")
    out = _out_dir(cfg)
    if out:
        if res.witness is not None:
            save_mechanism_csv(res.witness, out / "pareto_witness.csv")
        labels = [_vec(t) for t in grid.scenarios()]
        if res.witness is not None:
            save_gaps_csv(labels, res.witness.payoffs() - base.payoffs(), out / "pareto_gaps.csv", "scenario")
    return EXIT_OK


def cmd_reproduce(cfg: RunConfig, say: _Report) -> int:
    claims = reproduce.run(cfg.target, seed=cfg.seed)
    say(f"reproduce {cfg.target} (seed {cfg.seed})")
    for c in claims:
        say(c.row())
    failed = [c for c in claims if not c.passed]
    say(f"{len(claims) - len(failed)}/{len(claims)} claims pass")
    if failed:
        say(f"first failing claim: {failed[0].name}")
        return EXIT_MISMATCH
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "evaluate": cmd_evaluate,
    "worst-case": cmd_worst_case,
    "pareto": cmd_pareto,
    "reproduce": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", help="instance JSON path or builtin:NAME")
    common.add_argument("--grid", type=int, default=5, help="points per agent (default 5)")
    common.add_argument("--anchor", type=_anchor, action="append", default=[], metavar="AGENT:VALUE",
                        help="extra grid value for a 1-based agent; repeatable")
    common.add_argument("--fam", metavar="I,NU,TIE", help="favored-agent mechanism (default: designated)")
    common.add_argument("--mech", metavar="CSVPATH", help="tabulated mechanism CSV")
    common.add_argument("--perturb", action="store_true",
                        help="add the avoidable inspection to the --fam mechanism")
    common.add_argument("--dist", metavar="PATH", help="distribution JSON")
    common.add_argument("--t", type=_floats, metavar="T1,T2,...", help="type profile")
    common.add_argument("--out", metavar="DIR", help="write report and CSV/JSON files here")
    common.add_argument("--tol", type=float, help="tolerance override")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized suites")

    parser = argparse.ArgumentParser(prog="robustalloc", description="Robust allocation with costly inspection.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check an instance file")
    sub.add_parser("evaluate", parents=[common], help="allocation and payoff at a profile or under a law")
    sub.add_parser("worst-case", parents=[common], help="worst-case expected payoff on a grid")
    sub.add_parser("pareto", parents=[common], help="search for a robust improvement over a base")
    rp = sub.add_parser("reproduce", parents=[common], help="recompute a built-in claim table")
    rp.add_argument("target", choices=reproduce.TARGETS)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=ns.command,
        instance=ns.instance,
        grid=ns.grid,
        anchors=tuple(ns.anchor),
        fam=ns.fam,
        mech=ns.mech,
        dist=ns.dist,
        t=ns.t,
        out=ns.out,
        tol=ns.tol,
        seed=ns.seed,
        target=getattr(ns, "target", None),
        perturb=ns.perturb,
    )


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    say = _Report()
    try:
        code = COMMANDS[cfg.command](cfg, say)
    except (FormatError, OSError, json.JSONDecodeError) as exc:
        say(f"error: {exc}")
        code = EXIT_IO
    except (DomainError, PreconditionError, GridSizeError, LPError, ValueError) as exc:
        say(f"error: {exc}")
        code = EXIT_DOMAIN
    text = say.text()
    stdout.write(text)
    if cfg.out is not None:
        try:
            out = Path(cfg.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "report.txt").write_text(text, encoding="utf-8")
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
    return code


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except ValueError as exc:
        parser.error(str(exc))
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
