"""Two-level tabu search over deployment variables for the relaxed problem.

The outer level moves anchor (BAN) deployments with stations frozen; the
inner level moves SBS/MA deployments jointly. Moves are open/close/swap on
candidate sites, each candidate evaluated through the greedy connection
assignment. Short-term memory is attribute-based (touched sites become tabu
for a tenure), with aspiration on strict incumbent improvement and a restart
diversification that re-opens rarely used station sites when the whole
inner neighborhood is tabu.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from typing import Optional

from .lagrangian import Multipliers, Workspace
from .model import Deployment, Solution, cost
from .scenario import DerivedTables, Scenario

SiteKey = tuple[str, int]  # ("ban" | "sbs" | "ma", index)


@dataclass(frozen=True)
class SearchParams:
    n_outer: int = 10
    n_inner: int = 12
    n_div: int = 2
    n_swap: Optional[int] = None  # cap on generated swap moves; None = all
    tenure_ban: int = 7
    tenure_station: int = 10
    seed: int = 0

    def __post_init__(self):
        if min(self.n_outer, self.n_inner, self.n_div) < 1:
            raise ValueError("iteration budgets and n_div must be positive")
        if self.tenure_ban < 0 or self.tenure_station < 0:
            raise ValueError("tenures must be nonnegative")
        if self.tenure_ban >= self.n_outer or self.tenure_station >= self.n_inner:
            raise ValueError("tenures must stay below their iteration budgets")
        if self.n_swap is not None and self.n_swap < 0:
            raise ValueError("n_swap must be nonnegative")


@dataclass(frozen=True)
class Move:
    action: str  # "open" | "close" | "swap"
    sites: tuple[SiteKey, ...]


@dataclass
class TabuState:
    """Expiry clocks per touched site plus deployment-frequency counters."""

    expiry: dict[SiteKey, int]
    frequency: dict[SiteKey, int]

    @classmethod
    def fresh(cls) -> "TabuState":
        return cls({}, {})

    def is_tabu(self, move: Move, clock: int) -> bool:
        return any(self.expiry.get(site, -1) > clock for site in move.sites)

    def mark(self, move: Move, clock: int, tenure: int) -> None:
        for site in move.sites:
            self.expiry[site] = clock + tenure


def _site_cost(scenario: Scenario, site: SiteKey) -> float:
    kind, idx = site
    group = {"ban": scenario.ban_sites, "sbs": scenario.sbs_sites, "ma": scenario.ma_sites}[kind]
    return group[idx].cost


def _with_site(deployment: Deployment, site: SiteKey, value: int) -> Deployment:
    kind, idx = site

    def flip(bits):
        out = list(bits)
        out[idx] = value
        return tuple(out)

    if kind == "ban":
        return Deployment(flip(deployment.bans), deployment.sbss, deployment.mas)
    if kind == "sbs":
        return Deployment(deployment.bans, flip(deployment.sbss), deployment.mas)
    return Deployment(deployment.bans, deployment.sbss, flip(deployment.mas))


def apply_move(deployment: Deployment, move: Move) -> Deployment:
    if move.action == "open":
        return _with_site(deployment, move.sites[0], 1)
    if move.action == "close":
        return _with_site(deployment, move.sites[0], 0)
    closed, opened = move.sites
    return _with_site(_with_site(deployment, closed, 0), opened, 1)


def _level_sites(scenario: Scenario, level: str, workspace: Optional[Workspace]) -> list[SiteKey]:
    if level == "ban":
        return [("ban", k) for k in range(len(scenario.ban_sites))]
    sites: list[SiteKey] = []
    if workspace is None or workspace.allow_sbs:
        sites += [("sbs", i) for i in range(len(scenario.sbs_sites))]
    if workspace is None or workspace.allow_ma:
        sites += [("ma", j) for j in range(len(scenario.ma_sites))]
    return sites


def initial_deployment(
    scenario: Scenario, budget: float, workspace: Optional[Workspace] = None
) -> Deployment:
    """Cheapest-first fill: anchors while they fit, then stations, always
    keeping the total cost within the budget."""
    dep = Deployment.empty(scenario)
    total = 0.0
    station_sites = _level_sites(scenario, "station", workspace)
    while total < budget:
        closed_bans = [("ban", k) for k, b in enumerate(dep.bans) if not b]
        pick = min(closed_bans, key=lambda s: (_site_cost(scenario, s), s), default=None)
        if pick is not None and total + _site_cost(scenario, pick) <= budget:
            dep = _with_site(dep, pick, 1)
            total += _site_cost(scenario, pick)
            continue
        closed = [
            s
            for s in station_sites
            if not (dep.sbss[s[1]] if s[0] == "sbs" else dep.mas[s[1]])
        ]
        pick = min(closed, key=lambda s: (_site_cost(scenario, s), s), default=None)
        if pick is None or total + _site_cost(scenario, pick) > budget:
            break
        dep = _with_site(dep, pick, 1)
        total += _site_cost(scenario, pick)
    return dep


def neighborhood(
    deployment: Deployment,
    level: str,
    budget: float,
    scenario: Scenario,
    workspace: Optional[Workspace] = None,
    n_swap: Optional[int] = None,
) -> list[tuple[Move, Deployment]]:
    """All open/close/swap moves at one level whose result stays within
    budget, in a fixed order (opens, closes, swaps; each by site index)."""
    sites = _level_sites(scenario, level, workspace)
    base = cost(deployment, scenario)

    def is_open(site: SiteKey) -> bool:
        kind, idx = site
        bits = {"ban": deployment.bans, "sbs": deployment.sbss, "ma": deployment.mas}[kind]
        return bool(bits[idx])

    moves: list[Move] = []
    for site in sites:
        if not is_open(site) and base + _site_cost(scenario, site) <= budget + 1e-9:
            moves.append(Move("open", (site,)))
    for site in sites:
        if is_open(site):
            moves.append(Move("close", (site,)))
    swaps: list[Move] = []
    for closing in sites:
        if not is_open(closing):
            continue
        for opening in sites:
            if opening == closing or is_open(opening):
                continue
            if base - _site_cost(scenario, closing) + _site_cost(scenario, opening) <= budget + 1e-9:
                swaps.append(Move("swap", (closing, opening)))
    if n_swap is not None:
        swaps = swaps[:n_swap]
    moves += swaps
    return [(m, apply_move(deployment, m)) for m in moves]


def _diversify(
    deployment: Deployment,
    scenario: Scenario,
    budget: float,
    tabu: TabuState,
    params: SearchParams,
    workspace: Optional[Workspace],
    rng: random.Random,
) -> Deployment:
    """Open the n_div least-frequently deployed station sites, closing random
    incumbents if needed to stay within budget."""
    sites = _level_sites(scenario, "station", workspace)

    def is_open(dep: Deployment, site: SiteKey) -> bool:
        kind, idx = site
        return bool(dep.sbss[idx] if kind == "sbs" else dep.mas[idx])

    rare = sorted(
        (s for s in sites if not is_open(deployment, s)),
        key=lambda s: (tabu.frequency.get(s, 0), s),
    )[: params.n_div]
    dep = deployment
    for site in rare:
        dep = _with_site(dep, site, 1)
    opened = list(rare)
    while cost(dep, scenario) > budget + 1e-9:
        closable = sorted(s for s in sites if is_open(dep, s) and s not in opened)
        if closable:
            dep = _with_site(dep, rng.choice(closable), 0)
            continue
        if not opened:
            break
        dep = _with_site(dep, opened.pop(), 0)
    return dep


TRACE_FIELDS = ["outer_iter", "inner_iter", "candidate_best", "incumbent", "move", "tabu_hits", "diversified"]


def write_trace_csv(path, rows) -> None:
    """Dump solve_relaxed trace rows (one per search iteration) to CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_FIELDS)
        for outer, inner, best, incumbent, move, hits, diversified in rows:
            label = "" if move is None else f"{move.action}:" + "+".join(f"{k}{i}" for k, i in move.sites)
            writer.writerow([outer, inner, best, incumbent, label, hits, diversified])


def solve_relaxed(
    scenario: Scenario,
    tables: DerivedTables,
    budget: float,
    multipliers: Multipliers,
    theta: float,
    params: SearchParams,
    workspace: Optional[Workspace] = None,
    trace: Optional[list] = None,
) -> tuple[Solution, float]:
    """Best deployment found for the relaxed problem within the budget, with
    its greedy connection plan and relaxed value."""
    ws = workspace or Workspace(scenario, tables, theta=theta)
    rng = random.Random(params.seed)
    tabu1 = TabuState.fresh()
    tabu2 = TabuState.fresh()

    current = initial_deployment(scenario, budget, ws)
    incumbent_value = ws.evaluate(current, multipliers)
    incumbent = current

    def record(outer, inner, best_cand, move, tabu_hits, diversified):
        if trace is not None:
            trace.append((outer, inner, best_cand, incumbent_value, move, tabu_hits, diversified))

    outer_clock = 0
    inner_clock = 0
    for t1 in range(params.n_outer):
        candidates = neighborhood(current, "ban", budget, scenario, ws, params.n_swap)
        if candidates:
            evals = [(ws.evaluate(dep, multipliers), n) for n, (_, dep) in enumerate(candidates)]
            best_value, best_n = min(evals)
            chosen = None
            if best_value < incumbent_value:
                chosen = best_n
            else:
                non_tabu = [
                    (v, n) for v, n in evals if not tabu1.is_tabu(candidates[n][0], outer_clock)
                ]
                if non_tabu:
                    chosen = min(non_tabu)[1]
            tabu_hits = sum(1 for move, _ in candidates if tabu1.is_tabu(move, outer_clock))
            if chosen is not None:
                move, current = candidates[chosen]
                tabu1.mark(move, outer_clock, params.tenure_ban)
                value = evals[chosen][0]
                if value < incumbent_value:
                    incumbent_value = value
                    incumbent = current
                record(t1, -1, best_value, move, tabu_hits, False)
            else:
                record(t1, -1, best_value, None, tabu_hits, False)
        outer_clock += 1

        for t2 in range(params.n_inner):
            for site in _level_sites(scenario, "station", ws):
                kind, idx = site
                if current.sbss[idx] if kind == "sbs" else current.mas[idx]:
                    tabu2.frequency[site] = tabu2.frequency.get(site, 0) + 1
            candidates = neighborhood(current, "station", budget, scenario, ws, params.n_swap)
            if not candidates:
                break
            evals = [(ws.evaluate(dep, multipliers), n) for n, (_, dep) in enumerate(candidates)]
            best_value, best_n = min(evals)
            tabu_hits = sum(1 for move, _ in candidates if tabu2.is_tabu(move, inner_clock))
            diversified = False
            if best_value < incumbent_value:
                move, current = candidates[best_n]
                incumbent_value, incumbent = best_value, current
                tabu2.mark(move, inner_clock, params.tenure_station)
                record(t1, t2, best_value, move, tabu_hits, False)
            else:
                non_tabu = [
                    (v, n) for v, n in evals if not tabu2.is_tabu(candidates[n][0], inner_clock)
                ]
                if non_tabu:
                    move, current = candidates[min(non_tabu)[1]]
                    tabu2.mark(move, inner_clock, params.tenure_station)
                    record(t1, t2, best_value, move, tabu_hits, False)
                else:
                    current = _diversify(current, scenario, budget, tabu2, params, ws, rng)
                    tabu2.expiry.clear()
                    diversified = True
                    value = ws.evaluate(current, multipliers)
                    if value < incumbent_value:
                        incumbent_value, incumbent = value, current
                    record(t1, t2, best_value, None, tabu_hits, True)
            inner_clock += 1

    result = ws.build_plan(incumbent, multipliers)
    return Solution(incumbent, result.plan), result.value
