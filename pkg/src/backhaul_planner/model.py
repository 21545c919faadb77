"""The deployment problem as executable artifacts.

Solutions pair a deployment bit-vector per station role with a connection
plan: which station covers each subarea, the backhaul forest over small
cells, aggregator-to-anchor links, and machine assignments. Feasibility
checking returns the complete violation list (violations are data, not
exceptions) so tests and the CLI can report every broken constraint at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .scenario import DerivedTables, Scenario

ParentRef = tuple[str, int]  # ("ban", k) or ("sbs", p)


class IntegrityError(RuntimeError):
    """A solution's structure is internally inconsistent (cycle, lost root)."""


@dataclass(frozen=True)
class Deployment:
    """0/1 open flags aligned with the scenario's candidate site lists."""

    bans: tuple[int, ...]
    sbss: tuple[int, ...]
    mas: tuple[int, ...]

    def __post_init__(self):
        for bits in (self.bans, self.sbss, self.mas):
            if any(b not in (0, 1) for b in bits):
                raise ValueError("deployment flags must be 0 or 1")

    @classmethod
    def empty(cls, scenario: Scenario) -> "Deployment":
        return cls(
            (0,) * len(scenario.ban_sites),
            (0,) * len(scenario.sbs_sites),
            (0,) * len(scenario.ma_sites),
        )

    @classmethod
    def of(cls, scenario: Scenario, bans=(), sbss=(), mas=()) -> "Deployment":
        def bits(n, chosen):
            out = [0] * n
            for i in chosen:
                out[i] = 1
            return tuple(out)

        return cls(
            bits(len(scenario.ban_sites), bans),
            bits(len(scenario.sbs_sites), sbss),
            bits(len(scenario.ma_sites), mas),
        )

    def open_bans(self) -> list[int]:
        return [k for k, b in enumerate(self.bans) if b]

    def open_sbss(self) -> list[int]:
        return [i for i, b in enumerate(self.sbss) if b]

    def open_mas(self) -> list[int]:
        return [j for j, b in enumerate(self.mas) if b]


@dataclass
class ConnectionPlan:
    """Coverage and backhaul choices for a fixed deployment."""

    ban_cover: dict[int, int] = field(default_factory=dict)  # subarea -> BAN
    sbs_cover: dict[int, int] = field(default_factory=dict)  # subarea -> SBS
    sbs_parent: dict[int, ParentRef] = field(default_factory=dict)
    ma_parent: dict[int, int] = field(default_factory=dict)  # MA -> BAN
    machine_cover: dict[int, int] = field(default_factory=dict)  # machine -> MA

    def copy(self) -> "ConnectionPlan":
        return ConnectionPlan(
            dict(self.ban_cover),
            dict(self.sbs_cover),
            dict(self.sbs_parent),
            dict(self.ma_parent),
            dict(self.machine_cover),
        )


@dataclass
class Solution:
    deployment: Deployment
    plan: ConnectionPlan

    @classmethod
    def empty(cls, scenario: Scenario) -> "Solution":
        return cls(Deployment.empty(scenario), ConnectionPlan())

    def copy(self) -> "Solution":
        return Solution(self.deployment, self.plan.copy())


@dataclass(frozen=True)
class ObjectiveVector:
    cost: float
    uncovered_subareas: int
    uncovered_machines: int
    weighted_uncovered: float


@dataclass(frozen=True)
class Violation:
    code: str
    subject: tuple
    detail: str


def cost(deployment: Deployment, scenario: Scenario) -> float:
    """Total deployment cost of the open sites."""
    return (
        sum(s.cost for s, b in zip(scenario.ban_sites, deployment.bans) if b)
        + sum(s.cost for s, b in zip(scenario.sbs_sites, deployment.sbss) if b)
        + sum(s.cost for s, b in zip(scenario.ma_sites, deployment.mas) if b)
    )


def objectives(solution: Solution, scenario: Scenario, mtc_weight: float) -> ObjectiveVector:
    covered_subareas = len(solution.plan.ban_cover) + len(solution.plan.sbs_cover)
    covered_machines = len(solution.plan.machine_cover)
    f2 = scenario.n_subareas - covered_subareas
    f3 = scenario.n_machines - covered_machines
    return ObjectiveVector(
        cost=cost(solution.deployment, scenario),
        uncovered_subareas=f2,
        uncovered_machines=f3,
        weighted_uncovered=f2 + mtc_weight * f3,
    )


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    """Strict Pareto dominance on the (cost, weighted uncoverage) pair."""
    if a.cost > b.cost or a.weighted_uncovered > b.weighted_uncovered:
        return False
    return a.cost < b.cost or a.weighted_uncovered < b.weighted_uncovered


def root_path(plan: ConnectionPlan, sbs: int) -> list[ParentRef]:
    """Nodes from the anchoring BAN down to (and including) the given SBS."""
    rev: list[ParentRef] = [("sbs", sbs)]
    seen = {sbs}
    node = sbs
    while True:
        parent = plan.sbs_parent.get(node)
        if parent is None:
            raise IntegrityError(f"sbs {sbs} has no path to a BAN (chain breaks at sbs {node})")
        kind, idx = parent
        if kind == "ban":
            rev.append(parent)
            return rev[::-1]
        if idx in seen:
            raise IntegrityError(f"cycle in backhaul forest at sbs {idx}")
        seen.add(idx)
        rev.append(parent)
        node = idx


def routing_flows(solution: Solution) -> dict[int, list[tuple[ParentRef, ParentRef]]]:
    """Per covered subarea, the hop sequence its data takes from the BAN to
    the covering SBS. Subareas covered by a BAN directly get an empty flow."""
    flows: dict[int, list[tuple[ParentRef, ParentRef]]] = {}
    for subarea in sorted(solution.plan.ban_cover):
        flows[subarea] = []
    for subarea, sbs in sorted(solution.plan.sbs_cover.items()):
        path = root_path(solution.plan, sbs)
        flows[subarea] = list(zip(path, path[1:]))
    return flows


def sbs_loads(solution: Solution) -> dict[int, int]:
    """Subareas carried by each attached SBS: its own coverage plus every
    covered subarea routed through it."""
    loads = {i: 0 for i in solution.plan.sbs_parent}
    for subarea, sbs in solution.plan.sbs_cover.items():
        for kind, idx in root_path(solution.plan, sbs):
            if kind == "sbs":
                loads[idx] = loads.get(idx, 0) + 1
    return loads


def check_feasibility(
    solution: Solution,
    scenario: Scenario,
    tables: DerivedTables,
    budget: Optional[float] = None,
) -> list[Violation]:
    """Every violated constraint of the deployment problem, with stable
    ordering. Empty list means feasible; ``budget`` adds the cost cap."""
    v: list[Violation] = []
    dep, plan = solution.deployment, solution.plan
    add = v.append

    # connections may only touch open stations
    for subarea, k in sorted(plan.ban_cover.items()):
        if not (0 <= k < len(dep.bans)) or not dep.bans[k]:
            add(Violation("cover-undeployed", (k, subarea), f"ban {k} covers subarea {subarea} but is not open"))
    for subarea, i in sorted(plan.sbs_cover.items()):
        if not (0 <= i < len(dep.sbss)) or not dep.sbss[i]:
            add(Violation("cover-undeployed", (i, subarea), f"sbs {i} covers subarea {subarea} but is not open"))
    def is_open(bits, idx) -> bool:
        return 0 <= idx < len(bits) and bool(bits[idx])

    for i, (kind, p) in sorted(plan.sbs_parent.items()):
        if not is_open(dep.sbss, i):
            add(Violation("link-undeployed", (i,), f"sbs {i} has a backhaul link but is not open"))
        parent_open = is_open(dep.bans, p) if kind == "ban" else (is_open(dep.sbss, p) and p != i)
        if not parent_open:
            add(Violation("link-undeployed", (i, kind, p), f"sbs {i} hangs off closed {kind} {p}"))
    for j, k in sorted(plan.ma_parent.items()):
        if not is_open(dep.mas, j):
            add(Violation("link-undeployed", (j,), f"ma {j} has a backhaul link but is not open"))
        if not is_open(dep.bans, k):
            add(Violation("link-undeployed", (j, "ban", k), f"ma {j} hangs off closed ban {k}"))
    for m, j in sorted(plan.machine_cover.items()):
        if not is_open(dep.mas, j):
            add(Violation("cover-undeployed", (j, m), f"ma {j} covers machine {m} but is not open"))

    # unique coverage per subarea
    for subarea in sorted(set(plan.ban_cover) & set(plan.sbs_cover)):
        add(Violation("duplicate-coverage", (subarea,), f"subarea {subarea} covered twice"))

    # coverage only within radio range
    n_sub = scenario.n_subareas
    for subarea, k in sorted(plan.ban_cover.items()):
        if not (0 <= subarea < n_sub):
            add(Violation("access-distance", (k, subarea), f"subarea {subarea} does not exist"))
        elif 0 <= k < len(dep.bans) and tables.ban_subarea_m[k][subarea] > tables.ban_radius_m + 1e-9:
            add(Violation("access-distance", (k, subarea), f"subarea {subarea} out of range of ban {k}"))
    for subarea, i in sorted(plan.sbs_cover.items()):
        if not (0 <= subarea < n_sub):
            add(Violation("access-distance", (i, subarea), f"subarea {subarea} does not exist"))
        elif 0 <= i < len(dep.sbss) and tables.sbs_subarea_m[i][subarea] > tables.sbs_radius_m + 1e-9:
            add(Violation("access-distance", (i, subarea), f"subarea {subarea} out of range of sbs {i}"))
    reach_by_ma = {j: set(r) for j, r in enumerate(tables.ma_reach)}
    for m, j in sorted(plan.machine_cover.items()):
        if m not in reach_by_ma.get(j, ()):
            add(Violation("machine-distance", (j, m), f"machine {m} out of range of ma {j}"))

    # anchor slot budget
    slot_use: dict[int, int] = {}
    for i, (kind, p) in plan.sbs_parent.items():
        if kind == "ban":
            slot_use[p] = slot_use.get(p, 0) + 1
    for j, k in plan.ma_parent.items():
        slot_use[k] = slot_use.get(k, 0) + 1
    for k in sorted(slot_use):
        if slot_use[k] > scenario.ban_slots:
            add(Violation("ban-slots", (k,), f"ban {k} serves {slot_use[k]} > {scenario.ban_slots} stations"))

    # every open SBS needs exactly one backhaul parent
    for i in dep.open_sbss():
        if i not in plan.sbs_parent:
            add(Violation("sbs-backhaul", (i,), f"open sbs {i} has no backhaul link"))
    # every open MA needs a BAN link
    for j in dep.open_mas():
        if j not in plan.ma_parent:
            add(Violation("ma-backhaul", (j,), f"open ma {j} has no backhaul link"))

    # routing integrity and hop budget for every covered subarea
    max_hops = scenario.max_relays + 1
    loads: dict[int, int] = {i: 0 for i in plan.sbs_parent}
    for subarea, sbs in sorted(plan.sbs_cover.items()):
        try:
            path = root_path(plan, sbs)
        except IntegrityError as exc:
            add(Violation("routing-integrity", (subarea, sbs), str(exc)))
            continue
        hops = len(path) - 1
        if hops > max_hops:
            add(Violation("hop-limit", (subarea, sbs), f"subarea {subarea} routed over {hops} > {max_hops} hops"))
        for kind, idx in path:
            if kind == "sbs":
                loads[idx] = loads.get(idx, 0) + 1

    # per-SBS backhaul load against the capacity-derived subarea limit
    n_sbs = len(dep.sbss)
    for i in sorted(plan.sbs_parent):
        kind, p = plan.sbs_parent[i]
        if not (0 <= i < n_sbs and 0 <= p < (len(dep.bans) if kind == "ban" else n_sbs)):
            continue  # already reported as link-undeployed
        limit = tables.sbs_limit((kind, p), i)
        if loads.get(i, 0) > limit:
            add(Violation("sbs-capacity", (i,), f"sbs {i} carries {loads[i]} subareas > limit {limit}"))

    # machine aggregation limits
    per_ma: dict[int, list[int]] = {}
    for m, j in plan.machine_cover.items():
        per_ma.setdefault(j, []).append(m)
    delta = scenario.radio.compression_ratio
    for j in sorted(per_ma):
        machines = per_ma[j]
        if len(machines) > tables.machine_limit:
            add(Violation("ma-machine-limit", (j,), f"ma {j} covers {len(machines)} > {tables.machine_limit} machines"))
        k = plan.ma_parent.get(j)
        if k is not None and 0 <= k < len(dep.bans) and 0 <= j < len(dep.mas):
            demand = sum(
                scenario.machines[m].rate_bps for m in machines if 0 <= m < scenario.n_machines
            ) * delta
            capacity = tables.ban_ma_capacity[k][j]
            if demand > capacity + 1e-6:
                add(Violation("ma-capacity", (j,), f"ma {j} aggregates {demand:.0f} bps > link capacity {capacity:.0f}"))

    if budget is not None:
        total = cost(solution.deployment, scenario)
        if total > budget + 1e-9:
            add(Violation("budget", (), f"cost {total} exceeds budget {budget}"))
    return v


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def solution_to_dict(solution: Solution, scenario: Scenario, mtc_weight: float) -> dict:
    obj = objectives(solution, scenario, mtc_weight)
    plan = solution.plan
    cover = {str(s): f"ban:{k}" for s, k in plan.ban_cover.items()}
    cover.update({str(s): f"sbs:{i}" for s, i in plan.sbs_cover.items()})
    return {
        "deployment": {
            "bans": solution.deployment.open_bans(),
            "sbss": solution.deployment.open_sbss(),
            "mas": solution.deployment.open_mas(),
        },
        "cover": cover,
        "parents": {str(i): f"{kind}:{p}" for i, (kind, p) in plan.sbs_parent.items()},
        "ma_links": {str(j): k for j, k in plan.ma_parent.items()},
        "machines": {str(m): j for m, j in plan.machine_cover.items()},
        "objectives": {
            "f1": obj.cost,
            "f2": obj.uncovered_subareas,
            "f3": obj.uncovered_machines,
            "fc": obj.weighted_uncovered,
        },
    }


def solution_from_dict(data: dict, scenario: Scenario) -> Solution:
    dep = Deployment.of(
        scenario,
        bans=data["deployment"]["bans"],
        sbss=data["deployment"]["sbss"],
        mas=data["deployment"]["mas"],
    )
    plan = ConnectionPlan()
    for s, ref in data["cover"].items():
        kind, idx = ref.split(":")
        if kind == "ban":
            plan.ban_cover[int(s)] = int(idx)
        else:
            plan.sbs_cover[int(s)] = int(idx)
    for i, ref in data["parents"].items():
        kind, idx = ref.split(":")
        plan.sbs_parent[int(i)] = (kind, int(idx))
    plan.ma_parent = {int(j): int(k) for j, k in data["ma_links"].items()}
    plan.machine_cover = {int(m): int(j) for m, j in data["machines"].items()}
    return Solution(dep, plan)
