"""1/2-MMS allocations for SPLC valuations by LP relaxation and forest rounding.

Pipeline: hand out single copies worth at least half an agent's target while
possible; solve the welfare LP over the residue with the targets as share
rows; push each agent's fractional mass onto a copy prefix; read the capacity
duals as prices; cancel cycles in the price-weighted agent/type graph (each
agent's value is unchanged because all its fractional types share the same
value-per-price ratio); finally root every tree at an agent and give each
type node to its parent agent.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

from fairshare.errors import InvariantError
from fairshare.extensions import mu_uniform
from fairshare.lp import LinearProgram, LpSolution, check_feasibility, solve
from fairshare.model import (
    Allocation,
    FractionalAllocation,
    Instance,
    SplcValuation,
    as_fraction,
)

__all__ = [
    "DualPrices",
    "PipelineTrace",
    "PriceGraph",
    "build_feasibility_lp",
    "build_price_graph",
    "build_welfare_lp",
    "cancel_cycles",
    "consolidate_fractions",
    "extract_duals_and_check_mbb",
    "find_cycle",
    "fractional_from_solution",
    "reprice_to_allocation",
    "round_forest",
    "solve_half_mms",
    "solve_half_mms_given_targets",
]

Edge = tuple[int, int]  # (agent, type)


def _require_splc(instance: Instance) -> None:
    if not instance.is_splc:
        raise TypeError("the SPLC pipeline needs SPLC valuations")


# --- LPs ----------------------------------------------------------------

def _variables(instance: Instance) -> list[tuple[int, int, int]]:
    return [
        (i, j, k)
        for i in range(instance.n)
        for j, kj in enumerate(instance.copies)
        for k in range(kj)
    ]


def _share_lp(instance: Instance, mu: Sequence[Any], objective: bool) -> LinearProgram:
    _require_splc(instance)
    if len(mu) != instance.n:
        raise ValueError(f"expected {instance.n} targets, got {len(mu)}")
    var = _variables(instance)
    vals = [instance.valuations[i].values[j][k] for i, j, k in var]
    lp = LinearProgram(
        vals if objective else [0] * len(var),
        lower=[0] * len(var),
        upper=[1] * len(var),
    )
    for a in range(instance.n):
        lp.add([v if i == a else 0 for (i, _, _), v in zip(var, vals)], ">=", mu[a])
    for t, kt in enumerate(instance.copies):
        lp.add([1 if j == t else 0 for _, j, _ in var], "<=", kt)
    return lp


def build_feasibility_lp(instance: Instance, mu: Sequence[Any]) -> LinearProgram:
    """Share rows ``v_i^L(x_i) >= mu_i``, capacity rows per type, ``0 <= x <= 1``.

    Rows 0..n-1 are the share rows, rows n..n+t-1 the capacity rows.
    """
    return _share_lp(instance, mu, objective=False)


def build_welfare_lp(instance: Instance, mu: Sequence[Any]) -> LinearProgram:
    """Same constraints as :func:`build_feasibility_lp`, maximizing total value."""
    return _share_lp(instance, mu, objective=True)


def fractional_from_solution(instance: Instance, sol: LpSolution) -> FractionalAllocation:
    x = [[[Fraction(0)] * kj for kj in instance.copies] for _ in range(instance.n)]
    for (i, j, k), val in zip(_variables(instance), sol.x):
        x[i][j][k] = val
    return FractionalAllocation(instance.copies, x)


# --- consolidation and duals --------------------------------------------

def consolidate_fractions(x: FractionalAllocation) -> FractionalAllocation:
    """Rewrite every (agent, type) row as ``1, ..., 1, f, 0, ..., 0``.

    Mass moves only toward earlier copies, whose marginals are at least as
    large, so no agent's linear-extension value drops.
    """
    rows = []
    for agent in x.x:
        new_agent = []
        for j, row in enumerate(agent):
            mass = sum(row, Fraction(0))
            full = int(mass)  # floor, mass >= 0
            frac = mass - full
            new_row = [Fraction(1)] * full + [Fraction(0)] * (x.copies[j] - full)
            if frac:
                new_row[full] = frac
            new_agent.append(new_row)
        rows.append(new_agent)
    return FractionalAllocation(x.copies, rows)


def _fractional_copy(row: Sequence[Fraction]) -> tuple[int, Fraction] | None:
    """(index, share) of the single fractional entry of a consolidated row."""
    for k, v in enumerate(row):
        if 0 < v < 1:
            return k, v
    return None


@dataclass(frozen=True)
class DualPrices:
    prices: tuple[Fraction, ...]  # capacity-row duals p_j
    betas: tuple[Fraction, ...]  # minus the share-row duals, >= 0
    ratios: tuple[Fraction | None, ...]  # common value/price ratio per agent


def extract_duals_and_check_mbb(sol: LpSolution, instance: Instance) -> DualPrices:
    """Capacity duals of an optimal welfare LP, after checking the MBB property.

    For every agent, each fractionally held type must have a positive price
    and the same ``value of the fractional copy / price`` ratio, namely
    ``1 / (1 + beta_i)``.
    """
    if not sol.optimal:
        raise InvariantError(f"welfare LP is {sol.status.value}, expected optimal")
    n, t = instance.n, len(instance.copies)
    betas = tuple(-y for y in sol.duals[:n])
    prices = tuple(sol.duals[n : n + t])
    if any(b < 0 for b in betas) or any(p < 0 for p in prices):
        raise InvariantError("dual signs violate the LP sign conventions")
    # complementary slackness on every strictly fractional variable
    for (i, j, k), xv, d in zip(_variables(instance), sol.x, sol.reduced_costs):
        if 0 < xv < 1 and d != 0:
            raise InvariantError(f"x[{i}][{j}][{k}] is fractional with reduced cost {d}")
    xc = consolidate_fractions(fractional_from_solution(instance, sol))
    ratios = []
    for i in range(n):
        ratio = None
        for j in range(t):
            hit = _fractional_copy(xc.x[i][j])
            if hit is None:
                continue
            if prices[j] <= 0:
                raise InvariantError(f"type {j} is fractionally held but priced {prices[j]}")
            r = instance.valuations[i].values[j][hit[0]] / prices[j]
            if ratio is None:
                ratio = r
            elif r != ratio:
                raise InvariantError(f"agent {i}: value/price ratios {ratio} and {r} differ")
        if ratio is not None and ratio * (1 + betas[i]) != 1:
            raise InvariantError(f"agent {i}: ratio {ratio} != 1/(1+beta)")
        ratios.append(ratio)
    return DualPrices(prices, betas, tuple(ratios))


# --- price graph ---------------------------------------------------------

@dataclass(frozen=True)
class PriceGraph:
    """Bipartite agent/type graph of fractional holdings weighted by ``x_ij * p_j``.

    ``saturated`` lists edges whose share reached a whole copy during cycle
    cancellation; they left the graph but still count toward node sums.
    """

    n_agents: int
    n_types: int
    prices: tuple[Fraction, ...]
    weights: Mapping[Edge, Fraction]
    saturated: frozenset[Edge] = frozenset()

    def __post_init__(self):
        w = {e: as_fraction(v) for e, v in sorted(self.weights.items()) if v != 0}
        if any(v < 0 for v in w.values()):
            raise ValueError("edge weights must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "saturated", frozenset(self.saturated))

    def node_sums(self) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
        agents = [Fraction(0)] * self.n_agents
        types = [Fraction(0)] * self.n_types
        for (i, j), w in self.weights.items():
            agents[i] += w
            types[j] += w
        for i, j in self.saturated:
            agents[i] += self.prices[j]
            types[j] += self.prices[j]
        return tuple(agents), tuple(types)

    def to_dict(self) -> dict:
        return {
            "prices": [str(p) for p in self.prices],
            "edges": [[i, j, str(w)] for (i, j), w in self.weights.items()],
            "saturated": sorted([i, j] for i, j in self.saturated),
        }


def build_price_graph(x: FractionalAllocation, prices: Sequence[Fraction]) -> PriceGraph:
    weights = {}
    for i, agent in enumerate(x.x):
        for j, row in enumerate(agent):
            hit = _fractional_copy(row)
            if hit is not None and prices[j] > 0:
                weights[(i, j)] = hit[1] * prices[j]
    return PriceGraph(x.n, len(x.copies), tuple(prices), weights)


def find_cycle(edges: Sequence[Edge]) -> list[Edge] | None:
    """Some cycle of the bipartite graph as a closed walk of edges, or None.

    Deterministic: nodes and neighbours are visited in sorted order.
    """
    adj: dict[tuple[str, int], list[tuple[str, int]]] = {}
    for i, j in sorted(edges):
        adj.setdefault(("a", i), []).append(("g", j))
        adj.setdefault(("g", j), []).append(("a", i))
    for nbrs in adj.values():
        nbrs.sort()
    seen: set = set()
    for start in sorted(adj):
        if start in seen:
            continue
        parent = {start: None}
        stack = [(start, iter(adj[start]))]
        seen.add(start)
        on_path = [start]
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                on_path.pop()
                continue
            if nxt == parent[node]:
                continue
            if nxt in parent:
                # back edge closes a cycle along the current DFS path
                idx = on_path.index(nxt)
                cyc = on_path[idx:] + [nxt]
                out = []
                for u, w in zip(cyc, cyc[1:]):
                    a, g = (u, w) if u[0] == "a" else (w, u)
                    out.append((a[1], g[1]))
                return out
            parent[nxt] = node
            seen.add(nxt)
            on_path.append(nxt)
            stack.append((nxt, iter(adj[nxt])))
    return None


@dataclass(frozen=True)
class Cancellation:
    cycle: tuple[Edge, ...]
    delta: Fraction
    removed: tuple[Edge, ...]
    saturated: tuple[Edge, ...]


def cancel_cycles(g: PriceGraph, log: list | None = None) -> PriceGraph:
    """Remove all cycles while keeping every node's incident weight.

    Around a cycle, edges alternately lose and gain ``delta``; the minimum
    weight edge (ties by (agent, type)) sits on the losing side. ``delta`` is
    capped so no gaining edge exceeds its price, i.e. a whole copy; an edge
    that hits zero or a whole copy leaves the graph, so each step shrinks it.
    """
    weights = dict(g.weights)
    saturated = set(g.saturated)
    while True:
        cycle = find_cycle(list(weights))
        if cycle is None:
            break
        m0 = min(range(len(cycle)), key=lambda k: (weights[cycle[k]], cycle[k]))
        minus = [e for k, e in enumerate(cycle) if k % 2 == m0 % 2]
        plus = [e for k, e in enumerate(cycle) if k % 2 != m0 % 2]
        delta = min(
            min(weights[e] for e in minus),
            min(g.prices[e[1]] - weights[e] for e in plus),
        )
        for e in minus:
            weights[e] -= delta
        for e in plus:
            weights[e] += delta
        removed = tuple(e for e in minus if weights[e] == 0)
        full = tuple(e for e in plus if weights[e] == g.prices[e[1]])
        for e in removed + full:
            del weights[e]
        saturated.update(full)
        if log is not None:
            log.append(Cancellation(tuple(cycle), delta, removed, full))
    return PriceGraph(g.n_agents, g.n_types, g.prices, weights, frozenset(saturated))


def reprice_to_allocation(g: PriceGraph, x: FractionalAllocation) -> FractionalAllocation:
    """Turn edge weights back into shares ``w_ij / p_j`` on top of x's whole copies."""
    rows = []
    for i, agent in enumerate(x.x):
        new_agent = []
        for j, row in enumerate(agent):
            full = sum(1 for v in row if v == 1)
            frac = Fraction(0)
            if (i, j) in g.saturated:
                full += 1
            elif (i, j) in g.weights:
                if g.prices[j] <= 0:
                    raise InvariantError(f"type {j} has a weighted edge but price {g.prices[j]}")
                frac = g.weights[(i, j)] / g.prices[j]
            new_row = [Fraction(1)] * full + [Fraction(0)] * (len(row) - full)
            if frac:
                new_row[full] = frac
            new_agent.append(new_row)
        rows.append(new_agent)
    return FractionalAllocation(x.copies, rows)


# --- rounding -----------------------------------------------------------

@dataclass(frozen=True)
class Rounding:
    allocation: Allocation
    roots: tuple[int, ...]
    granted: tuple[Edge, ...]  # (parent agent, type) receiving a whole extra copy
    lost: tuple[Edge, ...]  # (child agent, type) whose share is dropped


def round_forest(x: FractionalAllocation, instance: Instance) -> Rounding:
    """Root each tree of the fractional graph at its lowest agent and give every
    type node to its parent agent.

    Each agent loses at most the share on the edge to its own parent type.
    """
    n, t = x.n, len(x.copies)
    counts = [[sum(1 for v in row if v == 1) for row in agent] for agent in x.x]
    edges = []
    for i in range(n):
        for j in range(t):
            row = x.x[i][j]
            if sum(1 for v in row if 0 < v < 1) > 1:
                raise ValueError(f"agent {i}, type {j}: fractions not consolidated")
            if any(0 < v < 1 for v in row):
                edges.append((i, j))
    # forest check via union-find
    parent = {}

    def find(u):
        while parent.setdefault(u, u) != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    for i, j in edges:
        a, b = find(("a", i)), find(("g", j))
        if a == b:
            raise ValueError("fractional allocation graph has a cycle")
        parent[a] = b

    adj: dict[tuple[str, int], list[tuple[str, int]]] = {}
    for i, j in edges:
        adj.setdefault(("a", i), []).append(("g", j))
        adj.setdefault(("g", j), []).append(("a", i))
    visited: set = set()
    roots, granted, lost = [], [], []
    for i in range(n):
        root = ("a", i)
        if root not in adj or root in visited:
            continue
        roots.append(i)
        visited.add(root)
        queue = deque([root])
        while queue:
            node = queue.popleft()
            for nxt in sorted(adj[node]):
                if nxt in visited:
                    continue
                visited.add(nxt)
                queue.append(nxt)
                if node[0] == "a":
                    counts[node[1]][nxt[1]] += 1
                    granted.append((node[1], nxt[1]))
                else:
                    lost.append((nxt[1], node[1]))
    for j, kj in enumerate(x.copies):
        if sum(c[j] for c in counts) > kj:
            raise InvariantError(f"rounding over-allocated type {j}")
    alloc = Allocation(tuple(tuple(c) for c in counts), counts=True)
    return Rounding(alloc, tuple(roots), tuple(granted), tuple(lost))


# --- full pipeline --------------------------------------------------------

@dataclass(frozen=True)
class Retirement:
    agent: int
    type: int | None  # None: retired with an empty bundle (zero target)
    value: Fraction
    target: Fraction


@dataclass
class PipelineTrace:
    status: str = "ok"
    initial_targets: tuple[Fraction, ...] = ()
    retirements: list[Retirement] = field(default_factory=list)
    residue_agents: tuple[int, ...] = ()
    residue_types: tuple[int, ...] = ()  # original index of each residue type
    residue: Instance | None = None
    residue_targets: tuple[Fraction, ...] = ()
    feasible: bool | None = None
    lp_solution: LpSolution | None = None
    x_lp: FractionalAllocation | None = None
    x_consolidated: FractionalAllocation | None = None
    duals: DualPrices | None = None
    graph_before: PriceGraph | None = None
    graph_after: PriceGraph | None = None
    cancellations: list[Cancellation] = field(default_factory=list)
    x_repriced: FractionalAllocation | None = None
    rounding: Rounding | None = None
    allocation: Allocation | None = None

    def to_dict(self) -> dict:
        def frac_alloc(x):
            if x is None:
                return None
            return [[[str(v) for v in row] for row in agent] for agent in x.x]

        return {
            "status": self.status,
            "initial_targets": [str(v) for v in self.initial_targets],
            "retirements": [
                {"agent": r.agent, "type": r.type, "value": str(r.value), "target": str(r.target)}
                for r in self.retirements
            ],
            "residue_agents": list(self.residue_agents),
            "residue_types": list(self.residue_types),
            "residue_targets": [str(v) for v in self.residue_targets],
            "feasible": self.feasible,
            "lp_objective": None
            if self.lp_solution is None or self.lp_solution.objective is None
            else str(self.lp_solution.objective),
            "x_lp": frac_alloc(self.x_lp),
            "x_consolidated": frac_alloc(self.x_consolidated),
            "prices": None if self.duals is None else [str(p) for p in self.duals.prices],
            "betas": None if self.duals is None else [str(b) for b in self.duals.betas],
            "graph_before": None if self.graph_before is None else self.graph_before.to_dict(),
            "graph_after": None if self.graph_after is None else self.graph_after.to_dict(),
            "cancellations": [
                {
                    "cycle": [list(e) for e in c.cycle],
                    "delta": str(c.delta),
                    "removed": [list(e) for e in c.removed],
                    "saturated": [list(e) for e in c.saturated],
                }
                for c in self.cancellations
            ],
            "x_repriced": frac_alloc(self.x_repriced),
            "roots": None if self.rounding is None else list(self.rounding.roots),
            "lost": None if self.rounding is None else [list(e) for e in self.rounding.lost],
            "allocation": None if self.allocation is None else [list(b) for b in self.allocation.bundles],
        }


def _residue_targets(instance, active, copies):
    n = len(active)
    return {i: mu_uniform(instance.valuations[i].with_copies(copies), n) for i in active}


def _pipeline(instance: Instance, targets: Sequence[Any] | None, recompute: bool):
    _require_splc(instance)
    if not instance.is_symmetric:
        raise ValueError("the 1/2-MMS pipeline needs symmetric entitlements")
    n, t = instance.n, len(instance.copies)
    vals = instance.valuations
    trace = PipelineTrace()
    active = list(range(n))
    copies = list(instance.copies)
    bundles = [[0] * t for _ in range(n)]

    if targets is None:
        mu = _residue_targets(instance, active, copies)
    else:
        if len(targets) != n:
            raise ValueError(f"expected {n} targets, got {len(targets)}")
        mu = {i: as_fraction(targets[i]) for i in range(n)}
    trace.initial_targets = tuple(mu[i] for i in range(n))

    while active:
        # with recomputed targets a zero target means nothing left is worth
        # anything to the agent, so it leaves and stops diluting the others;
        # fixed zero targets just ride along into the LP
        zero = next((i for i in active if mu[i] <= 0), None) if recompute else None
        if zero is not None:
            trace.retirements.append(Retirement(zero, None, Fraction(0), mu[zero]))
            active.remove(zero)
        else:
            pick = next(
                (
                    (i, j)
                    for i in active
                    if mu[i] > 0
                    for j in range(t)
                    if copies[j] > 0 and vals[i].values[j][0] >= mu[i] / 2
                ),
                None,
            )
            if pick is None:
                break
            i, j = pick
            bundles[i][j] += 1
            copies[j] -= 1
            active.remove(i)
            trace.retirements.append(Retirement(i, j, vals[i].values[j][0], mu[i]))
        if recompute and active:
            mu.update(_residue_targets(instance, active, copies))

    if active:
        keep = [
            j
            for j in range(t)
            if copies[j] > 0 and any(vals[i].values[j][0] > 0 for i in active)
        ]
        residue = Instance.symmetric(
            [
                SplcValuation(
                    tuple(copies[j] for j in keep),
                    tuple(vals[i].values[j][: copies[j]] for j in keep),
                )
                for i in active
            ]
        )
        res_mu = tuple(mu[i] for i in active)
        trace.residue_agents = tuple(active)
        trace.residue_types = tuple(keep)
        trace.residue = residue
        trace.residue_targets = res_mu

        trace.feasible = check_feasibility(build_feasibility_lp(residue, res_mu))
        if not trace.feasible:
            trace.status = "infeasible"
            return None, trace
        sol = solve(build_welfare_lp(residue, res_mu))
        if not sol.optimal:
            raise InvariantError(f"welfare LP {sol.status.value} although feasibility LP is feasible")
        trace.lp_solution = sol
        trace.x_lp = fractional_from_solution(residue, sol)
        trace.x_consolidated = xc = consolidate_fractions(trace.x_lp)
        trace.duals = extract_duals_and_check_mbb(sol, residue)
        trace.graph_before = build_price_graph(xc, trace.duals.prices)
        trace.graph_after = cancel_cycles(trace.graph_before, trace.cancellations)
        if trace.graph_after.node_sums() != trace.graph_before.node_sums():
            raise InvariantError("cycle cancellation changed a node's incident weight")
        trace.x_repriced = xr = reprice_to_allocation(trace.graph_after, xc)
        trace.rounding = round_forest(xr, residue)
        for r, i in enumerate(active):
            v = residue.valuations[r]
            before = xc.agent_value(r, v)
            if xr.agent_value(r, v) != before:
                raise InvariantError(f"agent {i}: repricing changed the fractional value")
            if before < res_mu[r]:
                raise InvariantError(f"agent {i}: LP value below its target")
            got = v.value_counts(trace.rounding.allocation.bundles[r])
            biggest = max((row[0] for row in v.values), default=Fraction(0))
            if got < before - biggest:
                raise InvariantError(f"agent {i}: rounding lost more than one copy's value")
            for jr, j in enumerate(keep):
                bundles[i][j] += trace.rounding.allocation.bundles[r][jr]

    allocation = Allocation(tuple(tuple(b) for b in bundles), counts=True)
    instance.validate_allocation(allocation)
    for i in range(n):
        if instance.bundle_value(i, allocation.bundles[i]) * 2 < mu[i]:
            raise InvariantError(f"agent {i} ends below half of its target {mu[i]}")
    trace.allocation = allocation
    return allocation, trace


def solve_half_mms(instance: Instance) -> tuple[Allocation, PipelineTrace]:
    """1/2-MMS allocation for a symmetric SPLC instance, plus a diagnostic trace.

    Targets start at the uniform concave-closure bound and are recomputed on
    the reduced instance after every single-copy assignment.
    """
    allocation, trace = _pipeline(instance, None, recompute=True)
    if allocation is None:
        raise InvariantError("share LP infeasible for the uniform concave-closure targets")
    return allocation, trace


def solve_half_mms_given_targets(
    instance: Instance, targets: Sequence[Any], recompute: bool = False
) -> tuple[Allocation | None, PipelineTrace]:
    """Run the pipeline against caller-chosen targets (e.g. exact MMS values).

    Targets stay fixed through the single-copy phase unless ``recompute`` is
    set, in which case they are replaced by the uniform bound of each reduced
    instance exactly as :func:`solve_half_mms` does. An infeasible share LP is
    reported as ``trace.status == "infeasible"`` with no allocation.
    """
    return _pipeline(instance, targets, recompute=recompute)
