"""Capped-marginal greedy for 1/3-APS with submodular valuations, and the β search.

Each agent's valuation is rescaled so its guess ``beta_i`` maps to ``n*b_i``
and truncated there. Goods then go one per round to the pair maximizing the
marginal capped at ``(2/3) n b_i``; an agent leaves once its rescaled bundle
reaches ``n b_i / 3``. If some agent with ``beta_i <= APS_i`` existed that
ended short, the capped bids it saw would have to sum to both at most
``(2/3) n (1 - b_i)`` and more than ``(2/3) n``, so a short agent certifies
``beta_i > APS_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

from fairshare.errors import InvariantError
from fairshare.model import Allocation, Instance, SetValuation, as_fraction

__all__ = [
    "ApsSearch",
    "FailingAgent",
    "GreedyRound",
    "GreedyState",
    "greedy_internal_audit",
    "greedy_round",
    "greedy_uncapped_variant",
    "solve_third_aps",
    "third_aps_search",
]

TWO_THIRDS = Fraction(2, 3)


@dataclass(frozen=True)
class FailingAgent:
    """Certificate that ``beta > APS`` for this agent."""

    agent: int
    value: Fraction
    beta: Fraction


@dataclass(frozen=True)
class GreedyRound:
    t: int
    winner: int
    good: int
    rho: Fraction  # winning score
    seen: dict[int, Fraction]  # capped marginal of `good` for every active agent

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "winner": self.winner,
            "good": self.good,
            "rho": str(self.rho),
            "seen": {str(i): str(v) for i, v in self.seen.items()},
        }


@dataclass
class GreedyState:
    instance: Instance
    betas: tuple[Fraction, ...]
    capped: bool = True
    bundles: list[list[int]] = field(default_factory=list)
    active: list[int] = field(default_factory=list)
    remaining: list[int] = field(default_factory=list)
    retired_zero: tuple[int, ...] = ()
    log: list[GreedyRound] = field(default_factory=list)

    def scale(self, i: int) -> Fraction:
        return self.instance.n * self.instance.entitlements[i]

    def cap(self, i: int) -> Fraction:
        return TWO_THIRDS * self.scale(i)

    def vhat(self, i: int, goods) -> Fraction:
        """``min(n b_i, (n b_i / beta_i) v_i(S))``."""
        nb = self.scale(i)
        return min(nb, nb / self.betas[i] * self.instance.valuations[i].value(goods))

    def to_dict(self) -> dict:
        return {
            "capped": self.capped,
            "betas": [str(b) for b in self.betas],
            "bundles": [sorted(b) for b in self.bundles],
            "active_at_end": list(self.active),
            "unallocated": list(self.remaining),
            "rounds": [r.to_dict() for r in self.log],
        }


def _order(order: Sequence[int] | None, size: int, what: str) -> dict[int, int]:
    if order is None:
        return {k: k for k in range(size)}
    if sorted(order) != list(range(size)):
        raise ValueError(f"{what} order must be a permutation of 0..{size - 1}")
    return {k: r for r, k in enumerate(order)}


def _greedy(instance, betas, capped, agent_order, good_order):
    n, m = instance.n, instance.m
    betas = tuple(as_fraction(b) for b in betas)
    if len(betas) != n:
        raise ValueError(f"expected {n} guesses, got {len(betas)}")
    if any(b < 0 for b in betas):
        raise ValueError("guesses must be nonnegative")
    arank = _order(agent_order, n, "agent")
    grank = _order(good_order, m, "good")
    state = GreedyState(
        instance,
        betas,
        capped,
        bundles=[[] for _ in range(n)],
        active=sorted((i for i in range(n) if betas[i] > 0), key=arank.__getitem__),
        remaining=sorted(range(m), key=grank.__getitem__),
        retired_zero=tuple(i for i in range(n) if betas[i] == 0),
    )
    held = {i: frozenset() for i in range(n)}
    base = {i: Fraction(0) for i in state.active}  # v_hat of the current bundle
    t = 0
    while state.active and state.remaining:
        t += 1
        best = None
        scores: dict[tuple[int, int], Fraction] = {}
        for i in state.active:
            cap = state.cap(i)
            for g in state.remaining:
                marg = state.vhat(i, held[i] | {g}) - base[i]
                score = min(cap, marg) if capped else marg
                scores[(i, g)] = score
                # iteration order already follows the tie-break priorities
                if best is None or score > best[0]:
                    best = (score, i, g)
        rho, winner, good = best
        seen = {
            i: min(state.cap(i), scores[(i, good)]) if capped else scores[(i, good)]
            for i in state.active
        }
        state.log.append(GreedyRound(t, winner, good, rho, seen))
        state.bundles[winner].append(good)
        held[winner] = held[winner] | {good}
        state.remaining.remove(good)
        base[winner] = state.vhat(winner, held[winner])
        if base[winner] * 3 >= state.scale(winner):
            state.active.remove(winner)

    if instance.is_splc:
        alloc = instance.allocation_from_sets(state.bundles)
    else:
        alloc = Allocation(tuple(tuple(sorted(b)) for b in state.bundles))
    for i in range(n):
        got = instance.valuations[i].value(state.bundles[i])
        if got * 3 < betas[i]:
            return FailingAgent(i, got, betas[i]), state
    return alloc, state


def greedy_round(
    instance: Instance,
    beta: Sequence[Any],
    agent_order: Sequence[int] | None = None,
    good_order: Sequence[int] | None = None,
) -> tuple[Allocation | FailingAgent, GreedyState]:
    """One pass of the capped greedy for guesses ``beta``.

    Returns an allocation where every agent has ``v_i(A_i) >= beta_i / 3``, or
    the lowest-index agent that ended short (then ``beta_i > APS_i``), along
    with the full state for auditing. Agents with ``beta_i == 0`` never bid.
    Ties go to the earliest agent, then the earliest good, in the given orders
    (default: index order). SPLC instances are handled copy by copy and
    return per-type counts.
    """
    return _greedy(instance, beta, True, agent_order, good_order)


def greedy_uncapped_variant(
    instance: Instance,
    beta: Sequence[Any],
    agent_order: Sequence[int] | None = None,
    good_order: Sequence[int] | None = None,
) -> tuple[Allocation | FailingAgent, GreedyState]:
    """Same as :func:`greedy_round` but scores goods by the raw marginal.

    Diagnostic only: without the cap a single large good can satisfy an agent
    far beyond its threshold, and no guarantee holds. An agent stops at
    ``beta_i / 3``, so pass ``beta = 3 * threshold`` to stop at a value.
    """
    return _greedy(instance, beta, False, agent_order, good_order)


def greedy_internal_audit(state: GreedyState, aps: Sequence[Any] | None = None) -> dict:
    """Re-check the bookkeeping facts the guarantee rests on; raise on any breach.

    With exact ``aps`` values, also check that no agent with ``beta <= APS``
    ended below its threshold.
    """
    if not state.capped:
        raise ValueError("audits apply to the capped greedy only")
    inst = state.instance
    n = inst.n
    rho_of = {r.good: r.rho for r in state.log}
    for r in state.log:
        for i, mu in r.seen.items():
            if mu > r.rho:
                raise InvariantError(f"round {r.t}: agent {i} saw {mu} above winning bid {r.rho}")
    sums = []
    for i in range(n):
        b = inst.entitlements[i]
        won = sum((rho_of[g] for g in state.bundles[i]), Fraction(0))
        sums.append(won)
        if won > TWO_THIRDS * n * b:
            raise InvariantError(f"agent {i}: won bids {won} exceed (2/3) n b")
        if len(state.bundles[i]) > 1 and state.vhat(i, state.bundles[i]) != won:
            raise InvariantError(f"agent {i}: bundle value differs from its won bids")
    outside = {}
    if not state.remaining:
        for i in state.active:
            mine = set(state.bundles[i])
            total = sum((r.seen[i] for r in state.log if r.good not in mine), Fraction(0))
            outside[i] = total
            bound = TWO_THIRDS * n * (1 - inst.entitlements[i])
            if total > bound:
                raise InvariantError(f"agent {i}: outside marginals {total} exceed {bound}")
    if aps is not None:
        for i in range(n):
            beta = state.betas[i]
            if 0 < beta <= as_fraction(aps[i]):
                if state.vhat(i, state.bundles[i]) * 3 < state.scale(i):
                    raise InvariantError(
                        f"agent {i}: beta {beta} <= APS {aps[i]} yet it ended short"
                    )
    return {
        "rounds": len(state.log),
        "won_bids": [str(s) for s in sums],
        "outside_marginals": {str(i): str(v) for i, v in outside.items()},
    }


def _min_positive_singleton(v: SetValuation) -> Fraction | None:
    vals = [x for x in v.singleton_values() if x > 0]
    return min(vals) if vals else None


@dataclass
class ApsSearch:
    allocation: Allocation
    betas: tuple[Fraction, ...]
    runs: int
    reductions: tuple[int, ...]
    failures: list[FailingAgent] = field(default_factory=list)
    states: list[GreedyState] = field(default_factory=list)


def third_aps_search(
    instance: Instance, epsilon: Any, keep_states: bool = False
) -> ApsSearch:
    """Lower each agent's guess from ``v_i(M)`` until the greedy succeeds.

    A failing agent's guess is divided by ``1 + epsilon``. Once it would drop
    below the agent's smallest positive singleton value it is set to that
    value, and after a further failure to 0. A positive APS is never below
    that singleton value, so the final guesses stay within ``1 + epsilon``
    of APS and the result is a ``1/(3(1+epsilon))``-APS allocation.
    """
    eps = as_fraction(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    n = instance.n
    betas = [v.total() for v in instance.valuations]
    floors = [_min_positive_singleton(v) for v in instance.valuations]
    reductions = [0] * n
    states = []
    failures = []
    runs = 0
    while True:
        runs += 1
        result, state = greedy_round(instance, betas)
        if keep_states:
            states.append(state)
        if isinstance(result, Allocation):
            return ApsSearch(result, tuple(betas), runs, tuple(reductions), failures, states)
        failures.append(result)
        i = result.agent
        reductions[i] += 1
        lower = betas[i] / (1 + eps)
        floor = floors[i]
        if floor is not None and lower >= floor:
            betas[i] = lower
        elif floor is not None and betas[i] > floor:
            betas[i] = floor
        else:
            betas[i] = Fraction(0)


def solve_third_aps(instance: Instance, epsilon: Any) -> Allocation:
    """An allocation giving every agent at least ``APS_i / (3 (1 + epsilon))``."""
    return third_aps_search(instance, epsilon).allocation
