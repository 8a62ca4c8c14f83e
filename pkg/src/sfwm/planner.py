"""Splice planning: pick and order segments to maximize spectral factorability.

Given a pool of characterized segments, the planner searches ordered subsets
meeting a total-length constraint and ranks them by the predicted g2 of the
resulting assembly (higher g2 = more factorable pairs = purer heralded
photons).  An exhaustive search provides the ground truth on small pools; a
clustering heuristic scales to larger ones and is validated never to beat
the exhaustive optimum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .correlation import g2_quadrature
from .dispersion import FiberSegment
from .phasematch import PhaseMatchPoint, PumpSpec
from .spectra import AssemblySegment, AssemblySpec, Spectrum1D, build_jsa, marginal


class PlanSpaceError(RuntimeError):
    """Too many feasible ordered subsets for exhaustive search."""


@dataclass(frozen=True)
class SegmentPool:
    """Candidate segments plus the splice-length constraint."""

    candidates: tuple[tuple[FiberSegment, PhaseMatchPoint], ...]
    target_total_length_m: float
    tolerance_m: float | None = None  # default: one shortest-segment length
    max_segments: int | None = None

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("pool must contain at least one candidate")
        if self.target_total_length_m <= 0:
            raise ValueError("target total length must be > 0")
        if self.tolerance_m is not None and self.tolerance_m < 0:
            raise ValueError("tolerance must be >= 0")
        if self.max_segments is not None and self.max_segments < 1:
            raise ValueError("max_segments must be >= 1")

    @property
    def effective_tolerance_m(self) -> float:
        if self.tolerance_m is not None:
            return self.tolerance_m
        return min(seg.length_m for seg, _ in self.candidates)

    @property
    def effective_max_segments(self) -> int:
        return self.max_segments if self.max_segments is not None else len(self.candidates)

    def is_feasible(self, order: tuple[int, ...]) -> bool:
        total = sum(self.candidates[i][0].length_m for i in order)
        return abs(total - self.target_total_length_m) <= self.effective_tolerance_m + 1e-12


@dataclass(frozen=True)
class SplicePlan:
    """An ordered selection with its predicted performance."""

    order: tuple[int, ...]
    labels: tuple[str, ...]
    total_length_m: float
    predicted_g2: float
    predicted_spectrum: Spectrum1D = field(repr=False)

    def __post_init__(self):
        if len(set(self.order)) != len(self.order):
            raise ValueError("plan indices must be distinct")


def _assembly_for(order, pool: SegmentPool) -> AssemblySpec:
    segs = tuple(
        AssemblySegment(pool.candidates[i][0].length_m, pool.candidates[i][1],
                        pool.candidates[i][0])
        for i in order
    )
    return AssemblySpec(segs, "linearized")


def evaluate_plan(order, pool: SegmentPool, pump: PumpSpec,
                  ns: int = 512, ni: int = 512, **grid_kwargs) -> tuple[float, Spectrum1D]:
    """Predicted g2 and signal spectrum of the assembly spliced in this order."""
    order = tuple(order)
    if not order:
        raise ValueError("plan order must not be empty")
    if any(not 0 <= i < len(pool.candidates) for i in order):
        raise ValueError(f"plan indices {order} out of range")
    if len(set(order)) != len(order):
        raise ValueError("plan indices must be distinct")
    jsa = build_jsa(_assembly_for(order, pool), pump, ns=ns, ni=ni, **grid_kwargs)
    return g2_quadrature(jsa), marginal(jsa, "signal")


def _feasible_orders(pool: SegmentPool):
    idx = range(len(pool.candidates))
    for size in range(1, pool.effective_max_segments + 1):
        for combo in itertools.combinations(idx, size):
            if not pool.is_feasible(combo):
                continue
            yield from itertools.permutations(combo)


def _plan_from_order(order, pool, pump, **kwargs) -> SplicePlan:
    g2, spectrum = evaluate_plan(order, pool, pump, **kwargs)
    return SplicePlan(
        order=tuple(order),
        labels=tuple(pool.candidates[i][0].label for i in order),
        total_length_m=sum(pool.candidates[i][0].length_m for i in order),
        predicted_g2=g2,
        predicted_spectrum=spectrum,
    )


def _better(challenger: SplicePlan, incumbent: SplicePlan | None) -> bool:
    if incumbent is None:
        return True
    # Higher g2 wins; ties resolve to the shorter splice, then to the
    # lexicographically smallest index order, for deterministic output.
    key_c = (-challenger.predicted_g2, challenger.total_length_m, challenger.order)
    key_i = (-incumbent.predicted_g2, incumbent.total_length_m, incumbent.order)
    return key_c < key_i


def plan_exhaustive(pool: SegmentPool, pump: PumpSpec, max_plans: int = 100_000,
                    ns: int = 512, ni: int = 512, **grid_kwargs) -> SplicePlan:
    """Global argmax of predicted g2 over all feasible ordered subsets."""
    count = sum(1 for _ in _feasible_orders(pool))
    if count == 0:
        raise ValueError(
            f"no subset of the pool meets total length "
            f"{pool.target_total_length_m} +/- {pool.effective_tolerance_m} m"
        )
    if count > max_plans:
        raise PlanSpaceError(
            f"{count} feasible ordered subsets exceed the cap {max_plans}; "
            "use plan_greedy for pools of this size"
        )
    best: SplicePlan | None = None
    for order in _feasible_orders(pool):
        plan = _plan_from_order(order, pool, pump, ns=ns, ni=ni, **grid_kwargs)
        if _better(plan, best):
            best = plan
    return best


def _greedy_seed(pool: SegmentPool) -> tuple[int, ...] | None:
    """Smallest-spread feasible window in signal-wavelength order."""
    order_by_ls0 = sorted(range(len(pool.candidates)),
                          key=lambda i: (pool.candidates[i][1].lambda_s0_nm, i))
    best_window: tuple[int, ...] | None = None
    best_spread = math.inf
    for size in range(1, pool.effective_max_segments + 1):
        for start in range(len(order_by_ls0) - size + 1):
            window = tuple(order_by_ls0[start:start + size])
            if not pool.is_feasible(window):
                continue
            ls0 = [pool.candidates[i][1].lambda_s0_nm for i in window]
            spread = max(ls0) - min(ls0)
            if spread < best_spread - 1e-15:
                best_spread = spread
                best_window = window
    return best_window


def plan_greedy(pool: SegmentPool, pump: PumpSpec, max_rounds: int = 100,
                ns: int = 512, ni: int = 512, **grid_kwargs) -> SplicePlan:
    """Cluster-then-improve heuristic.

    Seeds with the feasible set of smallest signal-wavelength spread (grown
    along the lambda_s0-sorted order), then applies best-improvement swaps --
    exchanging a member with a non-member, or two positions in the splice
    order -- until no swap raises the predicted g2.
    """
    seed = _greedy_seed(pool)
    if seed is None:
        raise ValueError(
            f"no subset of the pool meets total length "
            f"{pool.target_total_length_m} +/- {pool.effective_tolerance_m} m"
        )
    current = _plan_from_order(seed, pool, pump, ns=ns, ni=ni, **grid_kwargs)
    for _ in range(max_rounds):
        improved = None
        members = set(current.order)
        moves: list[tuple[int, ...]] = []
        for pos in range(len(current.order)):
            for repl in range(len(pool.candidates)):
                if repl in members:
                    continue
                cand = list(current.order)
                cand[pos] = repl
                if pool.is_feasible(tuple(cand)):
                    moves.append(tuple(cand))
        for a in range(len(current.order)):
            for b in range(a + 1, len(current.order)):
                cand = list(current.order)
                cand[a], cand[b] = cand[b], cand[a]
                moves.append(tuple(cand))
        for move in moves:
            plan = _plan_from_order(move, pool, pump, ns=ns, ni=ni, **grid_kwargs)
            if plan.predicted_g2 > current.predicted_g2 + 1e-15 and _better(plan, improved):
                improved = plan
        if improved is None:
            return current
        current = improved
    return current
