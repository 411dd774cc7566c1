#!/usr/bin/env python3

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from models.canonical import CanonicalInstance, PrivateAssignment
from models.instance import Allocation
from models.layered import InfeasibilityCertificate, LPModel
from models.paths import IterationState, vertices_of
from tools.flow_network import (
    allocation_from_paths,
    assign_private_items,
    good_assignment_problems,
    restore_terminal_minimality,
)
from tools.maxflow import merge_Q
from tools.rerouting import cleanup_bad_agents, reroute, state_problems
from tools.rounding import almost_feasible, default_alpha
from tools.verify import quota_problems
from utils.errors import InvariantViolation, PreconditionError
from utils.logger import LogLevel, Logger


@dataclass
class SolveResult:
    allocation: Optional[Allocation]
    certificate: Optional[InfeasibilityCertificate]
    h: int
    alpha: Fraction
    trace: List[Dict[str, Any]] = field(default_factory=list)
    # quota denominator the final allocation meets
    final_alpha: Optional[Fraction] = None

    @property
    def feasible(self) -> bool:
        return self.allocation is not None


def layers_for(epsilon: Fraction) -> int:
    """ceil(8/epsilon)"""
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise PreconditionError("epsilon must be positive unless the layer count is given")
    return math.ceil(8 / epsilon)


def initial_state(ci: CanonicalInstance, pa: PrivateAssignment) -> IterationState:
    return IterationState(1, frozenset(), frozenset(pa.T), dict(pa.P), [], Fraction(0))


def run_iteration(
    ci: CanonicalInstance,
    state: IterationState,
    h: int,
    alpha: Fraction,
    seed: int,
    retry_cap: int = 32,
    guard: int = 2_000_000,
    tol: float = 1e-9,
    logging: Optional[Logger] = None,
    on_model: Optional[Callable[[LPModel], None]] = None,
) -> Union[Tuple[IterationState, Dict[str, Any]], InfeasibilityCertificate]:
    """One round of terminal shrinking.

    Drops the satisfied light agents, finds almost-feasible paths for the
    rest, merges their light paths with the earlier ones, reroutes the
    terminal paths around the merged ones and cleans up bad light agents.

    Args:
        ci (CanonicalInstance): the full instance
        state (IterationState): input of this iteration
        h (int): number of layers
        alpha (Fraction): quota denominator of the almost-feasible paths
        seed (int): seed of the random draws
        retry_cap (int): seeds the rounding may try
        guard (int): LP size guard
        tol (float): LP tolerance
        logging (Optional[Logger]): progress sink
        on_model (Optional[Callable[[LPModel], None]]): sees the LP of the iteration

    Returns:
        Union[Tuple[IterationState, Dict[str, Any]], InfeasibilityCertificate]: the next
        input with a trace record, or the certificate that the LP has no point
    """
    logging = logging or Logger.quiet()
    current = ci.without_agents(state.satisfied)
    pa = PrivateAssignment(dict(state.P), frozenset(state.terminals))
    problems = good_assignment_problems(current, pa)
    if problems:
        raise PreconditionError(f"iteration {state.j} input is not good: {problems[0]}")

    af = almost_feasible(
        current, pa, h, seed, alpha, retry_cap, guard, tol, logging, on_model
    )
    if isinstance(af, InfeasibilityCertificate):
        af.iteration = state.j
        logging.log(LogLevel.Info, f"iteration {state.j}: layered LP infeasible")
        return af

    q_star, vacuous = merge_Q(
        ci, state.P, af.p1, af.p2, state.Q, state.satisfied, alpha, state.alpha_j, logging
    )
    rr = reroute(ci, af.p1, q_star)
    nxt, report = cleanup_bad_agents(ci, state, rr.p1, rr.q2, alpha, logging)

    remaining = ci.without_agents(nxt.satisfied)
    avoid = frozenset(vertices_of(nxt.Q))
    pa_next = restore_terminal_minimality(
        remaining, PrivateAssignment(nxt.P, nxt.terminals), avoid, logging
    )
    nxt = IterationState(
        nxt.j, nxt.satisfied, pa_next.T, dict(pa_next.P), nxt.Q, nxt.alpha_j
    )
    problems = state_problems(ci, nxt)
    if problems:
        raise InvariantViolation(f"iteration {state.j} output is invalid: {problems[0]}")

    record = {
        "iteration": state.j,
        "terminals": len(state.terminals),
        "satisfied": len(state.satisfied),
        "lp": "feasible",
        "terminal_paths": len(af.p1),
        "light_paths": len(af.p2),
        "merged_paths": len(q_star),
        "displaced": len(rr.responsibility),
        "bad_agents": len(report.bad),
        "congestion": af.congestion,
        "seed": af.seed_used,
        "zero_quota": len(vacuous),
        "next_terminals": len(nxt.terminals),
    }
    logging.log(
        LogLevel.Info,
        f"iteration {state.j}: {len(state.terminals)} -> {len(nxt.terminals)} terminals, "
        f"{len(nxt.satisfied)} satisfied light agents",
    )
    return nxt, record


def _check_progress(
    ci: CanonicalInstance, h: int, alpha: Fraction, before: int, after: int, j: int
) -> None:
    if before == 0:
        return
    if after >= before:
        raise InvariantViolation(f"iteration {j} did not shrink the terminals ({before} -> {after})")
    n_eps = float(len(ci.agents)) ** float(ci.epsilon)
    if n_eps >= 16 * h * h * float(alpha):
        bound = 32 * h * h * float(alpha) / n_eps * before
        if after > bound:
            raise InvariantViolation(f"iteration {j} left {after} terminals, bound is {bound:.3g}")


def solve(
    ci: CanonicalInstance,
    pa: Optional[PrivateAssignment] = None,
    epsilon: Optional[Fraction] = None,
    seed: int = 0,
    layers: Optional[int] = None,
    alpha: Optional[Fraction] = None,
    retry_cap: int = 32,
    guard: int = 2_000_000,
    tol: float = 1e-9,
    logging: Optional[Logger] = None,
    on_model: Optional[Callable[[LPModel], None]] = None,
) -> SolveResult:
    """Iterates until no terminal is left, or reports that M is too high.

    Thresholds are used as given; the command line scales them by h+1
    for plain instances before calling this.

    Args:
        ci (CanonicalInstance): the instance
        pa (Optional[PrivateAssignment]): private items, a maximum matching when omitted
        epsilon (Optional[Fraction]): ci.epsilon when omitted
        seed (int): first seed; iteration j uses seed + 1000 (j - 1)
        layers (Optional[int]): h, ceil(8/epsilon) when omitted
        alpha (Optional[Fraction]): at least 2; 2 h^4 ceil(log2 n) when omitted
        retry_cap (int): seeds the rounding may try per iteration
        guard (int): LP size guard
        tol (float): LP tolerance
        logging (Optional[Logger]): progress sink
        on_model (Optional[Callable[[LPModel], None]]): sees the LP of every iteration

    Returns:
        SolveResult: an allocation meeting the final quotas, or the certificate
    """
    logging = logging or Logger.quiet()
    epsilon = Fraction(ci.epsilon if epsilon is None else epsilon)
    h = layers if layers is not None else layers_for(epsilon)
    if h < 1:
        raise PreconditionError("the number of layers must be at least 1")
    alpha = Fraction(alpha) if alpha is not None else default_alpha(h, len(ci.agents))
    if alpha < 2:
        raise PreconditionError(f"alpha must be at least 2, got {alpha}")
    pa = pa or assign_private_items(ci)
    pa = restore_terminal_minimality(ci, pa, logging=logging)
    state = initial_state(ci, pa)
    result = SolveResult(None, None, h, alpha)
    logging.log(LogLevel.Info, f"solve: h={h}, alpha={alpha}, {len(state.terminals)} terminals")

    while state.terminals:
        if state.j > h:
            logging.log(LogLevel.Warn, f"{len(state.terminals)} terminals left after {h} iterations")
        seed_j = seed + 1000 * (state.j - 1)
        out = run_iteration(
            ci, state, h, alpha, seed_j, retry_cap, guard, tol, logging, on_model
        )
        if isinstance(out, InfeasibilityCertificate):
            result.certificate = out
            result.trace.append(
                {"iteration": state.j, "terminals": len(state.terminals), "lp": "infeasible"}
            )
            return result
        nxt, record = out
        result.trace.append(record)
        _check_progress(ci, h, alpha, len(state.terminals), len(nxt.terminals), state.j)
        state = nxt

    alloc = allocation_from_paths(state.P, state.Q)
    final_alpha = state.alpha_j if state.alpha_j > 0 else alpha
    problems = quota_problems(ci, alloc, final_alpha)
    if problems:
        raise InvariantViolation(f"final allocation fails its quotas: {problems[0]}")
    result.allocation = alloc
    result.final_alpha = final_alpha
    return result
