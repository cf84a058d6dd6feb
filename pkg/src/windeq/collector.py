"""Radial collector-feeder model and fixed-point terminal-voltage solvers.

A wind farm collector network is a set of radial feeder chains hanging off
the point of common coupling (PCC).  Given a PCC sequence voltage, the
per-turbine terminal voltages solve a fixed point

    U = U_pcc + C Z C^T I(U)

where C is the node-branch incidence (path) matrix of a feeder, Z the
diagonal branch impedance matrix and I(U) the turbine current injections.
The product C Z C^T is realised implicitly as a backward/forward sweep,
which is numerically identical and avoids dense matrix products; the
explicit matrix remains constructible for verification.

The negative-sequence network is solved first (its injections depend only
on the local negative voltage), then the positive-sequence network, whose
injections also use the solved negative magnitudes.  Branch impedances are
shared between the two sequences, which is standard for collector cables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import pmsg
from .errors import NoConvergence, NonRadialTopology, ZeroAggregateCurrent
from .pmsg import PmsgParams, Strategy

DEFAULT_SIGMA1 = 1e-6
DEFAULT_MAX_ITER = 100


@dataclass(frozen=True)
class Feeder:
    """One radial chain: ``nodes[0]`` is nearest the PCC.

    ``impedances[i]`` is the branch between ``nodes[i-1]`` (or the PCC for
    i = 0) and ``nodes[i]``, in p.u. on the system base.  Transformers
    between a turbine and the feeder are folded into its branch impedance.
    """

    nodes: tuple[str, ...]
    impedances: tuple[complex, ...]

    def __post_init__(self):
        if len(self.nodes) != len(self.impedances):
            raise NonRadialTopology(
                f"feeder has {len(self.nodes)} nodes but {len(self.impedances)} branches"
            )
        if len(set(self.nodes)) != len(self.nodes):
            raise NonRadialTopology("feeder contains a repeated node")
        if not all(np.isfinite(z.real) and np.isfinite(z.imag) for z in self.impedances):
            raise NonRadialTopology("feeder impedances must be finite")


@dataclass(frozen=True)
class FeederTopology:
    """All feeders of one farm; every turbine appears on exactly one."""

    feeders: tuple[Feeder, ...]
    pcc: str = "PCC"

    def __post_init__(self):
        seen: set[str] = set()
        for feeder in self.feeders:
            for nid in feeder.nodes:
                if nid in seen:
                    raise NonRadialTopology(f"turbine {nid!r} appears on two feeders")
                seen.add(nid)

    @property
    def turbine_ids(self) -> tuple[str, ...]:
        return tuple(nid for feeder in self.feeders for nid in feeder.nodes)


def incidence_matrix(feeder: Feeder) -> np.ndarray:
    """Node-branch incidence matrix C of one chain.

    Entry (n, b) is 1 iff branch b lies on the path from the PCC to node n,
    so for a chain it is lower triangular with unit entries and C^T maps
    node injections to branch currents (sums of downstream injections).
    """
    n = len(feeder.nodes)
    return np.tril(np.ones((n, n), dtype=int))


def _sweep(
    feeder: Feeder, u_pcc: complex, injections: Mapping[str, complex]
) -> dict[str, complex]:
    """Backward current accumulation followed by forward voltage update."""
    n = len(feeder.nodes)
    branch = [0j] * n
    acc = 0j
    for i in range(n - 1, -1, -1):
        acc += injections[feeder.nodes[i]]
        branch[i] = acc
    out: dict[str, complex] = {}
    u = u_pcc
    for i, nid in enumerate(feeder.nodes):
        u = u + feeder.impedances[i] * branch[i]
        out[nid] = u
    return out


@dataclass
class FeederSolve:
    """Result of one sequence-network fixed point."""

    voltages: dict[str, complex]
    injections: dict[str, complex]
    iterations: int
    residual: float
    residual_history: tuple[float, ...] = field(default_factory=tuple)


@dataclass
class VoltageSolution:
    """Per-turbine terminal voltages and injections for both sequences."""

    pos: FeederSolve
    neg: FeederSolve
    u_pcc_pos: complex
    u_pcc_neg: complex


def _fixed_point(
    topology: FeederTopology,
    u_pcc: complex,
    inject_fn: Callable[[str, complex], complex],
    sigma1: float,
    max_iter: int,
    damping: float,
) -> FeederSolve:
    if sigma1 <= 0.0:
        raise ValueError("sigma1 must be > 0")
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must be in (0, 1]")

    voltages = {nid: u_pcc for nid in topology.turbine_ids}
    history: list[float] = []
    for iteration in range(1, max_iter + 1):
        injections = {nid: inject_fn(nid, v) for nid, v in voltages.items()}
        residual = 0.0
        updated: dict[str, complex] = {}
        for feeder in topology.feeders:
            swept = _sweep(feeder, u_pcc, injections)
            for nid, u_new in swept.items():
                u = damping * u_new + (1.0 - damping) * voltages[nid]
                residual = max(residual, abs(u - voltages[nid]))
                updated[nid] = u
        voltages = updated
        history.append(residual)
        if residual < sigma1:
            injections = {nid: inject_fn(nid, v) for nid, v in voltages.items()}
            return FeederSolve(
                voltages=voltages,
                injections=injections,
                iterations=iteration,
                residual=residual,
                residual_history=tuple(history),
            )
    raise NoConvergence(
        "terminal-voltage fixed point did not converge",
        iterations=max_iter,
        residual=history[-1] if history else float("nan"),
        history=tuple(history),
    )


def solve_negative_sequence_voltages(
    topology: FeederTopology,
    u_pcc_neg: complex,
    params_by_node: Mapping[str, PmsgParams],
    sigma1: float = DEFAULT_SIGMA1,
    *,
    weights: Mapping[str, float] | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    damping: float = 1.0,
) -> FeederSolve:
    """Negative-sequence terminal voltages of every turbine.

    Starts every terminal at the PCC value and iterates the sweep until the
    largest voltage change drops below ``sigma1``.  Turbine injections
    follow the unbalance-mitigating shunt law (zero active, reactive
    absorption proportional to the squared local negative voltage).
    ``weights`` converts machine-base injections to the system base.
    """

    def inject(nid: str, u: complex) -> complex:
        w = 1.0 if weights is None else weights[nid]
        return pmsg.static_negative_current(u, params_by_node[nid]) * w

    return _fixed_point(topology, u_pcc_neg, inject, sigma1, max_iter, damping)


def solve_positive_sequence_voltages(
    topology: FeederTopology,
    u_pcc_pos: complex,
    u_neg_solved: Mapping[str, complex],
    wind_speeds: Mapping[str, float],
    strategy: Strategy,
    params_by_node: Mapping[str, PmsgParams],
    sigma1: float = DEFAULT_SIGMA1,
    *,
    weights: Mapping[str, float] | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    damping: float = 1.0,
) -> FeederSolve:
    """Positive-sequence terminal voltages given the solved negative ones.

    Injections assume the steady operating point: the DC-voltage loop asks
    for the pre-fault power, capacity permitting, plus the reactive support
    required by the dip depth.
    """

    def inject(nid: str, u: complex) -> complex:
        w = 1.0 if weights is None else weights[nid]
        params = params_by_node[nid]
        p0 = pmsg.wind_power(wind_speeds[nid], params)
        return (
            pmsg.static_positive_current(
                u, abs(u_neg_solved[nid]), p0, strategy, params
            )
            * w
        )

    return _fixed_point(topology, u_pcc_pos, inject, sigma1, max_iter, damping)


def solve_terminal_voltages(
    topology: FeederTopology,
    u_pcc_pos: complex,
    u_pcc_neg: complex,
    wind_speeds: Mapping[str, float],
    strategy: Strategy,
    params_by_node: Mapping[str, PmsgParams],
    sigma1: float = DEFAULT_SIGMA1,
    *,
    weights: Mapping[str, float] | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    damping: float = 1.0,
) -> VoltageSolution:
    """Solve both sequence networks, negative first."""
    neg = solve_negative_sequence_voltages(
        topology,
        u_pcc_neg,
        params_by_node,
        sigma1,
        weights=weights,
        max_iter=max_iter,
        damping=damping,
    )
    pos = solve_positive_sequence_voltages(
        topology,
        u_pcc_pos,
        neg.voltages,
        wind_speeds,
        strategy,
        params_by_node,
        sigma1,
        weights=weights,
        max_iter=max_iter,
        damping=damping,
    )
    return VoltageSolution(pos=pos, neg=neg, u_pcc_pos=u_pcc_pos, u_pcc_neg=u_pcc_neg)


def equivalent_collector_impedance(
    member_voltages: Sequence[complex],
    member_currents: Sequence[complex],
    u_pcc: complex,
) -> complex:
    """Equal average voltage-drop impedance for a group of turbines.

    With current positive from turbine to PCC, the equivalent machine at
    the summed current sees the same average drop as the members:
    Z_eq = (U_ave - U_pcc) / sum(I).
    """
    if not member_voltages:
        raise ZeroAggregateCurrent("no members")
    if len(member_voltages) != len(member_currents):
        raise ValueError("voltage and current lists must have equal length")
    total = sum(member_currents)
    if abs(total) < 1e-12:
        raise ZeroAggregateCurrent(f"aggregate current magnitude {abs(total):.3e}")
    u_ave = sum(member_voltages) / len(member_voltages)
    return (u_ave - u_pcc) / total
