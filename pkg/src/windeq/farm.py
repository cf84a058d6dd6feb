"""Wind farm model: collector topology, per-turbine parameters, wind input."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping

from .collector import Feeder, FeederTopology
from .errors import ValidationError
from .pmsg import PmsgParams


@dataclass(frozen=True)
class Farm:
    """One wind farm: radial collector network plus per-turbine data.

    Branch impedances are p.u. on ``system_base_mva``; turbine control
    quantities are p.u. on each machine's own rating.
    """

    topology: FeederTopology
    params: Mapping[str, PmsgParams]
    wind_speeds: Mapping[str, float]
    system_base_mva: float = 0.0  # 0 means "use the farm total"

    def __post_init__(self):
        ids = set(self.topology.turbine_ids)
        if set(self.params) != ids:
            raise ValidationError(
                "turbine parameter ids do not match the topology", rule="params-coverage"
            )
        missing = ids - set(self.wind_speeds)
        if missing:
            raise ValidationError(
                f"missing wind speeds for {sorted(missing)}", rule="missing-wind-speed"
            )
        if self.system_base_mva == 0.0:
            object.__setattr__(self, "system_base_mva", self.s_total_mva)
        if self.system_base_mva <= 0.0:
            raise ValidationError("system base must be > 0", rule="bad-system-base")

    @property
    def turbine_ids(self) -> tuple[str, ...]:
        return self.topology.turbine_ids

    @property
    def s_total_mva(self) -> float:
        return sum(p.s_rated for p in self.params.values())

    @property
    def weights(self) -> dict[str, float]:
        """Machine-base to system-base current/power scale per turbine."""
        return {
            nid: self.params[nid].s_rated / self.system_base_mva
            for nid in self.turbine_ids
        }

    @property
    def rating_pu(self) -> float:
        """Total farm rating in system-base p.u."""
        return self.s_total_mva / self.system_base_mva


def generate_farm(
    n_turbines: int,
    n_feeders: int = 4,
    seed: int = 0,
    *,
    wind_range: tuple[float, float] = (6.0, 12.0),
    params: PmsgParams | None = None,
    branch_r: tuple[float, float] = (0.002, 0.005),
    branch_x: tuple[float, float] = (0.006, 0.013),
) -> Farm:
    """Deterministic pseudo-random test farm.

    Turbines are split as evenly as possible over the feeders; branch
    impedances and wind speeds are drawn uniformly from the given ranges
    with a fixed seed, so the same arguments always produce the same farm.
    """
    if n_turbines < 1 or n_feeders < 1 or n_feeders > n_turbines:
        raise ValueError("need 1 <= n_feeders <= n_turbines")
    rng = random.Random(seed)
    base_params = params or PmsgParams()

    per_feeder = [n_turbines // n_feeders] * n_feeders
    for i in range(n_turbines % n_feeders):
        per_feeder[i] += 1

    width = max(3, len(str(n_turbines)))
    feeders = []
    counter = 1
    for count in per_feeder:
        nodes = tuple(f"T{counter + k:0{width}d}" for k in range(count))
        counter += count
        impedances = tuple(
            complex(rng.uniform(*branch_r), rng.uniform(*branch_x))
            for _ in range(count)
        )
        feeders.append(Feeder(nodes=nodes, impedances=impedances))

    topology = FeederTopology(feeders=tuple(feeders))
    winds = {nid: rng.uniform(*wind_range) for nid in topology.turbine_ids}
    return Farm(
        topology=topology,
        params={nid: base_params for nid in topology.turbine_ids},
        wind_speeds=winds,
    )
