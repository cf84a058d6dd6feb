"""JSON/CSV ingestion and persistence for farms, scenarios and results.

Configuration files are JSON (hand editable, schema checked on load);
traces and tabular results are CSV with declared headers.  Wind speeds are
plain per-turbine values in the farm file; a farm may instead carry a
``generate`` block that builds a deterministic pseudo-random test farm from
a seed.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path
from typing import Any, Mapping, Sequence

from .aggregation import EquivalentFarm, EquivalentMachine, RampSchedule
from .clustering import Cluster, ClusterAssignment
from .collector import Feeder, FeederTopology, VoltageSolution
from .engine import ComparisonReport, Scenario
from .errors import ParseError, ValidationError
from .farm import Farm, generate_farm
from .grid import FaultKind, FaultSpec, IterationRecord, TheveninGrid
from .pmsg import PmsgParams, Strategy

_PARAM_FIELDS = {f.name for f in dataclasses.fields(PmsgParams)}


def _as_complex(value: Any, field: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if (
        isinstance(value, Sequence)
        and len(value) == 2
        and all(isinstance(v, (int, float)) for v in value)
    ):
        return complex(value[0], value[1])
    raise ValidationError(f"{field} must be a number or [re, im] pair", rule="bad-complex")


def _complex_out(z: complex) -> list[float]:
    return [z.real, z.imag]


def _load_json(path: Path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=str(path))
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}", path=str(path))
    if not isinstance(data, dict):
        raise ParseError("top level must be a JSON object", path=str(path))
    return data


def _params_from_dict(raw: Mapping[str, Any], base: PmsgParams | None = None) -> PmsgParams:
    unknown = set(raw) - _PARAM_FIELDS
    if unknown:
        raise ValidationError(
            f"unknown turbine parameter(s): {sorted(unknown)}", rule="unknown-param-field"
        )
    for key, value in raw.items():
        if not isinstance(value, (int, float)):
            raise ValidationError(f"parameter {key} must be a number", rule="bad-param-type")
    try:
        if base is None:
            return PmsgParams(**raw)
        return dataclasses.replace(base, **raw)
    except ValueError as exc:
        raise ValidationError(str(exc), rule="param-invariant")


# ---------------------------------------------------------------------------
# farm files
# ---------------------------------------------------------------------------

def load_farm(path: str | Path, seed: int | None = None) -> Farm:
    """Load and validate one farm file.

    Rejects duplicate turbine ids, non-radial feeders, missing wind speeds
    and schema violations; error messages carry a rule id.  ``seed``
    overrides the seed of a ``generate`` block and is ignored for explicit
    farms.
    """
    path = Path(path)
    data = _load_json(path)

    if "generate" in data:
        gen = data["generate"]
        if not isinstance(gen, dict):
            raise ValidationError("generate block must be an object", rule="bad-generate")
        defaults = _params_from_dict(data.get("turbine_defaults", {}))
        kwargs: dict[str, Any] = {"params": defaults}
        if "wind_range" in gen:
            wr = gen["wind_range"]
            kwargs["wind_range"] = (float(wr[0]), float(wr[1]))
        return generate_farm(
            int(gen.get("n_turbines", 20)),
            int(gen.get("n_feeders", 4)),
            int(gen.get("seed", 0)) if seed is None else seed,
            **kwargs,
        )

    for key in ("feeders", "turbines"):
        if key not in data:
            raise ValidationError(f"missing section {key!r}", rule="missing-section")

    defaults = _params_from_dict(data.get("turbine_defaults", {}))
    turbines = data["turbines"]
    if not isinstance(turbines, dict):
        raise ValidationError("turbines must map id to properties", rule="bad-turbines")

    feeders = []
    seen: set[str] = set()
    for i, raw in enumerate(data["feeders"]):
        nodes = raw.get("nodes")
        branches = raw.get("branches")
        if not isinstance(nodes, list) or not nodes:
            raise ValidationError(f"feeder {i} has no nodes", rule="empty-feeder")
        if not isinstance(branches, list) or len(branches) != len(nodes):
            raise ValidationError(
                f"feeder {i} needs one branch impedance per node", rule="branch-count-mismatch"
            )
        for nid in nodes:
            if nid in seen:
                raise ValidationError(f"duplicate turbine id {nid!r}", rule="duplicate-turbine-id")
            seen.add(nid)
            if nid not in turbines:
                raise ValidationError(
                    f"feeder node {nid!r} missing from turbines section", rule="unknown-turbine"
                )
        feeders.append(
            Feeder(
                nodes=tuple(nodes),
                impedances=tuple(_as_complex(b, f"feeders[{i}]") for b in branches),
            )
        )

    extra = set(turbines) - seen
    if extra:
        raise ValidationError(
            f"turbines not on any feeder: {sorted(extra)}", rule="unplaced-turbine"
        )

    params: dict[str, PmsgParams] = {}
    winds: dict[str, float] = {}
    for nid, props in turbines.items():
        if not isinstance(props, dict) or "wind_speed" not in props:
            raise ValidationError(
                f"turbine {nid!r} needs a wind_speed", rule="missing-wind-speed"
            )
        winds[nid] = float(props["wind_speed"])
        overrides = {k: v for k, v in props.items() if k != "wind_speed"}
        params[nid] = _params_from_dict(overrides, base=defaults)

    return Farm(
        topology=FeederTopology(feeders=tuple(feeders)),
        params=params,
        wind_speeds=winds,
        system_base_mva=float(data.get("system_base_mva", 0.0)),
    )


def save_farm(farm: Farm, path: str | Path) -> None:
    """Write a farm back to its canonical JSON form."""
    defaults = PmsgParams()
    turbines = {}
    for nid in farm.turbine_ids:
        entry: dict[str, Any] = {"wind_speed": farm.wind_speeds[nid]}
        p = farm.params[nid]
        for name in _PARAM_FIELDS:
            if getattr(p, name) != getattr(defaults, name):
                entry[name] = getattr(p, name)
        turbines[nid] = entry
    doc = {
        "system_base_mva": farm.system_base_mva,
        "feeders": [
            {
                "nodes": list(feeder.nodes),
                "branches": [_complex_out(z) for z in feeder.impedances],
            }
            for feeder in farm.topology.feeders
        ],
        "turbines": turbines,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------

_STRATEGY_NAMES = {
    "1": Strategy.MITIGATE_UNBALANCE,
    "2": Strategy.MITIGATE_OSCILLATION,
    "mitigate_unbalance": Strategy.MITIGATE_UNBALANCE,
    "mitigate_oscillation": Strategy.MITIGATE_OSCILLATION,
}


def _parse_strategy(raw: Any) -> Strategy:
    key = str(raw).lower()
    if key not in _STRATEGY_NAMES:
        raise ValidationError(f"unknown strategy {raw!r}", rule="bad-strategy")
    return _STRATEGY_NAMES[key]


def _parse_fault(raw: Mapping[str, Any]) -> FaultSpec:
    kinds = {k.value: k for k in FaultKind}
    kind_key = str(raw.get("kind", "")).lower()
    if kind_key not in kinds:
        raise ValidationError(
            f"fault kind must be one of {sorted(kinds)}", rule="bad-fault-kind"
        )
    try:
        return FaultSpec(
            kind=kinds[kind_key],
            z_fault=_as_complex(raw.get("z_fault", 0.0), "fault.z_fault"),
            z_ground=_as_complex(raw.get("z_ground", 0.0), "fault.z_ground"),
            t_start=float(raw.get("t_start", 0.5)),
            t_clear=float(raw.get("t_clear", 0.8)),
        )
    except ValueError as exc:
        raise ValidationError(str(exc), rule="fault-invariant")


def _parse_grid(raw: Mapping[str, Any]) -> TheveninGrid:
    try:
        return TheveninGrid(
            emf=_as_complex(raw.get("emf", 1.0), "grid.emf"),
            z1=_as_complex(raw.get("z1", [0.01, 0.12]), "grid.z1"),
            z2=_as_complex(raw.get("z2", [0.01, 0.12]), "grid.z2"),
            z0=_as_complex(raw.get("z0", [0.0, 0.08]), "grid.z0"),
            z_transformer=_as_complex(raw.get("z_transformer", [0.004, 0.06]), "grid.z_transformer"),
            delta_winding=bool(raw.get("delta_winding", True)),
        )
    except ValueError as exc:
        raise ValidationError(str(exc), rule="grid-invariant")


def load_scenario(path: str | Path, seed: int | None = None) -> Scenario:
    """Load a scenario file; the farm reference resolves relative to it."""
    path = Path(path)
    data = _load_json(path)
    if "farm" not in data:
        raise ValidationError("scenario needs a farm reference", rule="missing-farm")
    farm_ref = Path(data["farm"])
    if not farm_ref.is_absolute():
        farm_ref = path.parent / farm_ref
    if not farm_ref.exists():
        raise ValidationError(f"farm file {farm_ref} does not exist", rule="missing-farm-file")
    farm = load_farm(farm_ref, seed=seed)
    try:
        return Scenario(
            farm=farm,
            grid=_parse_grid(data.get("grid", {})),
            fault=_parse_fault(data.get("fault", {})),
            strategy=_parse_strategy(data.get("strategy", 1)),
            h=float(data.get("step", 1e-3)),
            t_end=float(data.get("t_end", 2.0)),
            sigma1=float(data.get("sigma1", 1e-6)),
            sigma2=float(data.get("sigma2", 5e-3)),
            frequency_hz=float(data.get("frequency_hz", 50.0)),
        )
    except ValueError as exc:
        raise ValidationError(str(exc), rule="scenario-invariant")


# ---------------------------------------------------------------------------
# equivalent farm serialization
# ---------------------------------------------------------------------------

def equivalent_farm_to_dict(eq: EquivalentFarm) -> dict:
    machines = []
    for m in eq.machines:
        entry: dict[str, Any] = {
            "machine_id": m.machine_id,
            "cluster": m.cluster.value if m.cluster else None,
            "params": dataclasses.asdict(m.params),
            "p0": m.p0,
            "wind_speed": m.wind_speed,
            "z_eq": _complex_out(m.z_eq),
            "member_ids": list(m.member_ids),
            "ramp_schedule": None,
            "recovery_rates": list(m.recovery_rates) if m.recovery_rates else None,
        }
        if m.schedule is not None:
            entry["ramp_schedule"] = {
                "breakpoints": list(m.schedule.breakpoints),
                "rates": list(m.schedule.rates),
                "tail_rate": m.schedule.tail_rate,
            }
        machines.append(entry)
    return {
        "strategy": eq.strategy.value,
        "s_total_mva": eq.s_total_mva,
        "u_pcc_pos": _complex_out(eq.u_pcc_pos),
        "u_pcc_neg": _complex_out(eq.u_pcc_neg),
        "machines": machines,
    }


def equivalent_farm_from_dict(data: Mapping[str, Any]) -> EquivalentFarm:
    machines = []
    for raw in data["machines"]:
        schedule = None
        if raw.get("ramp_schedule"):
            s = raw["ramp_schedule"]
            schedule = RampSchedule(
                breakpoints=tuple(s["breakpoints"]),
                rates=tuple(s["rates"]),
                tail_rate=float(s["tail_rate"]),
            )
        machines.append(
            EquivalentMachine(
                machine_id=raw["machine_id"],
                cluster=Cluster(raw["cluster"]) if raw.get("cluster") else None,
                params=PmsgParams(**raw["params"]),
                p0=float(raw["p0"]),
                wind_speed=float(raw["wind_speed"]),
                z_eq=complex(raw["z_eq"][0], raw["z_eq"][1]),
                member_ids=tuple(raw["member_ids"]),
                schedule=schedule,
                recovery_rates=tuple(raw["recovery_rates"]) if raw.get("recovery_rates") else None,
            )
        )
    return EquivalentFarm(
        machines=tuple(machines),
        strategy=Strategy(data["strategy"]),
        s_total_mva=float(data["s_total_mva"]),
        u_pcc_pos=complex(data["u_pcc_pos"][0], data["u_pcc_pos"][1]),
        u_pcc_neg=complex(data["u_pcc_neg"][0], data["u_pcc_neg"][1]),
    )


def save_equivalent_farm(eq: EquivalentFarm, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(equivalent_farm_to_dict(eq), fh, indent=2)
        fh.write("\n")


def load_equivalent_farm(path: str | Path) -> EquivalentFarm:
    return equivalent_farm_from_dict(_load_json(Path(path)))


# ---------------------------------------------------------------------------
# CSV writers for CLI results
# ---------------------------------------------------------------------------

def write_assignments_csv(
    assignments: Sequence[ClusterAssignment], path: str | Path
) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["turbine_id", "cluster", "p0", "p_cri1", "p_cri2", "v_cri1", "v_cri2"]
        )
        for a in assignments:
            writer.writerow(
                [
                    a.turbine_id,
                    a.cluster.value,
                    repr(a.p0),
                    repr(a.criticals.p_cri1),
                    repr(a.criticals.p_cri2),
                    repr(a.criticals.v_cri1),
                    repr(a.criticals.v_cri2),
                ]
            )


def write_boundary_csv(rows, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u_pos", "u_neg", "v_cri1", "v_cri2", "strategy"])
        for r in rows:
            writer.writerow(
                [repr(r.u_pos), repr(r.u_neg), repr(r.v_cri1), repr(r.v_cri2), r.strategy]
            )


def write_voltages_csv(solution: VoltageSolution, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "turbine_id",
                "u_pos_re", "u_pos_im", "u_pos_mag",
                "u_neg_re", "u_neg_im", "u_neg_mag",
                "i_pos_re", "i_pos_im",
                "i_neg_re", "i_neg_im",
            ]
        )
        for nid in solution.pos.voltages:
            up = solution.pos.voltages[nid]
            un = solution.neg.voltages[nid]
            ip = solution.pos.injections[nid]
            inn = solution.neg.injections[nid]
            writer.writerow(
                [
                    nid,
                    repr(up.real), repr(up.imag), repr(abs(up)),
                    repr(un.real), repr(un.imag), repr(abs(un)),
                    repr(ip.real), repr(ip.imag),
                    repr(inn.real), repr(inn.imag),
                ]
            )


def write_iterations_csv(history: Sequence[IterationRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "u_pos_in", "u_neg_in", "u_pos_out", "u_neg_out"])
        for i, rec in enumerate(history, start=1):
            writer.writerow(
                [i, repr(rec.u_pos_in), repr(rec.u_neg_in), repr(rec.u_pos_out), repr(rec.u_neg_out)]
            )


def save_report(report: ComparisonReport, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2)
        fh.write("\n")
