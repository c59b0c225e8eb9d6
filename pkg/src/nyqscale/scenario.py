"""Scenario files: a single JSON document describing the network, the
per-bus reserve equipment, the screening policy, and the disturbance.

Susceptance units declared on each line are converted once at ingestion
into the package's internal system (power MW, frequency Hz, angle Hz*s):
a per-radian susceptance picks up a factor 2*pi. Everything downstream is
unit-naive.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import jsonschema

from .errors import ScenarioError
from .network import Line, OperatingPoint, PowerNetwork, build_laplacian, kron_reduce
from .nyquist import DecentralizedPolicy
from .powerplant import (
    Agent,
    HydroParams,
    WindParams,
    assemble_agent,
    make_fcr_controller,
    make_fdes,
    make_ffr_controller,
    make_hydro_turbine,
    make_wind_turbine,
)
from .simkit import Pulse

__all__ = ["Scenario", "load_scenario", "loads_scenario", "bundled_scenario_path"]

_B_UNIT_FACTORS = {
    "GW_per_rad": 2000.0 * math.pi,
    "MW_per_rad": 2.0 * math.pi,
    "MW_per_Hz_s": 1.0,
}

_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["name", "network", "agents"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "network": {
            "type": "object",
            "required": ["buses", "lines"],
            "properties": {
                "buses": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["id"],
                        "properties": {
                            "id": {"type": "integer"},
                            "voltage_pu": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                },
                "lines": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["from", "to", "b", "units"],
                        "properties": {
                            "from": {"type": "integer"},
                            "to": {"type": "integer"},
                            "b": {"type": "number", "minimum": 0},
                            "units": {"enum": sorted(_B_UNIT_FACTORS)},
                        },
                    },
                },
                "operating_point": {
                    "type": "object",
                    "properties": {
                        "angles_rad": {"type": "array", "items": {"type": "number"}}
                    },
                },
                "algebraic_buses": {"type": "array", "items": {"type": "integer"}},
            },
        },
        "agents": {
            "type": "object",
            "required": ["buses"],
            "properties": {
                "fcr_design_k_MW_per_Hz": {"type": "number", "exclusiveMinimum": 0},
                "buses": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["bus"],
                        "properties": {
                            "bus": {"type": "integer"},
                            "W_kin_GWs": {"type": "number", "minimum": 0},
                            "M_MW_s_per_Hz": {"type": "number", "minimum": 0},
                            "D_MW_per_Hz": {"type": "number", "minimum": 0},
                            "hydro": {
                                "type": "object",
                                "required": ["T_y", "T_w", "g0", "fcr_share"],
                                "properties": {
                                    "T_y": {"type": "number", "exclusiveMinimum": 0},
                                    "T_w": {"type": "number", "exclusiveMinimum": 0},
                                    "g0": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                                    "fcr_share": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                                    "P_gen_MW": {"type": "number", "minimum": 0},
                                    "rate_limit_pu_s": {"type": "number", "exclusiveMinimum": 0},
                                },
                            },
                            "wind": {
                                "type": "object",
                                "required": ["v_m_s", "ffr_share", "tau_s", "k_ffr_MW_per_Hz"],
                                "properties": {
                                    "v_m_s": {"type": "number", "exclusiveMinimum": 0},
                                    "P_nom_MW": {"type": "number", "minimum": 0},
                                    "P_MPP_MW": {"type": "number", "minimum": 0},
                                    "ffr_share": {"type": "number", "exclusiveMinimum": 0},
                                    "tau_s": {"type": "number", "minimum": 0},
                                    "k_ffr_MW_per_Hz": {"type": "number", "exclusiveMinimum": 0},
                                    "C_omega": {"type": "number", "exclusiveMinimum": 0},
                                },
                            },
                        },
                    },
                },
            },
        },
        "policy": {
            "type": "object",
            "properties": {
                "contour": {
                    "type": "object",
                    "properties": {
                        "kind": {"enum": ["full-D", "D_r"]},
                        "r_rad_s": {"type": "number", "minimum": 0},
                        "R_rad_s": {"type": ["number", "null"]},
                        "density": {"type": "integer", "minimum": 100},
                    },
                },
                "hyperplane": {
                    "type": "object",
                    "required": ["point", "normal"],
                    "properties": {
                        "point": {"type": "array", "minItems": 2, "maxItems": 2},
                        "normal": {"type": "array", "minItems": 2, "maxItems": 2},
                    },
                },
                "tau_max_s": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "disturbance": {
            "type": "object",
            "required": ["bus", "amplitude_MW"],
            "properties": {
                "bus": {"type": "integer"},
                "amplitude_MW": {"type": "number"},
                "t_start_s": {"type": "number", "minimum": 0},
                "duration_s": {"type": ["number", "null"]},
            },
        },
        "output": {
            "type": "object",
            "properties": {
                "dt_s": {"type": "number", "exclusiveMinimum": 0},
                "t_end_s": {"type": "number", "exclusiveMinimum": 0},
                "record_decimation": {"type": "integer", "minimum": 1},
            },
        },
    },
}

SHARE_SUM_TOL = 1e-9


@dataclass(frozen=True)
class Scenario:
    """Parsed, validated, cross-referenced scenario."""

    name: str
    description: str
    network: PowerNetwork
    agents: tuple[Agent, ...]
    bus_ids: tuple[int, ...]
    policy: DecentralizedPolicy | None
    contour_kind: str
    contour_r: float
    contour_R: float | None
    contour_density: int
    disturbance: tuple[Pulse, ...]
    dt_s: float
    t_end_s: float
    record_decimation: int
    hydro_rate_limits_mw_per_s: dict[int, float]
    raw: dict

    @property
    def n(self) -> int:
        return self.network.n

    def bus_index(self, bus_id: int) -> int:
        try:
            return self.bus_ids.index(bus_id)
        except ValueError:
            raise ScenarioError([f"unknown bus id {bus_id}"]) from None

    def to_json_dict(self) -> dict:
        return json.loads(json.dumps(self.raw))


def _schema_violations(doc) -> list[str]:
    validator = jsonschema.Draft202012Validator(_SCHEMA)
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: e.json_path):
        out.append(f"{err.json_path}: {err.message}")
    return out


def loads_scenario(doc: dict, source: str = "<dict>") -> Scenario:
    """Validate and cross-reference an already-parsed scenario document."""
    violations = _schema_violations(doc)
    if violations:
        raise ScenarioError(violations)

    net_doc = doc["network"]
    bus_ids = [b["id"] for b in net_doc["buses"]]
    if len(set(bus_ids)) != len(bus_ids):
        raise ScenarioError(["$.network.buses: duplicate bus ids"])
    index = {b: i for i, b in enumerate(bus_ids)}
    voltages = {
        b["id"]: float(b.get("voltage_pu", 1.0)) for b in net_doc["buses"]
    }
    lines = []
    for k, ln in enumerate(net_doc["lines"]):
        for end in ("from", "to"):
            if ln[end] not in index:
                raise ScenarioError(
                    [f"$.network.lines[{k}].{end}: unknown bus id {ln[end]}"]
                )
        factor = _B_UNIT_FACTORS[ln["units"]]
        lines.append(
            Line(
                from_bus=index[ln["from"]],
                to_bus=index[ln["to"]],
                susceptance_b=float(ln["b"]) * factor,
                from_voltage=voltages[ln["from"]],
                to_voltage=voltages[ln["to"]],
            )
        )
    angles = net_doc.get("operating_point", {}).get("angles_rad")
    op = OperatingPoint(angles) if angles is not None else OperatingPoint.flat(len(bus_ids))
    network = build_laplacian(lines, op, len(bus_ids))
    algebraic = [index[b] for b in net_doc.get("algebraic_buses", [])]
    if algebraic:
        network = kron_reduce(network, algebraic)
        bus_ids = [b for i, b in enumerate(bus_ids) if i not in set(algebraic)]
        index = {b: i for i, b in enumerate(bus_ids)}

    agents_doc = doc["agents"]
    k_fcr = agents_doc.get("fcr_design_k_MW_per_Hz")
    f_des = make_fdes(k_fcr) if k_fcr else None
    per_bus = {a["bus"]: a for a in agents_doc["buses"]}
    for b in per_bus:
        if b not in index:
            raise ScenarioError([f"$.agents.buses: unknown bus id {b}"])
    fcr_sum = sum(
        a["hydro"]["fcr_share"] for a in agents_doc["buses"] if "hydro" in a
    )
    if any("hydro" in a for a in agents_doc["buses"]):
        if abs(fcr_sum - 1.0) > SHARE_SUM_TOL:
            raise ScenarioError(
                [f"$.agents: FCR shares sum to {fcr_sum}, expected 1"]
            )
        if f_des is None:
            raise ScenarioError(
                ["$.agents.fcr_design_k_MW_per_Hz required when hydro FCR present"]
            )
    ffr_sum = sum(
        a["wind"]["ffr_share"] for a in agents_doc["buses"] if "wind" in a
    )
    if any("wind" in a for a in agents_doc["buses"]) and abs(ffr_sum - 1.0) > SHARE_SUM_TOL:
        raise ScenarioError([f"$.agents: FFR shares sum to {ffr_sum}, expected 1"])

    agents: list[Agent | None] = [None] * len(bus_ids)
    rate_limits: dict[int, float] = {}
    for bus_id, spec_a in per_bus.items():
        i = index[bus_id]
        if "M_MW_s_per_Hz" in spec_a:
            M = float(spec_a["M_MW_s_per_Hz"])
        elif "W_kin_GWs" in spec_a:
            M = 2.0 * float(spec_a["W_kin_GWs"]) * 1000.0 / 50.0
        else:
            M = 0.0
        parts, names = [], []
        if "hydro" in spec_a:
            h = spec_a["hydro"]
            params = HydroParams(
                servo_time_s=h["T_y"],
                water_time_s=h["T_w"],
                initial_gate_pu=h["g0"],
                rate_limit_pu_s=h.get("rate_limit_pu_s", 0.1),
            )
            turbine = make_hydro_turbine(params)
            parts.append(make_fcr_controller(h["fcr_share"], f_des, turbine).actuator)
            names.append("hydro")
            if "P_gen_MW" in h:
                rate_limits[i] = params.rate_limit_pu_s * float(h["P_gen_MW"])
        if "wind" in spec_a:
            w = spec_a["wind"]
            wp = WindParams(
                wind_speed_m_s=w["v_m_s"],
                c_omega=w.get("C_omega", 5.8e-3),
                p_nom_mw=w.get("P_nom_MW", 0.0),
                p_mpp_mw=w.get("P_MPP_MW", 0.0),
            )
            turbine = make_wind_turbine(wp)
            parts.append(
                make_ffr_controller(
                    w["ffr_share"], w["k_ffr_MW_per_Hz"], w["tau_s"], turbine
                )
            )
            names.append("wind")
        agents[i] = assemble_agent(
            M,
            parts,
            load_damping_mw_per_hz=float(spec_a.get("D_MW_per_Hz", 0.0)),
            part_names=names,
            bus=i,
        )
    missing = [bus_ids[i] for i, a in enumerate(agents) if a is None]
    if missing:
        raise ScenarioError(
            [f"$.agents.buses: no agent for bus id(s) {missing}; every retained "
             "bus needs dynamics (Kron-reduce algebraic ones)"]
        )

    pol_doc = doc.get("policy", {})
    policy = None
    if "hyperplane" in pol_doc and "tau_max_s" in pol_doc:
        hp = pol_doc["hyperplane"]
        # the per-agent policy always needs a strictly positive D_r radius,
        # even when the scenario's analysis contour is the full D-contour
        r_policy = float(pol_doc.get("contour", {}).get("r_rad_s") or 0.75)
        policy = DecentralizedPolicy(
            r=r_policy,
            hyperplane_point=complex(hp["point"][0], hp["point"][1]),
            hyperplane_normal=complex(hp["normal"][0], hp["normal"][1]),
            tau_max=float(pol_doc["tau_max_s"]),
            R=pol_doc.get("contour", {}).get("R_rad_s"),
        )
    cont = pol_doc.get("contour", {})

    dist_doc = doc.get("disturbance")
    pulses: tuple[Pulse, ...] = ()
    if dist_doc:
        if dist_doc["bus"] not in index:
            raise ScenarioError(
                [f"$.disturbance.bus: unknown bus id {dist_doc['bus']}"]
            )
        t0 = float(dist_doc.get("t_start_s", 0.0))
        dur = dist_doc.get("duration_s")
        pulses = (
            Pulse(
                bus=index[dist_doc["bus"]],
                amplitude_mw=float(dist_doc["amplitude_MW"]),
                t_start_s=t0,
                t_end_s=None if dur is None else t0 + float(dur),
            ),
        )

    out_doc = doc.get("output", {})
    return Scenario(
        name=doc["name"],
        description=doc.get("description", ""),
        network=network,
        agents=tuple(agents),
        bus_ids=tuple(bus_ids),
        policy=policy,
        contour_kind=cont.get("kind", "D_r" if cont.get("r_rad_s") else "full-D"),
        contour_r=float(cont.get("r_rad_s", 0.0)),
        contour_R=cont.get("R_rad_s"),
        contour_density=int(cont.get("density", 200)),
        disturbance=pulses,
        dt_s=float(out_doc.get("dt_s", 1e-3)),
        t_end_s=float(out_doc.get("t_end_s", 60.0)),
        record_decimation=int(out_doc.get("record_decimation", 10)),
        hydro_rate_limits_mw_per_s=rate_limits,
        raw=doc,
    )


def load_scenario(path: str | Path) -> Scenario:
    """Read, schema-validate, and cross-reference a scenario JSON file."""
    p = Path(path)
    if not p.is_file():
        raise ScenarioError([f"scenario file not found: {p}"])
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"invalid JSON: {exc}"]) from None
    return loads_scenario(doc, source=str(p))


def bundled_scenario_path(name: str) -> Path:
    """Path of a bundled scenario: n5_hydro_d0, n5_hydro_loads, n5_hydro_wind."""
    fn = f"{name}.json"
    base = resources.files("nyqscale").joinpath("data")
    p = Path(str(base.joinpath(fn)))
    if not p.is_file():
        available = sorted(q.stem for q in Path(str(base)).glob("*.json"))
        raise ScenarioError(
            [f"no bundled scenario {name!r}; available: {available}"]
        )
    return p
