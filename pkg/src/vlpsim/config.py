"""Declarative run configuration (TOML) and built-in defaults.

Angles are written in degrees in config files (keys carry a ``_deg``
suffix) and converted to radians at this boundary; everything else is SI.
Any omitted table falls back to the built-in defaults, so an empty file is
a valid configuration.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from ._backend import BACKEND
from .channel import Luminaire, NoiseModel, Photodiode
from .fusion import ComplementaryFilterConfig, DriftCorrectionConfig
from .localization import IndirectHConfig, PsoConfig
from .sensors import BaroModel, ImuModel
from .sim import FlightPlan, Testbed, default_flight_plans, default_testbed


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass
class RunConfig:
    testbed: Testbed
    flights: Dict[str, FlightPlan]
    baro: BaroModel
    imu: ImuModel
    indirect: IndirectHConfig
    pso: PsoConfig
    filter: ComplementaryFilterConfig
    drift: DriftCorrectionConfig
    source_path: Optional[str] = None
    source_sha256: Optional[str] = None


def default_baro_model() -> BaroModel:
    return BaroModel(noise_sigma=0.06, drift_rate=0.001, initial_offset=0.05)


def default_imu_model() -> ImuModel:
    return ImuModel(accel_noise_sigma=0.03, angle_noise_sigma=math.radians(0.3))


def default_run_config() -> RunConfig:
    flights = dict(default_flight_plans())
    flights["circle"] = flights["circle_a"]
    flights["hover"] = FlightPlan(kind="hover", duration=10.0, hover_height=1.0)
    return RunConfig(
        testbed=default_testbed(),
        flights=flights,
        baro=default_baro_model(),
        imu=default_imu_model(),
        indirect=IndirectHConfig(),
        pso=PsoConfig(),
        filter=ComplementaryFilterConfig(),
        drift=DriftCorrectionConfig(),
    )


def _build_testbed(table: dict, base: Testbed) -> Testbed:
    extent = np.asarray(table.get("extent", base.extent), dtype=float)
    noise_tbl = table.get("noise", {})
    noise = NoiseModel(
        gaussian_sigma=noise_tbl.get("gaussian_sigma", base.noise.gaussian_sigma),
        ambient_dc=noise_tbl.get("ambient_dc", base.noise.ambient_dc),
    )
    pd_tbl = table.get("photodiode", {})
    pd = Photodiode(
        area=pd_tbl.get("area", base.photodiode.area),
        fov_half_angle=math.radians(pd_tbl["fov_half_angle_deg"])
        if "fov_half_angle_deg" in pd_tbl
        else base.photodiode.fov_half_angle,
    )
    if "luminaires" in table:
        lums = tuple(
            Luminaire(
                id=str(entry["id"]),
                position=entry["position"],
                transmit_power=entry["transmit_power"],
                lambertian_order=entry["lambertian_order"],
                beacon_frequency=entry["beacon_frequency"],
            )
            for entry in table["luminaires"]
        )
    else:
        lums = base.luminaires
    return Testbed(
        extent=extent,
        luminaires=lums,
        photodiode=pd,
        noise=noise,
        rss_floor=table.get("rss_floor", base.rss_floor),
        beacon_sample_rate=table.get("beacon_sample_rate", base.beacon_sample_rate),
    )


def _build_flight(table: dict) -> FlightPlan:
    kwargs = dict(table)
    if "max_tilt_deg" in kwargs:
        kwargs["max_tilt"] = math.radians(kwargs.pop("max_tilt_deg"))
    for key in ("center", "height_profile", "height_knots"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    if "waypoints" in kwargs:
        kwargs["waypoints"] = tuple(tuple(w) for w in kwargs["waypoints"])
    return FlightPlan(**kwargs)


def load_config(path) -> RunConfig:
    """Load a TOML run configuration, layered over the defaults."""
    path = Path(path)
    try:
        raw_bytes = path.read_bytes()
        data = tomllib.loads(raw_bytes.decode("utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None

    base = default_run_config()
    try:
        testbed = _build_testbed(data.get("testbed", {}), base.testbed)
        flights = dict(base.flights)
        for name, tbl in data.get("flights", {}).items():
            flights[name] = _build_flight(tbl)
        sensors_tbl = data.get("sensors", {})
        baro_tbl = sensors_tbl.get("baro", {})
        baro = BaroModel(
            noise_sigma=baro_tbl.get("noise_sigma", base.baro.noise_sigma),
            drift_rate=baro_tbl.get("drift_rate", base.baro.drift_rate),
            initial_offset=baro_tbl.get("initial_offset", base.baro.initial_offset),
        )
        imu_tbl = sensors_tbl.get("imu", {})
        imu = ImuModel(
            accel_noise_sigma=imu_tbl.get("accel_noise_sigma", base.imu.accel_noise_sigma),
            accel_bias=np.asarray(imu_tbl.get("accel_bias", [0.0, 0.0, 0.0]), dtype=float),
            angle_noise_sigma=math.radians(imu_tbl["angle_noise_sigma_deg"])
            if "angle_noise_sigma_deg" in imu_tbl
            else base.imu.angle_noise_sigma,
        )
        solvers = data.get("solvers", {})
        ind_tbl = solvers.get("indirect_h", {})
        indirect = IndirectHConfig(
            height_range=tuple(ind_tbl["height_range"]) if "height_range" in ind_tbl else None,
            resolution=ind_tbl.get("resolution", base.indirect.resolution),
            fast_search=ind_tbl.get("fast_search", base.indirect.fast_search),
        )
        pso_tbl = solvers.get("pso_3d", {})
        pso = PsoConfig(
            swarm_size=pso_tbl.get("swarm_size", base.pso.swarm_size),
            iterations=pso_tbl.get("iterations", base.pso.iterations),
            search_bounds=np.asarray(pso_tbl["search_bounds"], dtype=float)
            if "search_bounds" in pso_tbl
            else None,
            inertia=pso_tbl.get("inertia", base.pso.inertia),
            cognitive=pso_tbl.get("cognitive", base.pso.cognitive),
            social=pso_tbl.get("social", base.pso.social),
        )
        fusion_tbl = solvers.get("fusion", {})
        filt = ComplementaryFilterConfig(
            gain=fusion_tbl.get("gain", base.filter.gain),
            dt=fusion_tbl.get("dt", base.filter.dt),
        )
        drift = DriftCorrectionConfig(
            epsilon=fusion_tbl.get("epsilon", base.drift.epsilon),
            tilt_threshold=math.radians(fusion_tbl["tilt_threshold_deg"])
            if "tilt_threshold_deg" in fusion_tbl
            else base.drift.tilt_threshold,
            stride_k=fusion_tbl.get("stride_k", base.drift.stride_k),
        )
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"invalid configuration in {path}: {exc}") from None

    return RunConfig(
        testbed=testbed,
        flights=flights,
        baro=baro,
        imu=imu,
        indirect=indirect,
        pso=pso,
        filter=filt,
        drift=drift,
        source_path=str(path),
        source_sha256=hashlib.sha256(raw_bytes).hexdigest(),
    )


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def config_manifest(cfg: RunConfig, seed, outputs) -> dict:
    """Everything needed to reproduce a run: resolved config, seed, versions."""
    resolved = {
        "testbed": {
            "extent": cfg.testbed.extent,
            "rss_floor": cfg.testbed.rss_floor,
            "beacon_sample_rate": cfg.testbed.beacon_sample_rate,
            "noise": asdict(cfg.testbed.noise),
            "photodiode": {
                "area": cfg.testbed.photodiode.area,
                "fov_half_angle": cfg.testbed.photodiode.fov_half_angle,
            },
            "luminaires": [
                {
                    "id": l.id,
                    "position": l.position,
                    "transmit_power": l.transmit_power,
                    "lambertian_order": l.lambertian_order,
                    "beacon_frequency": l.beacon_frequency,
                }
                for l in cfg.testbed.luminaires
            ],
        },
        "flights": {name: asdict(plan) for name, plan in cfg.flights.items()},
        "sensors": {"baro": asdict(cfg.baro), "imu": asdict(cfg.imu)},
        "solvers": {
            "indirect_h": asdict(cfg.indirect),
            "pso_3d": asdict(cfg.pso),
            "fusion": {**asdict(cfg.filter), **asdict(cfg.drift)},
        },
    }
    return _jsonable(
        {
            "seed": seed,
            "config_path": cfg.source_path,
            "config_sha256": cfg.source_sha256,
            "config": resolved,
            "versions": {
                "vlpsim": __version__,
                "numpy": np.__version__,
                "python": sys.version.split()[0],
            },
            "backend": BACKEND,
            "outputs": list(outputs),
        }
    )


def write_json_atomic(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)
