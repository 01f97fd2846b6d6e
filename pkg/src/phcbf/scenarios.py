"""Named experiment presets, config handling and the scenario runner.

Each preset reproduces one panel family of the three desk-scale
experiments: total-energy bounds on a mass-spring oscillator, a kinetic
energy cap on the same plant, and a double pendulum turned into an
energy-regulated nonlinear oscillator.  A scenario is a plant, an
energy-shaped barrier, an initial state and a gamma sweep; running one
produces per-gamma CSV trajectories, SVG panels, an audit report and a
fully resolved copy of the configuration for provenance.

Configs are plain YAML with every physical parameter spelled out
literally, so runs are diffable against their definitions.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .barrier import ClassK
from .io import write_trajectory_csv
from .mechanics import (EnergyCbfSpec, MechanicalSystem, barrier_from_spec,
                        make_double_pendulum, make_mass_spring, to_ph,
                        validate_mechanical)
from .numerics import sample_states
from .simulate import SimConfig, Trajectory, audit, detect_limit_cycle, simulate
from .svgplot import line_chart

OUTPUT_DIR_ENV = "PHCBF_OUT"

_PLANT_KINDS = ("mass_spring", "double_pendulum")
_BARRIER_KINDS = ("total_energy", "kinetic_energy")
_BOUNDS = ("upper", "lower")


class ConfigError(ValueError):
    """A scenario configuration field is missing or invalid."""


@dataclass(frozen=True)
class BarrierConfig:
    kind: str = "total_energy"
    bound: str = "upper"
    c: float = 10.0
    gammas: tuple[float, ...] = (0.5, 1.0, 2.0, 5.0)
    t_on: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gammas", tuple(float(g) for g in self.gammas))
        if self.kind not in _BARRIER_KINDS:
            raise ConfigError(f"barrier.kind must be one of {_BARRIER_KINDS}, got {self.kind!r}")
        if self.bound not in _BOUNDS:
            raise ConfigError(f"barrier.bound must be one of {_BOUNDS}, got {self.bound!r}")
        if not self.gammas:
            raise ConfigError("barrier.gammas must be a nonempty list of positive gains")
        if any(g <= 0 for g in self.gammas):
            raise ConfigError(f"barrier.gammas must be positive, got {self.gammas}")
        if self.t_on < 0:
            raise ConfigError(f"barrier.t_on must be nonnegative, got {self.t_on}")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    plant: dict = field(default_factory=lambda: {"kind": "mass_spring"})
    barrier: BarrierConfig = field(default_factory=BarrierConfig)
    x0: tuple[float, ...] = (0.0, 8.0)
    sim: SimConfig = field(default_factory=lambda: SimConfig(t_end=12.0))
    out: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        kind = self.plant.get("kind")
        if kind not in _PLANT_KINDS:
            raise ConfigError(f"plant.kind must be one of {_PLANT_KINDS}, got {kind!r}")


def build_plant(plant: dict) -> MechanicalSystem:
    kind = plant.get("kind")
    params = {k: v for k, v in plant.items() if k != "kind"}
    try:
        if kind == "mass_spring":
            return make_mass_spring(**params)
        if kind == "double_pendulum":
            return make_double_pendulum(**params)
    except TypeError as exc:
        raise ConfigError(f"invalid plant parameter for {kind}: {exc}") from exc
    raise ConfigError(f"plant.kind must be one of {_PLANT_KINDS}, got {kind!r}")


def build_barrier_spec(ms: MechanicalSystem, bc: BarrierConfig, gamma: float) -> EnergyCbfSpec:
    """Translate a barrier description into an energy-shaped CBF spec.

    Upper bounds use h = c - E (sign -1 on the kinetic term), lower bounds
    h = E - c (sign +1); for total-energy barriers the potential joins the
    configuration term with the matching sign.
    """
    sign = -1 if bc.bound == "upper" else +1
    offset = -sign * bc.c
    alpha = ClassK(gamma=gamma)
    if bc.kind == "total_energy":
        s = float(sign)
        return EnergyCbfSpec(sign=sign,
                             position_term=lambda q: s * float(ms.potential(q)),
                             grad_position_term=lambda q: s * np.asarray(ms.grad_potential(q)),
                             c=offset, alpha=alpha, t_on=bc.t_on)
    return EnergyCbfSpec(sign=sign, c=offset, alpha=alpha, t_on=bc.t_on)


def _pendulum_x0() -> tuple[float, ...]:
    # Rest at the bottom plus an initial push: qdot = (1.2, 0.4) rad/s,
    # which puts H0 about 7 J above the energy minimum.
    ms = make_double_pendulum()
    p0 = ms.mass(np.zeros(2)) @ np.array([1.2, 0.4])
    return (0.0, 0.0, float(p0[0]), float(p0[1]))


def _presets() -> dict[str, ScenarioConfig]:
    ms_plant = {"kind": "mass_spring", "m": 2.0, "k": 0.5}
    dp_plant = {"kind": "double_pendulum", "m1": 1.5, "m2": 1.5,
                "l1": 1.0, "l2": 1.0, "b": 0.3, "gravity": 9.81}
    sweep = (0.5, 1.0, 2.0, 5.0)
    return {
        "fig1-left": ScenarioConfig(
            name="fig1-left", plant=ms_plant,
            barrier=BarrierConfig(kind="total_energy", bound="upper", c=10.0, gammas=sweep),
            x0=(0.0, 8.0), sim=SimConfig(dt=1e-3, t_end=12.0)),
        "fig1-right": ScenarioConfig(
            name="fig1-right", plant=ms_plant,
            barrier=BarrierConfig(kind="total_energy", bound="lower", c=10.0, gammas=sweep),
            x0=(0.0, 2.0), sim=SimConfig(dt=1e-3, t_end=24.0)),
        "fig2-left": ScenarioConfig(
            name="fig2-left", plant=ms_plant,
            barrier=BarrierConfig(kind="kinetic_energy", bound="upper", c=20.0, gammas=sweep),
            x0=(8.0, 6.0), sim=SimConfig(dt=1e-3, t_end=20.0)),
        "fig2-right": ScenarioConfig(
            name="fig2-right", plant=ms_plant,
            barrier=BarrierConfig(kind="kinetic_energy", bound="upper", c=20.0, gammas=sweep),
            x0=(0.0, 10.0), sim=SimConfig(dt=1e-3, t_end=20.0)),
        "fig3": ScenarioConfig(
            name="fig3", plant=dp_plant,
            barrier=BarrierConfig(kind="total_energy", bound="lower", c=-40.0,
                                  gammas=(2.0,), t_on=10.0),
            x0=_pendulum_x0(), sim=SimConfig(dt=1e-3, t_end=30.0)),
    }


PRESET_DESCRIPTIONS = {
    "fig1-left": "mass-spring, total energy bounded above by c=10 J (damping injection)",
    "fig1-right": "mass-spring, total energy bounded below by c=10 J (energy injection)",
    "fig2-left": "mass-spring, kinetic energy capped at c=20 J, start inside the safe set",
    "fig2-right": "mass-spring, kinetic energy capped at c=20 J, start outside the safe set",
    "fig3": "double pendulum, total-energy lower bound c=-40 J switched on at t=10 s; "
            "sustains a limit cycle against joint damping",
}


def preset_config(name: str) -> ScenarioConfig:
    presets = _presets()
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(presets)}")
    return presets[name]


def list_presets() -> list[tuple[str, str]]:
    """Names and one-line descriptions of the preset registry."""
    return [(name, PRESET_DESCRIPTIONS[name]) for name in _presets()]


def config_to_dict(cfg: ScenarioConfig) -> dict:
    d = asdict(cfg)
    d["barrier"]["gammas"] = list(cfg.barrier.gammas)
    d["x0"] = list(cfg.x0)
    return d


def config_from_dict(d: dict) -> ScenarioConfig:
    if not isinstance(d, dict):
        raise ConfigError("config root must be a mapping")
    known = {"name", "plant", "barrier", "x0", "sim", "out"}
    for key in d:
        if key not in known:
            raise ConfigError(f"unknown config field {key!r}")
    try:
        barrier = BarrierConfig(**d.get("barrier", {}))
        sim = SimConfig(**d.get("sim", {}))
    except TypeError as exc:
        raise ConfigError(f"invalid config field: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ScenarioConfig(name=str(d.get("name", "custom")),
                          plant=dict(d.get("plant", {"kind": "mass_spring"})),
                          barrier=barrier,
                          x0=tuple(float(v) for v in d.get("x0", ())),
                          sim=sim, out=d.get("out"))


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path) as fh:
        return config_from_dict(yaml.safe_load(fh))


@dataclass
class ScenarioResult:
    name: str
    out_dir: Path
    files: list[Path]
    trajectories: dict[float, Trajectory]
    audits: dict[float, object]
    passed: bool


def scenario_trajectories(cfg: ScenarioConfig) -> dict[float, Trajectory]:
    """Simulate every gamma of a scenario, no files written.

    The gamma runs are independent pure computations keyed by gamma.
    """
    ms = build_plant(cfg.plant)
    sys = to_ph(ms)
    if len(cfg.x0) != sys.n:
        raise ConfigError(f"x0 has length {len(cfg.x0)}, plant state dimension is {sys.n}")
    x0 = np.array(cfg.x0, dtype=float)
    out: dict[float, Trajectory] = {}
    for gamma in cfg.barrier.gammas:
        spec = build_barrier_spec(ms, cfg.barrier, gamma)
        bar = barrier_from_spec(ms, spec)
        meta = {"scenario": cfg.name, "gamma": gamma, "t_on": cfg.barrier.t_on,
                "plant": cfg.plant.get("kind"), "barrier_kind": cfg.barrier.kind,
                "bound": cfg.barrier.bound, "c": cfg.barrier.c}
        out[gamma] = simulate(x0, sys, bar, cfg.sim, mech=ms, meta=meta)
    return out


def _panel_files(traj: Trajectory, ms: MechanicalSystem, gamma_dir: Path,
                 gamma: float) -> list[Path]:
    dof = ms.dof
    t = traj.t
    files = []

    def emit(name: str, svg: str) -> None:
        p = gamma_dir / name
        p.write_text(svg)
        files.append(p)

    if dof == 1:
        emit("phase.svg", line_chart([(f"gamma={gamma:g}", traj.x[:, 0], traj.x[:, 1])],
                                     title="phase space", xlabel="q", ylabel="p"))
    else:
        emit("phase.svg", line_chart([(f"gamma={gamma:g}", traj.x[:, 0], traj.x[:, 1])],
                                     title="joint trajectory", xlabel="q1", ylabel="q2"))
    emit("cbf.svg", line_chart([(f"gamma={gamma:g}", t, traj.h)],
                               title="barrier value", xlabel="t [s]", ylabel="h"))
    emit("input.svg", line_chart(
        [(f"u{i + 1}", t, traj.u[:, i]) for i in range(traj.m)],
        title="safety-critical input", xlabel="t [s]", ylabel="u"))
    emit("energy.svg", line_chart([(f"gamma={gamma:g}", t, traj.H)],
                                  title="total energy", xlabel="t [s]", ylabel="H [J]"))
    if dof > 1:
        win = max(1, int(round(1.0 / max(t[1] - t[0], 1e-9))))
        kernel = np.ones(win) / win
        avg_inj = np.convolve(traj.p_inj, kernel, mode="same")
        avg_diss = np.convolve(traj.p_diss, kernel, mode="same")
        emit("power.svg", line_chart(
            [("p_inj", t, traj.p_inj), ("p_diss", t, traj.p_diss),
             ("p_inj (1s avg)", t, avg_inj), ("p_diss (1s avg)", t, avg_diss)],
            title="power balance terms", xlabel="t [s]", ylabel="P [W]"))
    return files


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None,
                 seed: int | None = 0) -> ScenarioResult:
    """Simulate a scenario for every gamma and write all artifacts.

    Output layout: ``<out>/<gamma-G>/traj.csv`` plus one SVG per panel,
    with ``config.yaml`` and ``audit.json`` at the scenario root.  The
    gamma runs are independent pure computations; they are executed in
    sequence here and merged by gamma key.
    """
    root = Path(os.environ.get(OUTPUT_DIR_ENV) or out_dir or cfg.out or f"runs/{cfg.name}")
    root.mkdir(parents=True, exist_ok=True)

    ms = build_plant(cfg.plant)
    mech_report = validate_mechanical(ms, sample_states(ms.dof, 25, (-1.5, 1.5), seed))
    if not mech_report.passed:
        raise ConfigError(f"plant failed structural validation: {mech_report.failures}")

    files: list[Path] = []
    audits: dict[float, object] = {}
    audit_blob: dict[str, dict] = {}
    trajectories = scenario_trajectories(cfg)

    for gamma, traj in trajectories.items():
        gamma_dir = root / f"gamma-{gamma:g}"
        gamma_dir.mkdir(parents=True, exist_ok=True)
        files.append(write_trajectory_csv(traj, gamma_dir / "traj.csv"))
        files.extend(_panel_files(traj, ms, gamma_dir, gamma))
        rep = audit(traj)
        audits[gamma] = rep
        entry = asdict(rep)
        entry["passed"] = rep.passed
        if ms.dof > 1:
            lc = detect_limit_cycle(traj, window=min(10.0, cfg.sim.t_end / 2.5), band=1.0)
            entry["limit_cycle"] = asdict(lc)
        audit_blob[f"{gamma:g}"] = entry

    cfg_path = root / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))
    files.append(cfg_path)
    audit_path = root / "audit.json"
    audit_path.write_text(json.dumps(audit_blob, indent=2, default=float) + "\n")
    files.append(audit_path)

    passed = all(rep.passed for rep in audits.values())
    return ScenarioResult(name=cfg.name, out_dir=root, files=files,
                          trajectories=trajectories, audits=audits, passed=passed)
