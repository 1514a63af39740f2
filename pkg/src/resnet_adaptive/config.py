"""Benchmark definition files.

The format is INI: ``[simulation]``, ``[scenario]``, ``[stability]``,
``[benchmark]`` and one ``[controller.<name>]`` section per controller.
Parsing is strict; unknown sections and keys are errors, and every violated
constraint is reported at once.
"""

from __future__ import annotations

import configparser
import io
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

from .adaptation import SearchSpace
from .control import CONTROLLER_KINDS, ControllerKind, Gains
from .network import ACTIVATIONS, NetworkSpec
from .simulate import DISTURBANCES, PLANTS, Scenario, SimConfig


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid benchmark config:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class ControllerConfig:
    name: str
    kind: str
    k1: float = 1.0
    k2: float = 3.0
    k3: float = 0.01
    neurons: int = 2
    layers: int = 2
    blocks: int = 0
    inner_activation: str = "swish"
    outer_activation: str = "tanh"
    shortcut_activation: str = "swish"
    gamma: float = 0.025
    theta_bar: float = 1.0
    boundary_layer: float = 0.05
    init_scale: float = 0.1

    @property
    def gains(self) -> Gains:
        return Gains(self.k1, self.k2, self.k3)

    def network(self, n: int) -> Optional[NetworkSpec]:
        if self.kind == "PD":
            return None
        if self.kind == "SNN":
            # a single hidden layer only has an outer activation
            return NetworkSpec.uniform(4 * n, n, self.neurons, 1, 0, self.outer_activation)
        blocks = self.blocks if self.kind == "ResNet" else 0
        return NetworkSpec.uniform(
            4 * n, n, self.neurons, self.layers, blocks,
            self.inner_activation, self.outer_activation, self.shortcut_activation,
        )

    def controller_kind(self, n: int) -> ControllerKind:
        return ControllerKind(self.kind, self.network(n))


NETWORK_KEYS = (
    "neurons", "layers", "blocks", "inner_activation", "outer_activation",
    "shortcut_activation", "gamma", "theta_bar", "boundary_layer", "init_scale",
)


@dataclass(frozen=True)
class BenchmarkSpec:
    controllers: tuple[ControllerConfig, ...]
    baseline: str
    scenario: Scenario = field(default_factory=Scenario)
    dt: float = 0.02
    duration: float = 360.0
    seeds: tuple[int, ...] = (0,)
    stride: int = 1
    zoh: bool = False
    eps_bar: float = 0.1
    lambda_v: float = 0.1
    a2: float = 0.0
    a1: float = 0.0
    a0: float = 0.0

    def controller(self, name: str) -> ControllerConfig:
        for c in self.controllers:
            if c.name == name:
                return c
        raise KeyError(name)

    def sim_config(self, ctrl: ControllerConfig, seed: int) -> SimConfig:
        n = len(self.scenario.offset)
        kind = ctrl.controller_kind(n)
        space = None if kind.network is None else SearchSpace(ctrl.theta_bar, ctrl.boundary_layer)
        return SimConfig(
            controller=kind,
            gains=ctrl.gains,
            dt=self.dt,
            duration=self.duration,
            learning_rate=ctrl.gamma,
            search_space=space,
            seed=seed,
            init_scale=ctrl.init_scale,
            scenario=self.scenario,
            stride=self.stride,
            zoh=self.zoh,
        )

    def with_seed(self, seed: int) -> "BenchmarkSpec":
        return replace(self, seeds=(seed,))


# ---------------------------------------------------------------------------
# Defaults
# ---------------------------------------------------------------------------

def default_spec() -> BenchmarkSpec:
    """Desk-scale comparison: designed gains with the reference network sizes."""
    return BenchmarkSpec(
        controllers=(
            ControllerConfig("PD", "PD"),
            ControllerConfig("SNN", "SNN", neurons=8, layers=1, gamma=0.05, theta_bar=4.0),
            ControllerConfig("DNN", "DNN", neurons=2, layers=32, gamma=0.1, theta_bar=8.0),
            ControllerConfig("ResNet", "ResNet", neurons=2, layers=2, blocks=4, gamma=0.025, theta_bar=1.0),
        ),
        baseline="PD",
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_SIM_KEYS = ("dt", "duration", "seeds", "stride", "zoh")
_SCENARIO_KEYS = tuple(f.name for f in fields(Scenario))
_STABILITY_KEYS = ("eps_bar", "lambda_v", "a2", "a1", "a0")

_COMMENTS = {
    "simulation": "dt, duration in seconds; seeds: comma-separated; zoh: hold u over each step",
    "scenario": f"plant in {PLANTS}; disturbance in {DISTURBANCES}; offset = initial q - q_d",
    "stability": "bookkeeping only: reconstruction bound, rate parameter, remainder polynomial a2 s^2 + a1 s + a0",
    "benchmark": "baseline names the controller used for percent improvements",
}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_text(spec: BenchmarkSpec) -> str:
    out = io.StringIO()

    def section(name, items, comment=None):
        if comment:
            out.write(f"# {comment}\n")
        out.write(f"[{name}]\n")
        for k, v in items:
            out.write(f"{k} = {_fmt(v)}\n")
        out.write("\n")

    section("simulation", [(k, getattr(spec, k)) for k in _SIM_KEYS], _COMMENTS["simulation"])
    section("scenario", [(k, getattr(spec.scenario, k)) for k in _SCENARIO_KEYS], _COMMENTS["scenario"])
    section("stability", [(k, getattr(spec, k)) for k in _STABILITY_KEYS], _COMMENTS["stability"])
    section("benchmark", [("baseline", spec.baseline)], _COMMENTS["benchmark"])
    for c in spec.controllers:
        keys = ["kind", "k1", "k2", "k3"]
        if c.kind != "PD":
            keys += list(NETWORK_KEYS)
        section(f"controller.{c.name}", [(k, getattr(c, k)) for k in keys])
    return out.getvalue().rstrip("\n") + "\n"


def print_config() -> str:
    header = (
        "# resnet-adaptive benchmark definition (defaults shown)\n"
        f"# controller kinds: {CONTROLLER_KINDS}; activations: {ACTIVATIONS}\n"
        "# PD sections take only kind and gains; network keys are rejected there\n\n"
    )
    return header + to_text(default_spec())


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")


def _locate(text: str) -> dict[tuple[str, str], int]:
    where, section = {}, None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            where[(section, "")] = lineno
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), lineno)
    return where


class _Reader:
    def __init__(self, parser, where, problems):
        self.parser, self.where, self.problems = parser, where, problems

    def _loc(self, section, key):
        line = self.where.get((section, key))
        return f"line {line}: [{section}] {key}" if line else f"[{section}] {key}"

    def get(self, section, key, conv, default):
        if not self.parser.has_option(section, key):
            return default
        raw = self.parser.get(section, key)
        try:
            return conv(raw)
        except (TypeError, ValueError) as exc:
            self.problems.append(f"{self._loc(section, key)}: cannot parse {raw!r} ({exc})")
            return default

    def check(self, ok, section, key, message):
        if not ok:
            self.problems.append(f"{self._loc(section, key)}: {message}")


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true/false")


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.split(",") if x.strip())


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.split(",") if x.strip())


def _word(raw: str) -> str:
    v = raw.strip()
    if not v or any(ch.isspace() for ch in v):
        raise ValueError("expected a single word")
    return v


_CONTROLLER_TYPES = {
    "kind": _word, "k1": float, "k2": float, "k3": float,
    "neurons": int, "layers": int, "blocks": int,
    "inner_activation": _word, "outer_activation": _word, "shortcut_activation": _word,
    "gamma": float, "theta_bar": float, "boundary_layer": float, "init_scale": float,
}
_SCENARIO_TYPES = {
    "plant": _word, "c1": float, "c2": float, "disturbance": _word, "omega_bar": float,
    "extent_x": float, "extent_y": float, "period": float, "offset": _floats,
}


def parse_text(text: str, source: str = "<config>") -> BenchmarkSpec:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"{source}: {exc}"]) from exc
    where = _locate(text)
    problems: list[str] = []
    rd = _Reader(parser, where, problems)

    allowed = {
        "simulation": set(_SIM_KEYS),
        "scenario": set(_SCENARIO_KEYS),
        "stability": set(_STABILITY_KEYS),
        "benchmark": {"baseline"},
    }
    ctrl_sections = []
    if parser.defaults():
        problems.append("[DEFAULT] section is not supported")
    for sec in parser.sections():
        if sec.startswith("controller."):
            ctrl_sections.append(sec)
            keys = set(_CONTROLLER_TYPES)
        elif sec in allowed:
            keys = allowed[sec]
        else:
            problems.append(f"line {where.get((sec, ''), '?')}: unknown section [{sec}]")
            continue
        for key in parser.options(sec):
            if key not in keys:
                problems.append(f"{rd._loc(sec, key)}: unknown key")

    d = default_spec()
    ds = d.scenario
    scen_kwargs = {k: rd.get("scenario", k, conv, getattr(ds, k)) for k, conv in _SCENARIO_TYPES.items()}
    rd.check(scen_kwargs["plant"] in PLANTS, "scenario", "plant", f"must be one of {PLANTS}")
    rd.check(scen_kwargs["disturbance"] in DISTURBANCES, "scenario", "disturbance", f"must be one of {DISTURBANCES}")
    for k in ("c1", "c2", "omega_bar"):
        rd.check(scen_kwargs[k] >= 0, "scenario", k, "must be nonnegative")
    for k in ("extent_x", "extent_y", "period"):
        rd.check(scen_kwargs[k] > 0, "scenario", k, "must be positive")
    rd.check(len(scen_kwargs["offset"]) == 2, "scenario", "offset", "needs 2 components (planar plant)")

    dt = rd.get("simulation", "dt", float, d.dt)
    duration = rd.get("simulation", "duration", float, d.duration)
    seeds = rd.get("simulation", "seeds", _ints, d.seeds)
    stride = rd.get("simulation", "stride", int, d.stride)
    zoh = rd.get("simulation", "zoh", _bool, d.zoh)
    rd.check(dt > 0, "simulation", "dt", "must be positive")
    rd.check(duration >= 0, "simulation", "duration", "must be nonnegative")
    rd.check(duration == 0 or dt <= duration, "simulation", "dt", "must not exceed duration")
    rd.check(len(seeds) >= 1, "simulation", "seeds", "need at least one seed")
    rd.check(all(0 <= s < 2**64 for s in seeds), "simulation", "seeds", "seeds must be 64-bit unsigned")
    rd.check(stride >= 1, "simulation", "stride", "must be >= 1")

    stab = {k: rd.get("stability", k, float, getattr(d, k)) for k in _STABILITY_KEYS}
    rd.check(stab["eps_bar"] >= 0, "stability", "eps_bar", "must be nonnegative")
    rd.check(stab["lambda_v"] > 0, "stability", "lambda_v", "must be positive")
    for k in ("a2", "a1", "a0"):
        rd.check(stab[k] >= 0, "stability", k, "must be nonnegative")

    controllers = []
    base = ControllerConfig("_", "PD")
    for sec in ctrl_sections:
        name = sec[len("controller."):]
        rd.check(bool(re.fullmatch(r"[A-Za-z0-9_\-]+", name)), sec, "", "controller name must be [A-Za-z0-9_-]+")
        if not parser.has_option(sec, "kind"):
            rd.check(False, sec, "kind", "missing required key")
            continue
        vals = {k: rd.get(sec, k, conv, getattr(base, k)) for k, conv in _CONTROLLER_TYPES.items()}
        kind = vals["kind"]
        if kind not in CONTROLLER_KINDS:
            rd.check(False, sec, "kind", f"must be one of {CONTROLLER_KINDS}")
            continue
        if kind == "PD":
            for k in NETWORK_KEYS:
                rd.check(not parser.has_option(sec, k), sec, k, "not allowed for a PD controller")
        rd.check(vals["k1"] > 0, sec, "k1", "must be positive")
        rd.check(vals["k2"] > 0, sec, "k2", "must be positive")
        rd.check(vals["k3"] >= 0, sec, "k3", "must be nonnegative")
        if kind != "PD":
            rd.check(vals["neurons"] >= 1, sec, "neurons", "must be >= 1")
            rd.check(vals["layers"] >= 1, sec, "layers", "must be >= 1")
            for k in ("inner_activation", "outer_activation", "shortcut_activation"):
                rd.check(vals[k] in ACTIVATIONS, sec, k, f"must be one of {ACTIVATIONS}")
            rd.check(vals["gamma"] > 0, sec, "gamma", "must be positive")
            rd.check(vals["theta_bar"] > 0, sec, "theta_bar", "must be positive")
            rd.check(0 < vals["boundary_layer"] < 1, sec, "boundary_layer", "must lie in (0, 1)")
            rd.check(vals["init_scale"] >= 0, sec, "init_scale", "must be nonnegative")
        if kind == "ResNet":
            rd.check(vals["blocks"] >= 1, sec, "blocks", "ResNet requires blocks >= 1")
        elif kind in ("SNN", "DNN"):
            rd.check(vals["blocks"] == 0, sec, "blocks", f"{kind} must have blocks = 0")
        if kind == "SNN":
            rd.check(vals["layers"] == 1, sec, "layers", "SNN has exactly one hidden layer")
        controllers.append(ControllerConfig(name=name, **vals))

    if not ctrl_sections:
        problems.append("at least one [controller.<name>] section is required")
    names = [c.name for c in controllers]
    baseline = rd.get("benchmark", "baseline", _word, names[0] if names else "")
    if controllers:
        rd.check(baseline in names, "benchmark", "baseline", f"must name a controller, one of {names}")

    if problems:
        raise ConfigError(problems)
    return BenchmarkSpec(
        controllers=tuple(controllers),
        baseline=baseline,
        scenario=Scenario(**scen_kwargs),
        dt=dt,
        duration=duration,
        seeds=seeds,
        stride=stride,
        zoh=zoh,
        **stab,
    )


def parse_config(path: Union[str, Path]) -> BenchmarkSpec:
    path = Path(path)
    return parse_text(path.read_text(), source=str(path))
