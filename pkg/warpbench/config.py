"""Scenario files: INI sections [manifold], [tail], [weight], [scenario], [calibration]."""

from __future__ import annotations

import configparser
import logging
from collections.abc import Iterable, Mapping
from pathlib import Path

import numpy as np

from warpbench.errors import ConfigError, WarpbenchError
from warpbench.geometry import build_manifold
from warpbench.models import Calibration, Command, GridSpec, ModelManifold, Scenario
from warpbench.profiles import build_profile

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
SECTIONS = ("manifold", "tail", "weight", "scenario", "calibration")
WEIGHT_KINDS = ("none", "constant", "bump")

# keys a command cannot run without
REQUIRED_PARAMS: dict[Command, tuple[str, ...]] = {
    Command.SWEEP: ("sweep_of", "sweep_param"),
}


def parse_calibration(pairs: Iterable[str]) -> dict[str, float]:
    """['c_green=0.1', ...] -> {'c_green': 0.1}; raises ConfigError on malformed pairs."""
    out: dict[str, float] = {}
    for pair in pairs:
        key, sep, raw = pair.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"Calibration override must be key=val, got {pair!r}")
        try:
            out[key.strip()] = float(raw)
        except ValueError as e:
            raise ConfigError(f"Calibration {key.strip()} must be a number, got {raw!r}") from e
    return out


def parse_floats(raw: str, key: str = "value") -> list[float]:
    """Comma- or whitespace-separated numbers."""
    try:
        values = [float(tok) for tok in raw.replace(",", " ").split()]
    except ValueError as e:
        raise ConfigError(f"{key} must be a list of numbers, got {raw!r}") from e
    return values


def param_floats(params: Mapping[str, str], key: str, default: Iterable[float]) -> list[float]:
    if key not in params:
        return [float(v) for v in default]
    values = parse_floats(params[key], key)
    if not values:
        raise ConfigError(f"[scenario] {key} is empty")
    return values


def param_float(params: Mapping[str, str], key: str, default: float | None) -> float | None:
    if key not in params:
        return default
    try:
        return float(params[key])
    except ValueError as e:
        raise ConfigError(f"[scenario] {key} must be a number, got {params[key]!r}") from e


def param_int(params: Mapping[str, str], key: str, default: int) -> int:
    value = param_float(params, key, default)
    if value is None or value != int(value):
        raise ConfigError(f"[scenario] {key} must be an integer, got {params.get(key)!r}")
    return int(value)


def param_mesh(params: Mapping[str, str], default: tuple[int, int] = (512, 256)) -> tuple[int, int]:
    """'512x256' -> (512, 256)."""
    raw = params.get("mesh")
    if raw is None:
        return default
    parts = raw.lower().replace(" ", "").split("x")
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise ConfigError(f"[scenario] mesh must look like 512x256, got {raw!r}")
    return int(parts[0]), int(parts[1])


def sweep_values(params: Mapping[str, str]) -> list[float]:
    """The sweep grid from sweep_values = a, b, ... or sweep_log = lo, hi, count."""
    if "sweep_values" in params:
        values = parse_floats(params["sweep_values"], "sweep_values")
    elif "sweep_log" in params:
        bounds = parse_floats(params["sweep_log"], "sweep_log")
        if len(bounds) != 3 or bounds[0] <= 0 or bounds[1] <= 0 or bounds[2] != int(bounds[2]):
            raise ConfigError(f"sweep_log must be 'lo, hi, count' with lo, hi > 0, got {bounds}")
        values = np.geomspace(bounds[0], bounds[1], int(bounds[2])).tolist()
    else:
        values = []
    if not values:
        raise ConfigError("Sweep grid is empty: set sweep_values or sweep_log")
    return values


def _validate(scenario: Scenario) -> Scenario:
    if not scenario.tol > 0:
        raise ConfigError(f"Tolerance must be positive, got {scenario.tol}")
    if scenario.parallel < 1:
        raise ConfigError(f"--parallel must be at least 1, got {scenario.parallel}")
    if "n" not in scenario.manifold:
        raise ConfigError("[manifold] needs n")
    kind = str(scenario.weight.get("kind", "none")).lower()
    if kind not in WEIGHT_KINDS:
        raise ConfigError(f"Unknown weight kind '{kind}'. Use {'/'.join(WEIGHT_KINDS)}.")
    missing = [k for k in REQUIRED_PARAMS.get(scenario.command, ()) if k not in scenario.params]
    if missing:
        raise ConfigError(f"{scenario.command.value} needs [scenario] {', '.join(missing)}")
    if scenario.command is Command.SWEEP:
        sweep_values(scenario.params)
        try:
            target = Command(scenario.params["sweep_of"])
        except ValueError as e:
            raise ConfigError(f"Unknown sweep_of command {scenario.params['sweep_of']!r}") from e
        if target is Command.SWEEP:
            raise ConfigError("A sweep cannot sweep another sweep")
    return scenario


def load_scenario(
    path: str | Path,
    command: Command | str | None = None,
    tol: float | None = None,
    calibration: Mapping[str, float] | None = None,
    out_dir: str | None = None,
    parallel: int = 1,
) -> Scenario:
    """Read a scenario file; explicit arguments override the file's values."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        read = parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError(f"Cannot parse {path}: {e}") from e
    if not read:
        raise ConfigError(f"Cannot read scenario file {path}")
    unknown = set(parser.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"Unknown sections in {path}: {sorted(unknown)}")
    if not parser.has_section("manifold"):
        raise ConfigError(f"{path} has no [manifold] section")

    def section(name: str) -> dict[str, str]:
        return dict(parser.items(name)) if parser.has_section(name) else {}

    manifold = section("manifold")
    if "samples" in manifold and not Path(manifold["samples"]).is_absolute():
        manifold["samples"] = str((path.parent / manifold["samples"]).resolve())
    params = section("scenario")

    file_command = params.pop("command", None)
    raw_command = command or file_command
    cli_command = getattr(command, "value", command)
    if cli_command and file_command and cli_command != file_command:
        logger.warning(f"Command {cli_command} overrides [scenario] command = {file_command}")
    if raw_command is None:
        raise ConfigError(f"{path}: no command given on the command line or in [scenario]")
    try:
        command = Command(raw_command)
    except ValueError as e:
        raise ConfigError(f"Unknown command {raw_command!r}") from e

    file_tol = param_float(params, "tol", DEFAULT_TOL)
    params.pop("tol", None)

    try:
        tail = {k: float(v) for k, v in section("tail").items()}
    except ValueError as e:
        raise ConfigError(f"[tail] values must be numbers: {e}") from e

    overrides = parse_calibration(f"{k}={v}" for k, v in section("calibration").items())
    overrides.update(calibration or {})
    try:
        cal = Calibration().with_overrides(**overrides)
    except WarpbenchError as e:
        raise ConfigError(str(e)) from e

    scenario = Scenario(
        name=params.pop("name", path.stem),
        command=command,
        manifold=manifold,
        tail=tail,
        weight=section("weight"),
        params=params,
        calibration=cal,
        tol=tol if tol is not None else file_tol,
        out_dir=out_dir,
        parallel=parallel,
    )
    logger.info(f"Loaded scenario '{scenario.name}' ({command.value}) from {path}")
    return _validate(scenario)


def build_scenario_manifold(scenario: Scenario) -> ModelManifold:
    """The model manifold a scenario's [manifold] and [tail] sections describe."""
    m = scenario.manifold
    try:
        n = int(m["n"])
        grid = GridSpec(
            r_min=float(m.get("r_min", 1e-6)),
            r_max=float(m.get("r_max", 1e4)),
            count=int(m.get("grid_points", 4096)),
        )
    except (KeyError, ValueError) as e:
        raise ConfigError(f"[manifold] n, r_min, r_max and grid_points must be numbers: {e}") from e
    return build_manifold(n, build_profile(m, scenario.tail), grid)
