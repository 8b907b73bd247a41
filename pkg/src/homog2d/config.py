"""TOML run configurations for ``solve`` and ``homogenize``.

Validation never stops at the first problem: :func:`parse_config` collects
every violation (with its key path) and raises one :class:`ConfigError`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .experiment import SweepConfig
from .solver import IC_KINDS, ICSpec, PhysParams

DEFAULT_CFL = 0.4
DEFAULT_TOL = 1e-8
DEFAULT_OUT = "out"
OUT_ENV = "HOMOG2D_OUT_DIR"
COMMANDS = ("solve", "homogenize")


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.violations))


@dataclass(frozen=True)
class RunConfig:
    command: str
    L: float
    n: int
    eps: float
    phys: PhysParams
    ic: ICSpec
    T: float
    cfl: float = DEFAULT_CFL
    checkpoints: int | tuple[float, ...] = 40
    tol: float = DEFAULT_TOL
    seed: int = 0
    eps_list: tuple[float, ...] = ()
    theta: float | None = None
    out_dir: str | None = None
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def sweep(self) -> SweepConfig:
        if not isinstance(self.checkpoints, int):
            raise ConfigError(["time.checkpoints: a sweep needs an integer number of checkpoint intervals"])
        return SweepConfig(
            eps_list=self.eps_list,
            L=self.L,
            n=self.n,
            phys=self.phys,
            ic=self.ic,
            T=self.T,
            checkpoints=self.checkpoints,
            cfl=self.cfl,
            theta=self.theta,
        )


_MISSING = object()


class _Reader:
    def __init__(self, data: dict):
        self.data = data
        self.errors: list[str] = []

    def get(self, path: str, kind, default=_MISSING):
        node: Any = self.data
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                if default is _MISSING:
                    self.errors.append(f"{path}: missing required key")
                    return None
                return default
            node = node[part]
        return self._coerce(path, node, kind)

    def _coerce(self, path, value, kind):
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                self.errors.append(f"{path}: expected a number, got {type(value).__name__}")
                return None
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                self.errors.append(f"{path}: expected an integer, got {type(value).__name__}")
                return None
            return value
        if kind is str:
            if not isinstance(value, str):
                self.errors.append(f"{path}: expected a string, got {type(value).__name__}")
                return None
            return value
        if kind == "floats":
            if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
            ):
                self.errors.append(f"{path}: expected an array of numbers")
                return None
            return tuple(float(v) for v in value)
        if kind == "checkpoints":
            if isinstance(value, int) and not isinstance(value, bool):
                return value
            return self._coerce(path, value, "floats")
        raise TypeError(kind)


def load_toml(path: str | os.PathLike) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"{p}: config file not found"])
    try:
        with p.open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{p}: malformed config: {exc}"]) from None


def parse_config(path: str | os.PathLike, command: str = "solve") -> RunConfig:
    return config_from_dict(load_toml(path), command)


def config_from_dict(data: dict, command: str = "solve") -> RunConfig:
    if command not in COMMANDS:
        raise ConfigError([f"command: unknown command {command!r}"])
    r = _Reader(data)
    L = r.get("grid.L", float)
    n = r.get("grid.n", int)
    eps = r.get("hole.eps", float, 0.0)
    mu = r.get("phys.mu", float)
    lam = r.get("phys.lambda", float)
    gamma = r.get("phys.gamma", float)
    kind = r.get("ic.kind", str, "bump")
    amp = r.get("ic.amplitude", float, 0.2)
    sigma = r.get("ic.sigma", float, 0.1)
    center = r.get("ic.center", "floats", (-0.15, 0.0))
    T = r.get("time.T", float)
    cfl = r.get("time.cfl", float, DEFAULT_CFL)
    checkpoints = r.get("time.checkpoints", "checkpoints", 40)
    tol = r.get("solver.tol", float, DEFAULT_TOL)
    seed = r.get("seed", int, 0)
    out_dir = r.get("output.dir", str, None)
    eps_list = r.get("sweep.eps_list", "floats", () if command == "solve" else _MISSING)
    theta = r.get("sweep.theta", float, None)
    errs = r.errors

    if L is not None and not L > 0:
        errs.append(f"grid.L: must be positive, got {L}")
    if n is not None and (n < 16 or n % 2):
        errs.append(f"grid.n: must be an even integer >= 16, got {n}")
    if L is not None and eps is not None:
        if eps < 0:
            errs.append(f"hole.eps: must be non-negative, got {eps}")
        elif eps >= L / 4:
            errs.append(f"hole.eps: geometric violation, eps={eps} must be below L/4={L / 4}")
    if mu is not None and not mu > 0:
        errs.append(f"phys.mu: must be positive, got {mu}")
    if lam is not None and not lam >= 0:
        errs.append(f"phys.lambda: must be non-negative, got {lam}")
    if gamma is not None:
        if not gamma > 1:
            errs.append(f"phys.gamma: must exceed 1, got {gamma}")
        elif command == "homogenize" and not gamma > 2:
            errs.append(f"phys.gamma: the homogenization limit requires gamma > 2, got {gamma}")
    if kind is not None and kind not in IC_KINDS:
        errs.append(f"ic.kind: expected one of {IC_KINDS}, got {kind!r}")
    if amp is not None and 1 + min(amp, 0.0) < 0.5:
        errs.append(f"ic.amplitude: density would drop below 0.5, got amplitude {amp}")
    if sigma is not None and not sigma > 0:
        errs.append(f"ic.sigma: must be positive, got {sigma}")
    if center is not None and len(center) != 2:
        errs.append(f"ic.center: expected two coordinates, got {len(center)}")
    if T is not None and not T > 0:
        errs.append(f"time.T: must be positive, got {T}")
    if cfl is not None and not 0 < cfl <= 0.5:
        errs.append(f"time.cfl: must lie in (0, 0.5], got {cfl}")
    if isinstance(checkpoints, int) and checkpoints < 1:
        errs.append(f"time.checkpoints: need at least 1 interval, got {checkpoints}")
    if isinstance(checkpoints, tuple) and T is not None and any(not 0 <= c <= T for c in checkpoints):
        errs.append("time.checkpoints: times must lie in [0, T]")
    if tol is not None and not tol > 0:
        errs.append(f"solver.tol: must be positive, got {tol}")
    if command == "homogenize" and eps_list is not None:
        pos = [e for e in eps_list if e != 0]
        if not pos:
            errs.append("sweep.eps_list: needs at least one positive eps")
        if any(e < 0 for e in pos):
            errs.append("sweep.eps_list: values must be non-negative")
        if L is not None and any(e >= L / 4 for e in pos):
            errs.append(f"sweep.eps_list: geometric violation, every eps must be below L/4={L / 4}")
        if any(b >= a for a, b in zip(pos[:-1], pos[1:])):
            errs.append("sweep.eps_list: must be strictly decreasing")
    if theta is not None and gamma is not None and not 0 < theta < gamma - 1:
        errs.append(f"sweep.theta: must lie in (0, gamma - 1), got {theta}")
    if errs:
        raise ConfigError(errs)
    return RunConfig(
        command=command,
        L=L,
        n=n,
        eps=eps,
        phys=PhysParams(mu, lam, gamma),
        ic=ICSpec(kind=kind, amplitude=amp, sigma=sigma, center=tuple(center)),
        T=T,
        cfl=cfl,
        checkpoints=checkpoints,
        tol=tol,
        seed=seed,
        eps_list=tuple(e for e in eps_list if e != 0) if eps_list else (),
        theta=theta,
        out_dir=out_dir,
        raw=data,
    )


def resolve_out_dir(cli_value: str | None, config: RunConfig | None = None) -> Path:
    """CLI flag, then the environment variable, then the config file, then the default."""
    if cli_value:
        return Path(cli_value)
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    if config is not None and config.out_dir:
        return Path(config.out_dir)
    return Path(DEFAULT_OUT)
