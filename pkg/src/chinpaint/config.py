"""Flat key-value run configuration.

Files contain ``key = value`` lines, blank lines, and ``#`` comments.
Unknown keys are rejected.  Command line overrides arrive as
``key=value`` strings through :func:`RunConfig.load`.
"""

from __future__ import annotations

from dataclasses import dataclass

from .control import ControlBox, CostWeights, OptimizerConfig
from .errors import ConfigError
from .forward import SolverConfig
from .potential import PotentialParams
from .spectral import Field, Grid

__all__ = ["RunConfig"]


def _parse_bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float_list(s: str) -> tuple[float, ...]:
    items = [p for p in s.replace(",", " ").split() if p]
    return tuple(float(p) for p in items)


# key -> (parser, default); None defaults mean "required" or "derived later"
_SCHEMA: dict[str, tuple] = {
    "nx": (int, 64),
    "ny": (int, 64),
    "lx": (float, 1.0),
    "ly": (float, 1.0),
    "theta": (float, 1.0),
    "theta_c": (float, 2.0),
    "eps": (float, 1.0),
    "delta_clip": (float, 1e-6),
    "dt": (float, 1e-4),
    "n_steps": (int, 100),
    "stabilization": (str, "auto"),
    "picard_tol": (float, 1e-10),
    "picard_max": (int, 50),
    "alpha1": (float, 1.0),
    "alpha2": (float, 0.0),
    "beta": (float, 1e-3),
    "r": (float, 2.0),
    "lambda_min": (float, 1.0),
    "lambda_max": (float, 1e4),
    "blur_sigma": (float, 1.0),
    "seed": (int, 0),
    "binarize_threshold": (float, 0.5),
    "lambda0": (float, None),
    "lambda_big": (float, 1e4),
    "stat_tol": (float, 1e-7),
    "lambda_ladder": (_parse_float_list, (1.0, 10.0, 100.0, 1000.0)),
    "eps_values": (_parse_float_list, ()),
    "taus": (_parse_float_list, (1e-1, 1e-2, 1e-3, 1e-4)),
    "fd_tau": (float, 1e-4),
    "fd_directions": (int, 5),
    "grad_check_tol": (float, 1e-3),
    "hess_tau": (float, 1e-3),
    "hess_check_tol": (float, 1e-2),
    "opt_max_iters": (int, 100),
    "opt_tol": (float, 1e-6),
    "opt_step0": (float, None),
    "opt_max_backtracks": (int, 40),
    "save_trajectory": (_parse_bool, False),
    "image_format": (str, "pgm"),
}


@dataclass(frozen=True)
class RunConfig:
    """Typed view over the flat key-value store."""

    values: dict

    @classmethod
    def load(cls, path: str, overrides: list[str] | None = None) -> "RunConfig":
        values = {k: default for k, (_, default) in _SCHEMA.items()}
        try:
            with open(path, "r", encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
        for lineno, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, _, val = line.partition("=")
            _assign(values, key.strip(), val.strip(), f"{path}:{lineno}")
        for item in overrides or []:
            if "=" not in item:
                raise ConfigError(f"override must look like key=value, got {item!r}")
            key, _, val = item.partition("=")
            _assign(values, key.strip(), val.strip(), "--set")
        cfg = cls(values)
        cfg.validate()
        return cfg

    def __getitem__(self, key: str):
        return self.values[key]

    def validate(self) -> None:
        v = self.values
        if v["theta"] >= v["theta_c"]:
            raise ConfigError("theta must be smaller than theta_c")
        if v["lambda_min"] >= v["lambda_max"]:
            raise ConfigError("lambda_min must be smaller than lambda_max")
        if v["alpha1"] == 0 and v["alpha2"] == 0 and v["beta"] == 0:
            raise ConfigError("alpha1, alpha2 and beta must not all vanish")
        if v["lambda_min"] <= 0:
            raise ConfigError("lambda_min must be positive")

    # -- typed builders -----------------------------------------------------

    def grid(self) -> Grid:
        v = self.values
        return Grid(nx=v["nx"], ny=v["ny"], lx=v["lx"], ly=v["ly"])

    def potential(self) -> PotentialParams:
        v = self.values
        return PotentialParams(
            theta=v["theta"], theta_c=v["theta_c"], eps=v["eps"], delta_clip=v["delta_clip"]
        )

    def solver(self) -> SolverConfig:
        v = self.values
        stab = v["stabilization"]
        if isinstance(stab, str):
            stab = None if stab.strip().lower() == "auto" else float(stab)
        return SolverConfig(
            dt=v["dt"],
            n_steps=v["n_steps"],
            stabilization=stab,
            picard_tol=v["picard_tol"],
            picard_max=v["picard_max"],
        )

    def weights(self) -> CostWeights:
        v = self.values
        return CostWeights(alpha1=v["alpha1"], alpha2=v["alpha2"], beta=v["beta"], r=v["r"])

    def box(self, mask_d: Field) -> ControlBox:
        v = self.values
        return ControlBox(lambda_min=v["lambda_min"], lambda_max=v["lambda_max"], mask_d=mask_d)

    def optimizer(self) -> OptimizerConfig:
        v = self.values
        return OptimizerConfig(
            max_iters=v["opt_max_iters"],
            tol=v["opt_tol"],
            step0=v["opt_step0"],
            max_backtracks=v["opt_max_backtracks"],
        )

    def lambda0_init(self) -> float:
        v = self.values
        if v["lambda0"] is not None:
            return float(v["lambda0"])
        return 0.5 * (v["lambda_min"] + v["lambda_max"])


def _assign(values: dict, key: str, val: str, where: str) -> None:
    if key not in _SCHEMA:
        raise ConfigError(f"{where}: unknown key {key!r}")
    parser = _SCHEMA[key][0]
    try:
        values[key] = parser(val)
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from exc
