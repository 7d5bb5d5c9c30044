"""JSON scenario configs: parsing, strict validation, resource factories.

The schema is documented in docs/schema.md. Validation is eager and names
the offending key; unknown keys are rejected everywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channels import (
    FiberLink,
    MemoryPair,
    RateModel,
    depol_prob,
    fiber_loss_prob,
    ideal_bell_xstate,
    swap_memories,
    xstate_amplitude_damping,
    xstate_dephasing,
    xstate_depolarizing,
)
from .imaging import BaselinePlan, SkyModel, default_theta_grid
from .protocol import PhaseSettings

__all__ = ["ChannelConfig", "ConfigError", "ScenarioConfig", "load_config", "parse_config",
           "SWEEPABLE_CHANNEL_PARAMS"]

CHANNEL_KINDS = ("ideal", "amplitude_damping", "dephasing", "depolarizing",
                 "memory_swap", "custom_rate")

SWEEPABLE_CHANNEL_PARAMS = ("lambda_L", "lambda_R", "mu_L", "mu_R", "kappa_L", "kappa_R",
                            "L0", "beta", "t1", "t2", "tau_c")


class ConfigError(ValueError):
    """Invalid scenario config; carries the offending key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


def _require_keys(obj: dict, context: str, required: tuple, optional: tuple = ()):
    if not isinstance(obj, dict):
        raise ConfigError(context, "expected an object")
    for key in sorted(obj):
        if key not in required and key not in optional:
            raise ConfigError(f"{context}.{key}" if context else key, "unknown key")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{context}.{key}" if context else key, "missing required key")


def _number(obj: dict, context: str, key: str, default=None):
    if key not in obj:
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"{context}.{key}" if context else key, "expected a finite number")
    return float(val)


def _integer(obj: dict, context: str, key: str, default=None):
    if key not in obj:
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{context}.{key}" if context else key, "expected an integer")
    return int(val)


def _in_unit_interval(context: str, key: str, value: float) -> float:
    if not (0.0 <= value <= 1.0):
        raise ConfigError(f"{context}.{key}", f"value {value} outside [0, 1]")
    return value


def _positive(context: str, key: str, value: float) -> float:
    if value <= 0.0:
        raise ConfigError(f"{context}.{key}", f"value {value} must be positive")
    return value


@dataclass(frozen=True)
class ChannelConfig:
    kind: str
    params: dict = field(default_factory=dict)

    def resource_factory(self):
        """Baseline -> XState callable for this channel."""
        p = self.params
        if self.kind in ("ideal", "custom_rate"):
            return lambda B: ideal_bell_xstate()
        if self.kind == "amplitude_damping":
            if "L0" in p:
                L0 = p["L0"]

                def fiber_factory(B):
                    link = FiberLink.from_baseline(B, L0)
                    return xstate_amplitude_damping(
                        fiber_loss_prob(link.L_left, link.L0),
                        fiber_loss_prob(link.L_right, link.L0))

                return fiber_factory
            return lambda B: xstate_amplitude_damping(p["lambda_L"], p["lambda_R"])
        if self.kind == "dephasing":
            return lambda B: xstate_dephasing(p["mu_L"], p["mu_R"])
        if self.kind == "depolarizing":
            if "beta" in p:
                beta = p["beta"]
                return lambda B: xstate_depolarizing(depol_prob(B, beta), depol_prob(B, beta))
            return lambda B: xstate_depolarizing(p["kappa_L"], p["kappa_R"])
        if self.kind == "memory_swap":
            pair = MemoryPair(p["t1"], p["t2"], p["tau_c"], p.get("sign", +1))
            return lambda B: swap_memories(pair.t1, pair.t2, pair.tau_c, pair.bell_sign)
        raise ConfigError("channel.kind", f"unknown kind {self.kind!r}")

    def rate_norm_fn(self):
        """Optional override of the coincidence fraction; tabulated for custom_rate."""
        if self.kind != "custom_rate":
            return None
        table = self.params["table"]
        bs = np.array([row[0] for row in table])
        rs = np.array([row[1] for row in table])
        return lambda B, xi: float(np.interp(B, bs, rs))


def _parse_channel(obj) -> ChannelConfig:
    ctx = "channel"
    if not isinstance(obj, dict):
        raise ConfigError(ctx, "expected an object")
    kind = obj.get("kind")
    if kind not in CHANNEL_KINDS:
        raise ConfigError(f"{ctx}.kind", f"must be one of {', '.join(CHANNEL_KINDS)}")
    params: dict = {}
    if kind == "ideal":
        _require_keys(obj, ctx, ("kind",))
    elif kind == "amplitude_damping":
        _require_keys(obj, ctx, ("kind",), ("L0", "lambda_L", "lambda_R"))
        if "L0" in obj:
            if "lambda_L" in obj or "lambda_R" in obj:
                raise ConfigError(f"{ctx}.L0", "give either L0 or lambda_L/lambda_R, not both")
            params["L0"] = _positive(ctx, "L0", _number(obj, ctx, "L0"))
        else:
            for key in ("lambda_L", "lambda_R"):
                if key not in obj:
                    raise ConfigError(f"{ctx}.{key}", "missing required key")
                params[key] = _in_unit_interval(ctx, key, _number(obj, ctx, key))
    elif kind == "dephasing":
        _require_keys(obj, ctx, ("kind", "mu_L", "mu_R"))
        for key in ("mu_L", "mu_R"):
            params[key] = _in_unit_interval(ctx, key, _number(obj, ctx, key))
    elif kind == "depolarizing":
        _require_keys(obj, ctx, ("kind",), ("beta", "kappa_L", "kappa_R"))
        if "beta" in obj:
            if "kappa_L" in obj or "kappa_R" in obj:
                raise ConfigError(f"{ctx}.beta", "give either beta or kappa_L/kappa_R, not both")
            params["beta"] = _positive(ctx, "beta", _number(obj, ctx, "beta"))
        else:
            for key in ("kappa_L", "kappa_R"):
                if key not in obj:
                    raise ConfigError(f"{ctx}.{key}", "missing required key")
                params[key] = _in_unit_interval(ctx, key, _number(obj, ctx, key))
    elif kind == "memory_swap":
        _require_keys(obj, ctx, ("kind", "t1", "t2", "tau_c"), ("sign",))
        for key in ("t1", "t2"):
            val = _number(obj, ctx, key)
            if val < 0.0:
                raise ConfigError(f"{ctx}.{key}", "storage time must be nonnegative")
            params[key] = val
        params["tau_c"] = _positive(ctx, "tau_c", _number(obj, ctx, "tau_c"))
        if "sign" in obj:
            if isinstance(obj["sign"], bool) or obj["sign"] not in ("+", "-", 1, -1):
                raise ConfigError(f"{ctx}.sign", "must be '+', '-', 1 or -1")
            params["sign"] = +1 if obj["sign"] in ("+", 1) else -1
    elif kind == "custom_rate":
        _require_keys(obj, ctx, ("kind", "table"))
        table = obj["table"]
        if (not isinstance(table, list) or len(table) < 2
                or any(not isinstance(row, list) or len(row) != 2 for row in table)):
            raise ConfigError(f"{ctx}.table", "expected a list of [baseline, rate] pairs")
        prev = -math.inf
        rows = []
        for i, (b, r) in enumerate(table):
            if not isinstance(b, (int, float)) or not isinstance(r, (int, float)):
                raise ConfigError(f"{ctx}.table", f"row {i} is not numeric")
            if b <= prev:
                raise ConfigError(f"{ctx}.table", "baselines must be strictly increasing")
            if not (0.0 <= r <= 0.5):
                raise ConfigError(f"{ctx}.table", f"normalized rate {r} outside [0, 0.5]")
            prev = b
            rows.append([float(b), float(r)])
        params["table"] = rows
    return ChannelConfig(kind=kind, params=params)


def _parse_sky(obj) -> tuple:
    ctx = "sky"
    _require_keys(obj, ctx, ("sources",))
    sources = obj["sources"]
    if not isinstance(sources, list) or not sources:
        raise ConfigError(f"{ctx}.sources", "expected a nonempty list")
    parsed = []
    for i, src in enumerate(sources):
        sctx = f"{ctx}.sources[{i}]"
        _require_keys(src, sctx, ("theta", "flux"))
        theta = _number(src, sctx, "theta")
        flux = _number(src, sctx, "flux")
        if abs(theta) > 0.1:
            raise ConfigError(f"{sctx}.theta", "outside the small-angle regime (|theta| <= 0.1)")
        if flux < 0.0:
            raise ConfigError(f"{sctx}.flux", "must be nonnegative")
        parsed.append((theta, flux))
    if sum(fl for _, fl in parsed) <= 0.0:
        raise ConfigError(f"{ctx}.sources", "total flux must be positive")
    return tuple(parsed)


def _parse_baselines(obj) -> BaselinePlan:
    ctx = "baselines"
    if isinstance(obj, list):
        if not obj or any(not isinstance(b, (int, float)) for b in obj):
            raise ConfigError(ctx, "expected a nonempty list of numbers")
        try:
            return BaselinePlan(tuple(float(b) for b in obj))
        except ValueError as exc:
            raise ConfigError(ctx, str(exc)) from exc
    _require_keys(obj, ctx, ("B_max", "count"), ("spacing",))
    b_max = _positive(ctx, "B_max", _number(obj, ctx, "B_max"))
    count = _integer(obj, ctx, "count")
    if count is None or count < 1:
        raise ConfigError(f"{ctx}.count", "must be a positive integer")
    spacing = obj.get("spacing", "linear")
    if spacing != "linear":
        raise ConfigError(f"{ctx}.spacing", "only 'linear' spacing is supported")
    return BaselinePlan.linear(b_max, count)


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    sky: SkyModel
    plan: BaselinePlan
    channel: ChannelConfig
    settings: PhaseSettings
    n_per_setting: int
    rates: RateModel
    seed: int
    output_dir: str
    theta_grid: np.ndarray

    @classmethod
    def from_dict(cls, obj: dict) -> "ScenarioConfig":
        return parse_config(obj)


def parse_config(obj: dict) -> ScenarioConfig:
    _require_keys(obj, "", ("sky", "wavelength", "baselines", "channel"),
                  ("phase_settings", "N_per_setting", "rates", "seed", "output_dir",
                   "theta_grid"))
    wavelength = _positive("", "wavelength", _number(obj, "", "wavelength"))
    sky = SkyModel(_parse_sky(obj["sky"]), wavelength)
    plan = _parse_baselines(obj["baselines"])
    channel = _parse_channel(obj["channel"])

    if "phase_settings" in obj:
        ps = obj["phase_settings"]
        _require_keys(ps, "phase_settings", ("w1", "w2"))
        try:
            settings = PhaseSettings(_number(ps, "phase_settings", "w1"),
                                     _number(ps, "phase_settings", "w2"))
        except ValueError as exc:
            raise ConfigError("phase_settings", str(exc)) from exc
    else:
        settings = PhaseSettings(0.0, 0.5 * math.pi)

    n_per_setting = _integer(obj, "", "N_per_setting", 100_000)
    if n_per_setting < 1:
        raise ConfigError("N_per_setting", "must be a positive integer")

    if "rates" in obj:
        rt = obj["rates"]
        _require_keys(rt, "rates", ("R_E", "R_T"))
        try:
            rates = RateModel(_number(rt, "rates", "R_E"), _number(rt, "rates", "R_T"))
        except ValueError as exc:
            raise ConfigError("rates", str(exc)) from exc
    else:
        rates = RateModel(1.0, 1.0)

    seed = _integer(obj, "", "seed", 0)
    if seed < 0:
        raise ConfigError("seed", "must be nonnegative")

    output_dir = obj.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir", "expected a nonempty string")

    if "theta_grid" in obj:
        tg = obj["theta_grid"]
        _require_keys(tg, "theta_grid", ("half_span", "count"))
        half_span = _positive("theta_grid", "half_span", _number(tg, "theta_grid", "half_span"))
        count = _integer(tg, "theta_grid", "count")
        if count is None or count < 2:
            raise ConfigError("theta_grid.count", "must be an integer >= 2")
        theta_grid = np.linspace(-half_span, half_span, count)
    else:
        theta_grid = default_theta_grid(sky, plan.B_m)

    return ScenarioConfig(sky=sky, plan=plan, channel=channel, settings=settings,
                          n_per_setting=n_per_setting, rates=rates, seed=seed,
                          output_dir=output_dir, theta_grid=theta_grid)


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config", "top level must be an object")
    return parse_config(obj)
