"""JSON experiment configuration.

Example::

    {
      "params": {"lambda": 1.0, "alpha": 3.0, "p": 0.06, "beta": 1.0,
                 "sigma2": 0.0, "fading": true},
      "sim": {"trials": 20000, "window_factor": 4.0,
              "interferer_radius_factor": 12.0, "seed": 0},
      "sweep": {"p": {"min": 0.01, "max": 0.3, "count": 12, "scale": "log"},
                "beta": {"values": [0.5, 1, 2, 4]}},
      "output": "results.csv"
    }

``params`` takes exactly one of ``sigma2`` and ``snr_nn_db``.  Sweep axes
are either ``{"values": [...]}`` or ``{"min", "max", "count", "scale"}``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from .analytic import SystemParams
from .optimize import Axis
from .simulate import DEFAULT_TRIALS, snr_nn_to_sigma2


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


_PARAM_KEYS = {"lambda", "alpha", "p", "beta", "sigma2", "snr_nn_db", "fading"}
_SIM_KEYS = {"trials", "window_factor", "interferer_radius_factor", "seed"}
_AXIS_KEYS = {"p", "beta"}
_SWEEP_KEYS = _AXIS_KEYS | {"alpha", "snr_nn_db", "refinement_rounds", "objective",
                            "threshold", "mode"}
_TOP_KEYS = {"params", "sim", "sweep", "output"}


def _unknown(block: dict, allowed: set, where: str):
    extra = set(block) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")


def _num(value, name) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    return float(value)


def _snr_db(value, name="snr_nn_db") -> float:
    """dB value; ``null`` or ``"inf"`` means noiseless."""
    if value is None or (isinstance(value, str) and value.lower() in ("inf", "infinity")):
        return math.inf
    return _num(value, name)


def _dump_db(value: float):
    return "inf" if math.isinf(value) else value


def _normalize_axis(spec, name) -> dict:
    if not isinstance(spec, dict):
        raise ConfigError(f"sweep.{name} must be an object")
    if "values" in spec:
        _unknown(spec, {"values"}, f"sweep.{name}")
        vals = spec["values"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError(f"sweep.{name}.values must be a non-empty list")
        return {"values": [_num(v, f"sweep.{name}.values") for v in vals]}
    _unknown(spec, {"min", "max", "count", "scale"}, f"sweep.{name}")
    try:
        out = {"min": _num(spec["min"], f"sweep.{name}.min"),
               "max": _num(spec["max"], f"sweep.{name}.max"),
               "count": int(spec["count"]),
               "scale": spec.get("scale", "log" if name == "beta" else "linear")}
    except KeyError as exc:
        raise ConfigError(f"sweep.{name} is missing {exc.args[0]!r}") from None
    if out["scale"] not in ("linear", "log"):
        raise ConfigError(f"sweep.{name}.scale must be 'linear' or 'log'")
    try:
        axis_from_spec(out)
    except ValueError as exc:
        raise ConfigError(f"sweep.{name}: {exc}") from None
    return out


def axis_from_spec(spec: dict) -> Axis:
    if "values" in spec:
        raise ValueError("explicit value lists have no Axis form")
    return Axis(spec["min"], spec["max"], spec["count"], spec["scale"] == "log")


def axis_values(spec: dict):
    if "values" in spec:
        return list(spec["values"])
    return [float(v) for v in axis_from_spec(spec).values()]


@dataclass(frozen=True)
class SimSettings:
    trials: int = DEFAULT_TRIALS
    window_factor: float = 4.0
    interferer_radius_factor: float = 12.0
    seed: int = 0


@dataclass
class ExperimentConfig:
    lam: float
    alpha: float
    p: float
    beta: float
    fading: bool = True
    sigma2: float | None = 0.0
    snr_nn_db: float | None = None
    sim: SimSettings = field(default_factory=SimSettings)
    sweep: dict = field(default_factory=dict)
    output: str | None = None

    @property
    def noise_power(self) -> float:
        if self.snr_nn_db is not None:
            if math.isinf(self.snr_nn_db):
                return 0.0
            return snr_nn_to_sigma2(10 ** (self.snr_nn_db / 10), self.lam, self.alpha)
        return self.sigma2

    def system_params(self, **overrides) -> SystemParams:
        kw = dict(lam=self.lam, alpha=self.alpha, p=self.p, beta=self.beta,
                  sigma2=self.noise_power, fading=self.fading)
        kw.update(overrides)
        return SystemParams(**kw)

    # -- (de)serialization -------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        _unknown(raw, _TOP_KEYS, "config")
        params = raw.get("params")
        if not isinstance(params, dict):
            raise ConfigError("config needs a 'params' object")
        _unknown(params, _PARAM_KEYS, "params")
        has_s, has_db = "sigma2" in params, "snr_nn_db" in params
        if has_s == has_db:
            raise ConfigError("params needs exactly one of 'sigma2' and 'snr_nn_db'")
        try:
            kw = dict(lam=_num(params["lambda"], "lambda"), alpha=_num(params["alpha"], "alpha"),
                      p=_num(params["p"], "p"), beta=_num(params["beta"], "beta"))
        except KeyError as exc:
            raise ConfigError(f"params is missing {exc.args[0]!r}") from None
        fading = params.get("fading", True)
        if not isinstance(fading, bool):
            raise ConfigError("params.fading must be true or false")
        sigma2 = _num(params["sigma2"], "sigma2") if has_s else None
        snr_db = _snr_db(params["snr_nn_db"]) if has_db else None

        sim_raw = raw.get("sim", {})
        _unknown(sim_raw, _SIM_KEYS, "sim")
        sim = SimSettings()
        try:
            sim = SimSettings(
                trials=int(sim_raw.get("trials", sim.trials)),
                window_factor=_num(sim_raw.get("window_factor", sim.window_factor), "window_factor"),
                interferer_radius_factor=_num(
                    sim_raw.get("interferer_radius_factor", sim.interferer_radius_factor),
                    "interferer_radius_factor"),
                seed=int(sim_raw.get("seed", sim.seed)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"sim: {exc}") from None
        if sim.trials < 1:
            raise ConfigError("sim.trials must be >= 1")
        if not 0 <= sim.seed < 2**64:
            raise ConfigError("sim.seed must be an unsigned 64-bit integer")
        if sim.window_factor <= 0 or sim.interferer_radius_factor <= 0:
            raise ConfigError("sim window/radius factors must be > 0")

        sweep = _normalize_sweep(raw.get("sweep", {}))
        output = raw.get("output")
        if output is not None and not isinstance(output, str):
            raise ConfigError("output must be a path string")
        cfg = cls(fading=fading, sigma2=sigma2, snr_nn_db=snr_db, sim=sim, sweep=sweep,
                  output=output, **kw)
        try:
            cfg.system_params()
        except ValueError as exc:
            raise ConfigError(f"params: {exc}") from None
        return cfg

    def to_dict(self) -> dict:
        params = {"lambda": self.lam, "alpha": self.alpha, "p": self.p, "beta": self.beta,
                  "fading": self.fading}
        if self.snr_nn_db is not None:
            params["snr_nn_db"] = _dump_db(self.snr_nn_db)
        else:
            params["sigma2"] = self.sigma2
        sweep = dict(self.sweep)
        if "snr_nn_db" in sweep:
            sweep["snr_nn_db"] = [_dump_db(v) for v in sweep["snr_nn_db"]]
        out = {"params": params, "sim": dict(self.sim.__dict__), "sweep": sweep}
        if self.output is not None:
            out["output"] = self.output
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        return cls.loads(text)


def _normalize_sweep(raw) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("sweep must be an object")
    _unknown(raw, _SWEEP_KEYS, "sweep")
    out = {}
    for name in _AXIS_KEYS & set(raw):
        out[name] = _normalize_axis(raw[name], name)
    if "alpha" in raw:
        vals = raw["alpha"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError("sweep.alpha must be a non-empty list")
        out["alpha"] = [_num(v, "sweep.alpha") for v in vals]
        for a in out["alpha"]:
            if not a > 2:
                raise ConfigError(f"sweep.alpha: alpha must be > 2, got {a}")
    if "snr_nn_db" in raw:
        vals = raw["snr_nn_db"]
        if not isinstance(vals, list) or not vals:
            raise ConfigError("sweep.snr_nn_db must be a non-empty list")
        out["snr_nn_db"] = [_snr_db(v, "sweep.snr_nn_db") for v in vals]
    if "refinement_rounds" in raw:
        out["refinement_rounds"] = int(raw["refinement_rounds"])
        if out["refinement_rounds"] < 0:
            raise ConfigError("sweep.refinement_rounds must be >= 0")
    if "objective" in raw:
        if raw["objective"] not in ("analytic", "simulated"):
            raise ConfigError("sweep.objective must be 'analytic' or 'simulated'")
        out["objective"] = raw["objective"]
    if "mode" in raw:
        if raw["mode"] not in ("joint", "p_given_beta", "beta_given_p"):
            raise ConfigError("sweep.mode must be joint, p_given_beta or beta_given_p")
        out["mode"] = raw["mode"]
    if "threshold" in raw:
        t = _num(raw["threshold"], "sweep.threshold")
        if not 0 < t <= 1:
            raise ConfigError("sweep.threshold must lie in (0, 1]")
        out["threshold"] = t
    return out
