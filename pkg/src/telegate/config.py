"""Experiment configuration: reference defaults, JSON parsing, validation.

A config file is a single JSON document; every key is optional and falls back
to the reference-setup default, unknown keys are rejected with their path.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import netsim, photon
from .analysis import snr_to_noise_fraction
from .teleport import TeleportMode

FEEDFORWARD_SIGNALS = ("S1", "S2", "S3", "S4")


@dataclass(frozen=True)
class NoiseParams:
    """State-quality noise: white admixture (from the retrieved-echo SNR
    unless given directly) plus optional depolarizing noise."""

    snr: float | None = 12.6
    white_lambda: float = snr_to_noise_fraction(12.6)
    depolarizing_p: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.white_lambda <= 1.0:
            raise ValueError(f"white_lambda must be in [0, 1], got {self.white_lambda}")
        if not 0.0 <= self.depolarizing_p <= 1.0:
            raise ValueError(f"depolarizing_p must be in [0, 1], got {self.depolarizing_p}")


@dataclass(frozen=True)
class InterferometerParams:
    arm_length_m: float = 30.0
    fiber_index: float = 1.468

    def __post_init__(self):
        if self.arm_length_m <= 0 or self.fiber_index < 1.0:
            raise ValueError("arm length must be positive and index >= 1")


@dataclass
class ExperimentConfig:
    source: photon.SourceParams = field(default_factory=photon.SourceParams)
    qc: netsim.ChannelParams = field(
        default_factory=lambda: netsim.ChannelParams(7.9, 2.2))
    cc: netsim.ChannelParams = field(
        default_factory=lambda: netsim.ChannelParams(7.9, 2.2))
    memory: netsim.MemoryParams = field(default_factory=netsim.MemoryParams)
    noise: NoiseParams = field(default_factory=NoiseParams)
    interferometer: InterferometerParams = field(default_factory=InterferometerParams)
    loss_chain: netsim.LossChain = field(default_factory=netsim.default_loss_chain)
    feedforward_map: dict[str, str] = field(
        default_factory=lambda: dict(netsim.DEFAULT_FEEDFORWARD_MAP))
    teleport_mode: TeleportMode = TeleportMode.UNILATERAL_LOCC
    shots: int = 10000
    seed: int = 0
    n_modes: int = 1097
    meas_latency_us: float = 0.0

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if self.meas_latency_us < 0:
            raise ValueError("measurement latency must be non-negative")
        if set(self.feedforward_map) != set(FEEDFORWARD_SIGNALS):
            raise ValueError(
                f"feedforward_map must cover exactly {FEEDFORWARD_SIGNALS}")
        for sig, op in self.feedforward_map.items():
            if op not in ("x", "i"):
                raise ValueError(f"feedforward_map.{sig}: op must be 'x' or 'i'")

    def to_dict(self) -> dict:
        return {
            "source": {
                "vz": self.source.vz, "vx": self.source.vx,
                "heralding_efficiency": self.source.heralding_efficiency,
                "bandwidth_580_mhz": self.source.bandwidth_580_mhz,
                "bandwidth_1537_mhz": self.source.bandwidth_1537_mhz,
                "pair_rate_hz": self.source.pair_rate_hz,
            },
            "channels": {
                "qc": {"length_km": self.qc.length_km,
                       "attenuation_total_db": self.qc.attenuation_total_db,
                       "propagation_us_per_km": self.qc.propagation_us_per_km},
                "cc": {"length_km": self.cc.length_km,
                       "attenuation_total_db": self.cc.attenuation_total_db,
                       "propagation_us_per_km": self.cc.propagation_us_per_km},
            },
            "memory": {
                "eta0": self.memory.eta0, "t2afc_us": self.memory.t2afc_us,
                "storage_time_us": self.memory.storage_time_us,
                "bandwidth_mhz": self.memory.bandwidth_mhz,
                "slot_ns": self.memory.slot_ns, "window_us": self.memory.window_us,
            },
            "noise": {"snr": self.noise.snr,
                      "white_lambda": self.noise.white_lambda,
                      "depolarizing_p": self.noise.depolarizing_p},
            "interferometer": {"arm_length_m": self.interferometer.arm_length_m,
                               "fiber_index": self.interferometer.fiber_index},
            "loss_chain": {
                "duty_cycle": self.loss_chain.duty_cycle,
                "stages": [{"name": s.name, "value": s.value, "unit": s.unit,
                            "role": s.role} for s in self.loss_chain.stages],
            },
            "feedforward_map": dict(sorted(self.feedforward_map.items())),
            "teleport_mode": self.teleport_mode.value,
            "shots": self.shots,
            "seed": self.seed,
            "n_modes": self.n_modes,
            "meas_latency_us": self.meas_latency_us,
        }


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


class _Section:
    """Dict wrapper that tracks consumed keys and reports leftovers by path."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path or 'config'}: expected an object")
        self.data = dict(data)
        self.path = path

    def take(self, key, default=None):
        return self.data.pop(key, default)

    def has(self, key) -> bool:
        return key in self.data

    def sub(self, key) -> "_Section | None":
        if key not in self.data:
            return None
        return _Section(self.data.pop(key), f"{self.path}.{key}" if self.path else key)

    def finish(self):
        if self.data:
            raise ConfigError(
                f"{self.path or 'config'}: unknown keys {sorted(self.data)}")


class ConfigError(ValueError):
    """Configuration file is malformed or violates an invariant."""


def _build(cls, section: _Section | None, defaults, fields: dict):
    if section is None:
        return defaults
    kwargs = {}
    for json_key, attr in fields.items():
        if section.has(json_key):
            kwargs[attr] = section.take(json_key)
        else:
            kwargs[attr] = getattr(defaults, attr)
    path = section.path
    section.finish()
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def parse_config_dict(doc: dict) -> ExperimentConfig:
    root = _Section(doc, "")
    base = ExperimentConfig()

    source = _build(photon.SourceParams, root.sub("source"), base.source, {
        "vz": "vz", "vx": "vx", "heralding_efficiency": "heralding_efficiency",
        "bandwidth_580_mhz": "bandwidth_580_mhz",
        "bandwidth_1537_mhz": "bandwidth_1537_mhz", "pair_rate_hz": "pair_rate_hz"})

    qc, cc = base.qc, base.cc
    channels = root.sub("channels")
    if channels is not None:
        qc = _build(netsim.ChannelParams, channels.sub("qc"), base.qc, {
            "length_km": "length_km", "attenuation_total_db": "attenuation_total_db",
            "propagation_us_per_km": "propagation_us_per_km"})
        cc = _build(netsim.ChannelParams, channels.sub("cc"), base.cc, {
            "length_km": "length_km", "attenuation_total_db": "attenuation_total_db",
            "propagation_us_per_km": "propagation_us_per_km"})
        channels.finish()

    memory = _build(netsim.MemoryParams, root.sub("memory"), base.memory, {
        "eta0": "eta0", "t2afc_us": "t2afc_us", "storage_time_us": "storage_time_us",
        "bandwidth_mhz": "bandwidth_mhz", "slot_ns": "slot_ns", "window_us": "window_us"})

    noise = base.noise
    noise_sec = root.sub("noise")
    if noise_sec is not None:
        snr = noise_sec.take("snr", base.noise.snr)
        depol = noise_sec.take("depolarizing_p", base.noise.depolarizing_p)
        if noise_sec.has("white_lambda"):
            lam = noise_sec.take("white_lambda")
            snr_value = None
        else:
            if snr is None or snr <= 0:
                raise ConfigError("noise.snr: must be positive when white_lambda is absent")
            lam = snr_to_noise_fraction(snr)
            snr_value = snr
        noise_sec.finish()
        try:
            noise = NoiseParams(snr=snr_value, white_lambda=lam, depolarizing_p=depol)
        except ValueError as exc:
            raise ConfigError(f"noise: {exc}") from None

    interferometer = _build(InterferometerParams, root.sub("interferometer"),
                            base.interferometer,
                            {"arm_length_m": "arm_length_m", "fiber_index": "fiber_index"})

    loss_chain = base.loss_chain
    chain_sec = root.sub("loss_chain")
    if chain_sec is not None:
        duty = chain_sec.take("duty_cycle", base.loss_chain.duty_cycle)
        stages_doc = chain_sec.take("stages")
        chain_sec.finish()
        stages = base.loss_chain.stages
        if stages_doc is not None:
            if not isinstance(stages_doc, list):
                raise ConfigError("loss_chain.stages: expected a list")
            built = []
            for i, s in enumerate(stages_doc):
                sec = _Section(s, f"loss_chain.stages[{i}]")
                stage = netsim.LossStage(
                    name=sec.take("name", f"stage_{i}"),
                    value=sec.take("value", 1.0),
                    unit=sec.take("unit", "prob"),
                    role=sec.take("role", "optical"))
                sec.finish()
                if stage.unit not in ("prob", "dB"):
                    raise ConfigError(f"loss_chain.stages[{i}].unit: must be 'prob' or 'dB'")
                if stage.role not in ("scheme", "memory_internal", "optical"):
                    raise ConfigError(f"loss_chain.stages[{i}].role: unknown role")
                try:
                    stage.probability()
                except ValueError as exc:
                    raise ConfigError(f"loss_chain.stages[{i}]: {exc}") from None
                built.append(stage)
            stages = tuple(built)
        try:
            loss_chain = netsim.LossChain(stages=stages, duty_cycle=duty)
        except ValueError as exc:
            raise ConfigError(f"loss_chain: {exc}") from None
        if not 0.0 <= loss_chain.duty_cycle <= 1.0:
            raise ConfigError("loss_chain.duty_cycle: must be in [0, 1]")

    mode_name = root.take("teleport_mode", base.teleport_mode.value)
    try:
        mode = TeleportMode(mode_name)
    except ValueError:
        raise ConfigError(
            f"teleport_mode: unknown mode {mode_name!r}; choose from "
            f"{[m.value for m in TeleportMode]}") from None

    ffmap = root.take("feedforward_map", dict(base.feedforward_map))

    kwargs = dict(
        source=source, qc=qc, cc=cc, memory=memory, noise=noise,
        interferometer=interferometer, loss_chain=loss_chain,
        feedforward_map=ffmap, teleport_mode=mode,
        shots=root.take("shots", base.shots),
        seed=root.take("seed", base.seed),
        n_modes=root.take("n_modes", base.n_modes),
        meas_latency_us=root.take("meas_latency_us", base.meas_latency_us))
    root.finish()
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(path: str | None) -> ExperimentConfig:
    """Load a config file; a missing path or empty file means all defaults."""
    if path is None:
        return default_config()
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return default_config()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config_dict(doc)
