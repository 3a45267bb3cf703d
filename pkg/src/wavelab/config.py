"""Experiment configuration files (TOML) and their validation."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .chains import WaveformConfig
from .channel import PDP_H, PDP_HB, ChannelSpec
from .detection import DetectorConfig
from .errors import ConfigurationError, WavelabError
from .trainer import TrainConfig
from .transforms import digest

SCHEMA_VERSION = 1
EXPERIMENTS = ("train", "ber_sweep", "papr", "psd", "complexity", "link", "shape", "all_figures")
CHANNEL_PRESETS = {"h": PDP_H, "h_B": PDP_HB}
ESTIMATION_MODES = ("perfect", "pilot")
DEFAULT_SECTION_SCHEMES = {"papr": ("ofdm", "sc_ofdm", "sc_nofs"), "psd": ("sc_ofdm", "sc_nofs")}


@dataclass(frozen=True)
class SweepConfig:
    ebn0_db: tuple = tuple(range(0, 13))
    bits_per_point: int = 1_000_000
    schemes: tuple = ("ofdm", "sc_ofdm", "sc_nofs", "sinc_truncated")
    estimation: str = "perfect"
    include_cp_overhead: bool = False


@dataclass
class ExperimentConfig:
    experiment: str
    waveform: WaveformConfig
    seed: int = 0
    output_dir: Path = Path("out")
    transform_path: Path | None = None
    auto_train: bool = False
    channel: ChannelSpec | None = None
    sweep: SweepConfig = field(default_factory=SweepConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sections: dict = field(default_factory=dict)
    source: Path | None = None
    raw: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        return digest(self.raw)

    def section(self, name: str) -> dict:
        return dict(self.sections.get(name, {}))


def _fields(cls):
    return {f.name for f in dataclasses.fields(cls)}


def _build(cls, table: dict, where: str, problems: list, **extra):
    unknown = set(table) - _fields(cls)
    for key in sorted(unknown):
        problems.append(f"{where}.{key}: unknown field")
    kwargs = {k: v for k, v in table.items() if k in _fields(cls)}
    kwargs.update(extra)
    for k, v in list(kwargs.items()):
        if isinstance(v, list):
            kwargs[k] = tuple(v)
    try:
        return cls(**kwargs)
    except (WavelabError, TypeError, ValueError) as exc:
        problems.append(f"{where}: {exc}")
        return None


def _channel(table: dict, problems: list) -> ChannelSpec | None:
    t = dict(table)
    preset = t.pop("preset", None)
    if preset is not None:
        if preset not in CHANNEL_PRESETS:
            problems.append(f"channel.preset: unknown preset {preset!r} (choose {list(CHANNEL_PRESETS)})")
            return None
        taps = CHANNEL_PRESETS[preset]
    else:
        raw = t.pop("taps", None)
        if not raw:
            problems.append("channel.taps: required (list of [delay, re, im]) unless a preset is given")
            return None
        try:
            taps = tuple((int(d), complex(re, im)) for d, re, im in raw)
        except (TypeError, ValueError):
            problems.append("channel.taps: each tap must be [delay, re, im]")
            return None
    t.pop("taps", None)
    return _build(ChannelSpec, t, "channel", problems, taps=taps)


def parse_config(data: dict, source: Path | None = None, check_files: bool = True):
    """Build an :class:`ExperimentConfig`; returns ``(config_or_None, problems)``."""
    problems: list[str] = []
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        problems.append(f"schema_version: unsupported version {version}")
    exp = data.get("experiment")
    if exp not in EXPERIMENTS:
        problems.append(f"experiment: must be one of {EXPERIMENTS}, got {exp!r}")
    base = source.parent if source is not None else Path.cwd()

    wtable = dict(data.get("waveform", {}))
    wave = None
    wave_problems = WaveformConfig.check(**{k: v for k, v in wtable.items()
                                            if k in _fields(WaveformConfig)})
    problems.extend(f"waveform.{p}" for p in wave_problems)
    if not wave_problems:
        wave = _build(WaveformConfig, wtable, "waveform", problems)
    else:
        problems.extend(f"waveform.{k}: unknown field" for k in sorted(set(wtable) - _fields(WaveformConfig)))

    channel = _channel(data["channel"], problems) if "channel" in data else None
    sweep = _build(SweepConfig, data.get("sweep", {}), "sweep", problems)
    if sweep is not None and sweep.estimation not in ESTIMATION_MODES:
        problems.append(f"sweep.estimation: must be one of {ESTIMATION_MODES}")
    if sweep is not None:
        bad = [s for s in sweep.schemes if s not in ("ofdm", "sc_ofdm", "sc_nofs", "mc_nofs", "sinc_truncated")]
        if bad:
            problems.append(f"sweep.schemes: unknown schemes {bad}")
    det = _build(DetectorConfig, data.get("detector", {}), "detector", problems,
                 **({"qam_order": wave.qam_order} if wave and "qam_order" not in data.get("detector", {}) else {}))
    ttable = dict(data.get("train", {}))
    auto_train = bool(ttable.pop("auto", False))
    train = _build(TrainConfig, ttable, "train", problems)

    tpath = data.get("transform_path")
    tpath = (base / tpath) if tpath else None
    out = data.get("output_dir", "out")
    out_dir = Path(out) if Path(out).is_absolute() else base / out

    if exp == "ber_sweep":
        used = sweep.schemes if sweep is not None else ()
    elif exp in ("papr", "psd"):
        used = data.get(exp, {}).get("schemes", DEFAULT_SECTION_SCHEMES[exp])
    else:
        used = ()
    needs_pair = "sc_nofs" in used
    if needs_pair and check_files and not auto_train:
        if tpath is None:
            problems.append("transform_path: required for sc_nofs experiments (or set train.auto = true)")
        elif not tpath.exists():
            problems.append(f"transform_path: file not found: {tpath}")
    if exp == "all_figures":
        for i, ref in enumerate(data.get("all_figures", {}).get("configs", [])):
            if not (base / ref).exists():
                problems.append(f"all_figures.configs[{i}]: file not found: {base / ref}")

    if problems:
        return None, problems
    known = {"schema_version", "experiment", "seed", "output_dir", "transform_path", "waveform",
             "channel", "sweep", "detector", "train"}
    sections = {k: v for k, v in data.items() if k not in known and isinstance(v, dict)}
    cfg = ExperimentConfig(
        experiment=exp, waveform=wave, seed=int(data.get("seed", 0)), output_dir=out_dir,
        transform_path=tpath, auto_train=auto_train, channel=channel, sweep=sweep,
        detector=det, train=train, sections=sections, source=source, raw=data,
    )
    return cfg, []


def load_config(path, check_files: bool = True):
    """Read and parse a TOML file; TOML syntax errors become diagnostics."""
    path = Path(path)
    text = path.read_text()  # unreadable file propagates as OSError
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        return None, [f"{path}: TOML syntax error: {exc}"]
    return parse_config(data, path, check_files)


def validate(path) -> list[str]:
    _, problems = load_config(path)
    return problems


def require_config(path) -> ExperimentConfig:
    cfg, problems = load_config(path)
    if problems:
        raise ConfigurationError("invalid config:\n  " + "\n  ".join(problems))
    return cfg


def resolve_seed(cfg_seed: int, cli_seed: int | None) -> int:
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get("WAVELAB_SEED")
    if env:
        return int(env)
    return int(cfg_seed)


def resolve_jobs(cli_jobs: int | None) -> int:
    if cli_jobs is not None:
        return max(1, int(cli_jobs))
    env = os.environ.get("WAVELAB_JOBS")
    return max(1, int(env)) if env else 1
