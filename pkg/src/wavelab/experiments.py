"""Experiment runners behind ``wavelab run``.

Each runner writes CSV files whose first lines are ``#`` comments carrying
the config digest and seed, so payload rows are byte-identical across reruns
of the same config. Wall-clock data goes only to ``run_meta.json``.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from pathlib import Path

import numpy as np

from .chains import (
    FrameConfig,
    WaveformConfig,
    payload_to_time,
    serialize_blocks,
    stage1_forward,
    tx_scale,
)
from .config import DEFAULT_SECTION_SCHEMES, ExperimentConfig, load_config, require_config
from .errors import ConfigurationError
from .metrics import (
    RunReport,
    ccdf_from_values,
    clopper_pearson,
    ebn0_at_ber,
    link_budget,
    occupied_bandwidth,
    papr_at_ccdf,
    papr_db,
    psd_welch,
    real_mult_breakdown,
)
from .numerics import make_rng, qam_modulate
from .simulate import simulate_ber
from .trainer import train_pair
from .transforms import irsinc_response, load_pair, mc_legacy_pair, save_pair

log = logging.getLogger(__name__)


def _header(cfg: ExperimentConfig, seed: int) -> list[str]:
    return [f"config_digest={cfg.digest}", f"seed={seed}", f"experiment={cfg.experiment}"]


def write_csv(path: Path, header: list[str], columns: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _write_meta(out: Path, cfg: ExperimentConfig, seed: int, extra: dict) -> Path:
    meta = {"config_digest": cfg.digest, "seed": seed, "experiment": cfg.experiment,
            "source": str(cfg.source) if cfg.source else None,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"), **extra}
    path = out / "run_meta.json"
    out.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default))
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, (np.ndarray, tuple)):
        return list(o)
    return str(o)


def _sc_nofs_config(cfg: ExperimentConfig) -> WaveformConfig:
    w = cfg.waveform
    return w if w.scheme == "sc_nofs" else w.for_scheme("sc_nofs")


def obtain_pair(cfg: ExperimentConfig, seed: int, out: Path):
    """Load the configured transform, training it first when ``train.auto`` is set."""
    path = cfg.transform_path
    if path is not None and path.exists():
        return load_pair(path)
    if not cfg.auto_train:
        raise ConfigurationError(f"transform file not found: {path}")
    pair, _ = _train(cfg, seed, out)
    return pair


def _train(cfg: ExperimentConfig, seed: int, out: Path):
    w = _sc_nofs_config(cfg)
    tcfg = cfg.train.__class__(**{**cfg.train.__dict__, "seed": seed})
    pair, report = train_pair(w.M, w.Q, w.N, tcfg, w)
    path = cfg.transform_path or out / f"sc_nofs_{w.M}_{w.Q}_{w.N}.wlxp"
    save_pair(pair, path, {"N": w.N, "seed": seed, "train_digest": tcfg.digest()})
    report.write(out, stem="train")
    log.info("trained %s in %.1fs, stopped at %d", path, report.wall_time, report.stopped_at)
    return pair, report


# ------------------------------------------------------------------ runners


def run_train(cfg: ExperimentConfig, seed: int, out: Path, jobs: int = 1) -> dict:
    _, report = _train(cfg, seed, out)
    return {"final_ber_gap": report.final_ber_gap, "stopped_at": report.stopped_at,
            "prune_ratio": report.prune_ratio, "wall_time_s": report.wall_time}


def run_ber_sweep(cfg: ExperimentConfig, seed: int, out: Path, jobs: int = 1) -> dict:
    sweep = cfg.sweep
    pair = obtain_pair(cfg, seed, out) if "sc_nofs" in sweep.schemes else None
    base = _sc_nofs_config(cfg) if pair is not None else cfg.waveform
    rows, curves = [], {}
    for scheme in sweep.schemes:
        if scheme in ("ofdm", "sc_ofdm"):
            w = base.for_scheme(scheme)
        elif scheme == "mc_nofs":
            w = base.for_scheme("mc_nofs", M=base.N, Q=base.N)
        else:
            w = base.for_scheme(scheme, Q=base.Q)
        bers = []
        for i, e in enumerate(sweep.ebn0_db):
            res = simulate_ber(w, pair if scheme == "sc_nofs" else None, float(e),
                               sweep.bits_per_point, seed, keys=(i,), channel=cfg.channel,
                               det=cfg.detector, estimation=sweep.estimation,
                               include_cp=sweep.include_cp_overhead, jobs=jobs)
            lo, hi = clopper_pearson(res.errors, res.bits)
            rows.append((float(e), scheme, res.ber, res.bits, lo, hi, seed))
            bers.append(res.ber)
            log.info("%s %.1f dB ber=%.3e", scheme, e, res.ber)
        curves[scheme] = {f"ebn0_at_{t:g}": ebn0_at_ber(sweep.ebn0_db, bers, t) for t in (1e-3, 1e-4)}
    write_csv(out / "ber_sweep.csv", _header(cfg, seed),
              ["ebn0_db", "scheme", "ber", "bits", "ci_low", "ci_high", "seed"], rows)
    return {"crossings": curves}


def _scheme_configs(cfg: ExperimentConfig, schemes):
    base = cfg.waveform
    for scheme in schemes:
        if scheme in ("ofdm", "sc_ofdm"):
            yield scheme, base.for_scheme(scheme)
        else:
            yield scheme, (base if base.scheme == scheme else base.for_scheme(scheme, Q=base.Q))


def _blocks(w: WaveformConfig, pair, n_blocks: int, seed: int, chunk: int = 5000):
    """Yield unit-power time blocks (CP excluded) in chunks."""
    scale = tx_scale(w, pair)
    for start in range(0, n_blocks, chunk):
        nb = min(chunk, n_blocks - start)
        rng = make_rng(seed, 0x9A, start)
        s = qam_modulate(rng.integers(0, 2, nb * w.bits_per_block), w.qam_order).reshape(nb, w.M)
        yield scale * payload_to_time(w, stage1_forward(w, s, pair))


def run_papr(cfg: ExperimentConfig, seed: int, out: Path, jobs: int = 1) -> dict:
    sec = cfg.section("papr")
    n_blocks = int(sec.get("blocks", 100_000))
    thresholds = np.round(np.arange(*sec.get("threshold_range_db", [0.0, 13.01, 0.1])), 6)
    schemes = sec.get("schemes", list(DEFAULT_SECTION_SCHEMES["papr"]))
    oversampling = int(sec.get("oversampling", 4))
    pair = obtain_pair(cfg, seed, out) if "sc_nofs" in schemes else None
    rows, summary = [], {}
    for scheme, w in _scheme_configs(cfg, schemes):
        p = pair if scheme == "sc_nofs" else None
        values = np.concatenate([papr_db(b, oversampling) for b in _blocks(w, p, n_blocks, seed)])
        for t, c in ccdf_from_values(values, thresholds):
            rows.append((t, scheme, c))
        summary[scheme] = {"papr_at_1e-3_db": papr_at_ccdf(values, 1e-3), "blocks": n_blocks}
    write_csv(out / "papr.csv", _header(cfg, seed), ["threshold_db", "scheme", "ccdf"], rows)
    return summary


def run_psd(cfg: ExperimentConfig, seed: int, out: Path, jobs: int = 1) -> dict:
    sec = cfg.section("psd")
    n_blocks = int(sec.get("blocks", 400))
    seg_len = int(sec.get("seg_len", 8 * cfg.waveform.N))
    schemes = sec.get("schemes", list(DEFAULT_SECTION_SCHEMES["psd"]))
    pair = obtain_pair(cfg, seed, out) if "sc_nofs" in schemes else None
    summary = {}
    for scheme, w in _scheme_configs(cfg, schemes):
        p = pair if scheme == "sc_nofs" else None
        blocks = np.concatenate(list(_blocks(w, p, n_blocks, seed)))
        stream, _ = serialize_blocks(blocks, w.cp_lengths(blocks.shape[0]))
        f, db = psd_welch(stream, seg_len, 0.5, w.sample_rate_hz)
        write_csv(out / f"psd_{scheme}.csv", _header(cfg, seed) + [f"scheme={scheme}"],
                  ["freq_hz", "db"], zip(f, db))
        summary[scheme] = {"occupied_bw_hz_10db": occupied_bandwidth(f, db, -10.0),
                           "nominal_bw_hz": w.active_bins * w.subcarrier_spacing_hz}
    return summary


def run_complexity(cfg: ExperimentConfig, seed: int, out: Path, jobs: int = 1) -> dict:
    sec = cfg.section("complexity")
    configs = sec.get("configs", [[76, 64, 128], [150, 125, 256], [600, 492, 1024]])
    prunes = sec.get("prune_ratios", [0.0, 0.1, 0.2, 0.3, 0.5])
    rows = []
    for M, Q, N in configs:
        ref = WaveformConfig(scheme="sc_ofdm", M=M, N=N)
        rows.append(("sc_ofdm", N, M, M, 0.0, real_mult_breakdown(ref)["total"]))
        nofs = WaveformConfig(scheme="sc_nofs", M=M, Q=Q, N=N)
        for p in prunes:
            rows.append(("sc_nofs", N, M, Q, float(p), real_mult_breakdown(nofs, p)["total"]))
    write_csv(out / "complexity.csv", _header(cfg, seed),
              ["scheme", "N", "M", "Q", "prune", "real_mults"], rows)
    return {"rows": len(rows)}


DEFAULT_SCENARIOS = [
    {"name": "sc_ofdm", "scheme": "sc_ofdm", "M": 600, "N": 1024},
    {"name": "scenario_a", "scheme": "sc_nofs", "M": 600, "Q": 492, "N": 1024},
    {"name": "scenario_b", "scheme": "sc_nofs", "M": 600, "Q": 492, "N": 1024,
     "spacing_scale": "alpha", "numerology_rate_hz": 15.36e6},
]


def scenario_link(sc: dict):
    """Waveform and frame configs for one link scenario row."""
    spacing = float(sc.get("subcarrier_spacing_hz", 15000.0))
    M, N = int(sc["M"]), int(sc["N"])
    Q = int(sc.get("Q", M))
    if sc.get("spacing_scale") == "alpha":
        spacing = spacing * M / Q
    w = WaveformConfig(scheme=sc.get("scheme", "sc_ofdm"), M=M, Q=Q, N=N,
                       cp_scheme=sc.get("cp_scheme", "lte_like"), subcarrier_spacing_hz=spacing,
                       qam_order=int(sc.get("qam_order", 4)))
    f = FrameConfig(frame_duration_s=float(sc.get("frame_duration_s", 0.01)),
                    subframes=int(sc.get("subframes", 10)),
                    guard_gap_s=float(sc.get("guard_gap_s", 0.0)),
                    numerology_rate_hz=sc.get("numerology_rate_hz"))
    return w, f


def run_link(cfg: ExperimentConfig, seed: int, out: Path, jobs: int = 1) -> dict:
    scenarios = cfg.section("link").get("scenarios", DEFAULT_SCENARIOS)
    rows, summary = [], {}
    for sc in scenarios:
        w, f = scenario_link(sc)
        rec = link_budget(w, f)
        rows.append((sc["name"], w.scheme, w.M, w.Q, w.N, w.sample_rate_hz, rec.occupied_bw_hz,
                     rec.raw_rate_bps, rec.cp_adjusted_rate_bps, rec.frame_s, rec.guard_s,
                     rec.guard_samples))
        summary[sc["name"]] = rec.__dict__
    write_csv(out / "link.csv", _header(cfg, seed),
              ["scenario", "scheme", "M", "Q", "N", "sample_rate_hz", "occupied_bw_hz",
               "raw_rate_bps", "cp_adjusted_rate_bps", "frame_s", "guard_s", "guard_samples"], rows)
    return summary


def run_shape(cfg: ExperimentConfig, seed: int, out: Path, jobs: int = 1) -> dict:
    sec = cfg.section("shape")
    oversample = int(sec.get("oversample", 8))
    if cfg.transform_path is not None and cfg.transform_path.exists():
        t = load_pair(cfg.transform_path).forward
        source = str(cfg.transform_path)
    elif cfg.transform_path is not None or cfg.auto_train:
        t = obtain_pair(cfg, seed, out).forward
        source = "trained"
    else:
        t = mc_legacy_pair(cfg.waveform.N).forward
        source = "idft"
    rows_wanted = sec.get("rows", [1, 2, max(1, t.rows // 4)])
    rows = []
    for r in rows_wanted:
        mag = irsinc_response(t, int(r), oversample)
        k = (np.arange(mag.size) - mag.size // 2) / oversample
        rows.extend((int(r), float(a), float(b)) for a, b in zip(k, mag))
    write_csv(out / "shape.csv", _header(cfg, seed) + [f"transform={source}"],
              ["row", "bin_offset", "magnitude"], rows)
    return {"rows": rows_wanted, "source": source}


def run_all_figures(cfg: ExperimentConfig, seed: int, out: Path, jobs: int = 1) -> dict:
    base = cfg.source.parent if cfg.source else Path.cwd()
    done = {}
    for ref in cfg.section("all_figures").get("configs", []):
        sub = require_config(base / ref)
        name = Path(ref).stem
        t0 = time.perf_counter()
        run_experiment(sub, seed=seed, out=out / name, jobs=jobs)
        done[name] = time.perf_counter() - t0
    return {"wall_time_s": done}


RUNNERS = {
    "train": run_train,
    "ber_sweep": run_ber_sweep,
    "papr": run_papr,
    "psd": run_psd,
    "complexity": run_complexity,
    "link": run_link,
    "shape": run_shape,
    "all_figures": run_all_figures,
}


def run_experiment(cfg: ExperimentConfig, seed: int | None = None, out: Path | None = None,
                   jobs: int = 1, experiment: str | None = None) -> dict:
    seed = cfg.seed if seed is None else seed
    out = Path(out) if out is not None else cfg.output_dir
    if cfg.transform_path is not None and not cfg.transform_path.is_absolute():
        cfg.transform_path = cfg.transform_path.resolve()
    name = experiment or cfg.experiment
    t0 = time.perf_counter()
    summary = RUNNERS[name](cfg, seed, out, jobs)
    report = RunReport(config=cfg.raw, seed=seed, extra=summary)
    _write_meta(out, cfg, seed, {"summary": summary, "wall_time_s": time.perf_counter() - t0,
                                 "report": json.loads(report.to_json())})
    return summary


def run_file(path, seed=None, out=None, jobs=1, experiment=None) -> dict:
    cfg, problems = load_config(path)
    if problems:
        raise ConfigurationError("\n".join(problems))
    return run_experiment(cfg, seed, out, jobs, experiment)


__all__ = ["run_experiment", "run_file", "RUNNERS", "scenario_link", "write_csv"]
