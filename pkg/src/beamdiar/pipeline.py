"""Multi-scale diarization campaigns driven by an INI config.

For every recording and time scale: tile the speech intervals into uniform
segments, build the x-vector and s-vector similarity matrices, late-fuse
them per embedding mode, cluster with NME-SC and assign primary labels.
Each OSD variant then adds second speakers. Hypotheses are fused across
time scales and the report follows the usual layout of one row per
(time scale, embedding mode, OSD column) plus fused rows.

Example config::

    [data]
    recordings = rec1 rec2
    wav = audio/{rec}.wav
    segments = data/segments
    xvectors = emb/{rec}_{window}_{shift}.txt
    reference = data/ref.rttm
    output = out

    [fsb]
    bank = filters.fsb

    [diarization]
    time_scales = 1.0/0.5, 1.2/0.6, 1.5/0.75
    modes = x, sx, s
    alpha = 0.95

    [osd]
    variants = afsb=internal, oracle=ovl/{rec}.ovl

Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import configparser
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from joblib import Memory, Parallel, delayed

from .annotation import Annotation, merge_intervals
from .array import ArrayGeometry, DirectionGrid, default_geometry, load_geometry
from .diarization import (DEFAULT_ALPHA, DEFAULT_MAX_SPEAKERS, assign_primary_labels, cosine_similarity_matrix,
                          late_fuse, nme_sc, uniform_segments)
from .exceptions import BeamdiarError, DataError, DimensionError
from .formats import read_matrix, read_segments
from .fsb import DEFAULT_BAND, DEFAULT_BINS, DEFAULT_REG, FilterBank, design_bank, design_frequencies
from .fusion import fuse
from .osd import (DEFAULT_MIN_OFF, DEFAULT_MIN_ON, DEFAULT_OFFSET, DEFAULT_ONSET, AfsbConfig, AfsbWeights,
                  assign_second_speaker, detect_overlap, load_external_overlaps)
from .scoring import DEFAULT_COLLAR, emit_rttm, parse_rttm, score_corpus
from .signal import load_wav
from .svector import extract_svectors

logger = logging.getLogger(__name__)

MODE_ALPHA = {"x": 1.0, "s": 0.0}
NO_OSD = "none"

DEFAULTS = {
    "data": {"recordings": "", "wav": "", "segments": "", "xvectors": "", "reference": "", "output": "out"},
    "array": {"geometry": "", "speed_of_sound": "343"},
    "fsb": {"bank": "", "n_directions": "240", "order": "128", "band": f"{DEFAULT_BAND[0]:g} {DEFAULT_BAND[1]:g}",
            "n_bins": str(DEFAULT_BINS), "reg": repr(DEFAULT_REG)},
    "diarization": {"time_scales": "1.0/0.5, 1.2/0.6, 1.5/0.75", "modes": "x, sx, s", "alpha": str(DEFAULT_ALPHA),
                    "max_speakers": str(DEFAULT_MAX_SPEAKERS)},
    "osd": {"variants": "internal", "weights": "", "onset": str(DEFAULT_ONSET), "offset": str(DEFAULT_OFFSET),
            "min_on": str(DEFAULT_MIN_ON), "min_off": str(DEFAULT_MIN_OFF)},
    "fusion": {"enabled": "yes", "weights": ""},
    "scoring": {"collar": str(DEFAULT_COLLAR), "score_overlap": "yes"},
    "run": {"workers": "1", "cache": "", "seed": "0"},
}


def _split(value):
    return [v for v in value.replace(",", " ").split() if v]


@dataclass
class PipelineConfig:
    base: Path
    parser: configparser.ConfigParser
    recordings: list
    time_scales: list
    modes: list
    variants: list  # [(name, "internal" | path template)]

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        parser = configparser.ConfigParser(interpolation=None)
        parser.read_dict(DEFAULTS)
        if not parser.read(path):
            raise DataError(f"cannot read config {path}")
        unknown = [s for s in parser.sections() if s not in DEFAULTS]
        if unknown:
            raise DataError(f"{path}: unknown sections {unknown}")
        d = parser["diarization"]
        scales = []
        for item in [s.strip() for s in d["time_scales"].split(",") if s.strip()]:
            try:
                w, s = (float(v) for v in item.split("/"))
            except ValueError as exc:
                raise DataError(f"{path}: bad time scale {item!r}, expected window/shift") from exc
            scales.append((w, s))
        modes = _split(d["modes"])
        for m in modes:
            if m not in ("x", "sx", "s"):
                raise DataError(f"{path}: unknown embedding mode {m!r}")
        variants = []
        for i, item in enumerate(_split(parser["osd"]["variants"])):
            name, _, source = item.rpartition("=")
            if not name:
                name = "internal" if source == "internal" else f"ext{i}"
            if name == NO_OSD:
                raise DataError(f"{path}: OSD variant name {NO_OSD!r} is reserved")
            variants.append((name, source))
        recordings = _split(parser["data"]["recordings"])
        if not recordings:
            raise DataError(f"{path}: no recordings listed")
        if not scales or not modes:
            raise DataError(f"{path}: need at least one time scale and one mode")
        return cls(path.resolve().parent, parser, recordings, scales, modes, variants)

    def get(self, section, key):
        return self.parser[section][key]

    def num(self, section, key, kind=float):
        try:
            return kind(self.parser[section][key])
        except ValueError as exc:
            raise DataError(f"[{section}] {key}: {exc}") from exc

    def flag(self, section, key):
        return self.parser.getboolean(section, key)

    def path(self, template, **fields):
        if not template:
            return None
        p = Path(template.format(**fields))
        return p if p.is_absolute() else self.base / p

    def alpha(self, mode):
        return MODE_ALPHA.get(mode, self.num("diarization", "alpha"))

    def resolved(self) -> list[str]:
        lines = []
        for section in DEFAULTS:
            lines.append(f"[{section}]")
            lines += [f"{k} = {v}" for k, v in self.parser[section].items()]
        return lines


def _scale_name(scale):
    return f"{scale[0]:g}/{scale[1]:g}"


def _file_tag(scale):
    return f"{scale[0]:g}_{scale[1]:g}"


def _xvector_path(cfg, rec, scale):
    return cfg.path(cfg.get("data", "xvectors"), rec=rec, window=f"{scale[0]:g}", shift=f"{scale[1]:g}")


def check_inputs(cfg: PipelineConfig) -> list[str]:
    """Every missing input file, listed before any work starts."""
    missing = []

    def need(p, what):
        if p is None:
            missing.append(f"{what}: not configured")
        elif not p.exists():
            missing.append(f"{what}: {p}")

    need(cfg.path(cfg.get("data", "segments")), "segments")
    for key in ("reference",):
        p = cfg.path(cfg.get("data", key))
        if p is not None and not p.exists():
            missing.append(f"{key}: {p}")
    for section, key in (("fsb", "bank"), ("array", "geometry"), ("osd", "weights")):
        p = cfg.path(cfg.get(section, key))
        if p is not None and not p.exists():
            missing.append(f"{section}.{key}: {p}")
    needs_x = any(m != "s" for m in cfg.modes)
    for rec in cfg.recordings:
        need(cfg.path(cfg.get("data", "wav"), rec=rec), f"wav[{rec}]")
        if needs_x:
            for scale in cfg.time_scales:
                need(_xvector_path(cfg, rec, scale), f"xvectors[{rec} {_scale_name(scale)}]")
        for name, source in cfg.variants:
            if source != "internal":
                need(cfg.path(source, rec=rec), f"overlaps[{name} {rec}]")
    return missing


def _load_bank(cfg: PipelineConfig, n_mics: int) -> FilterBank:
    bank_path = cfg.path(cfg.get("fsb", "bank"))
    if bank_path is not None:
        bank = FilterBank.load(bank_path)
    else:
        geo_path = cfg.path(cfg.get("array", "geometry"))
        speed = cfg.num("array", "speed_of_sound")
        geometry = load_geometry(geo_path, speed) if geo_path else ArrayGeometry(default_geometry().mic_positions, speed)
        band = tuple(float(v) for v in _split(cfg.get("fsb", "band")))
        bank = design_bank(geometry, DirectionGrid(cfg.num("fsb", "n_directions", int)),
                           design_frequencies(band, cfg.num("fsb", "n_bins", int)),
                           order=cfg.num("fsb", "order", int), reg=cfg.num("fsb", "reg"))
    if bank.n_mics != n_mics:
        raise DimensionError(f"filter bank expects {bank.n_mics} channels, audio has {n_mics}")
    return bank


def _speech_intervals(cfg: PipelineConfig):
    table = read_segments(cfg.path(cfg.get("data", "segments")))
    return {rec: merge_intervals([(on, off) for _, on, off in rows]) for rec, rows in table.items()}


def _overlaps_for(cfg, rec, audio, weights):
    out = {}
    o = cfg.parser["osd"]
    for name, source in cfg.variants:
        if source == "internal":
            out[name] = detect_overlap(audio, weights, None, float(o["onset"]), float(o["offset"]),
                                       float(o["min_on"]), float(o["min_off"]))
        else:
            out[name] = load_external_overlaps(cfg.path(source, rec=rec))
    return out


def _run_cell(cfg, rec, scale, speech, bank, overlaps, svector_fn):
    """All modes and OSD columns of one (recording, time scale) cell."""
    audio = load_wav(cfg.path(cfg.get("data", "wav"), rec=rec))
    segments = uniform_segments(speech, scale[0], scale[1], rec)
    if len(segments) == 0:
        return {(mode, col): Annotation(rec) for mode in cfg.modes for col in [NO_OSD] + [n for n, _ in cfg.variants]}
    band = tuple(float(v) for v in _split(cfg.get("fsb", "band")))
    S = svector_fn(audio, bank, segments.intervals, band)
    X = None
    if any(m != "s" for m in cfg.modes):
        X = read_matrix(_xvector_path(cfg, rec, scale))
        if len(X) != len(segments):
            raise DimensionError(
                f"{rec} {_scale_name(scale)}: {len(X)} x-vectors for {len(segments)} segments")
    A_s = cosine_similarity_matrix(S)
    A_x = cosine_similarity_matrix(X) if X is not None else None
    results = {}
    for mode in cfg.modes:
        A = A_s if mode == "s" else A_x if mode == "x" else late_fuse(A_x, A_s, cfg.alpha(mode))
        labels = nme_sc(A, cfg.num("diarization", "max_speakers", int))
        primary = assign_primary_labels(segments, labels)
        results[(mode, NO_OSD)] = primary
        emb = S if mode == "s" else X
        for name, _ in cfg.variants:
            results[(mode, name)] = assign_second_speaker(primary, overlaps[name], segments, emb, labels)
    return results


def _svectors(audio, bank, intervals, band):
    return np.stack([s.weights for s in extract_svectors(audio, bank, intervals, band)])


def _cell_job(cfg, rec, scale, speech, bank, overlaps, svector_fn):
    try:
        return rec, scale, _run_cell(cfg, rec, scale, speech, bank, overlaps, svector_fn), None
    except BeamdiarError as exc:
        return rec, scale, None, f"{type(exc).__name__}: {exc}"


@dataclass
class PipelineResult:
    systems: dict = field(default_factory=dict)  # name -> [Annotation]
    report: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def run_pipeline(config_path) -> PipelineResult:
    """Run a campaign; writes RTTMs and ``report.txt`` under the output directory."""
    cfg = PipelineConfig.load(config_path)
    missing = check_inputs(cfg)
    if missing:
        raise DataError("missing inputs:\n  " + "\n  ".join(missing))
    out_dir = cfg.path(cfg.get("data", "output"))
    (out_dir / "rttm").mkdir(parents=True, exist_ok=True)
    speech = _speech_intervals(cfg)
    cache = cfg.path(cfg.get("run", "cache"))
    svector_fn = Memory(cache, verbose=0).cache(_svectors) if cache else _svectors
    workers = cfg.num("run", "workers", int)

    failures = []
    first = load_wav(cfg.path(cfg.get("data", "wav"), rec=cfg.recordings[0]))
    bank = _load_bank(cfg, first.channel_count)
    weights = None
    if any(src == "internal" for _, src in cfg.variants):
        wpath = cfg.path(cfg.get("osd", "weights"))
        weights = AfsbWeights.load(wpath) if wpath else AfsbWeights.initialize(
            AfsbConfig(n_channels=first.channel_count, sample_rate=first.sample_rate), cfg.num("run", "seed", int))

    overlaps = {}
    for rec in cfg.recordings:
        try:
            overlaps[rec] = _overlaps_for(cfg, rec, load_wav(cfg.path(cfg.get("data", "wav"), rec=rec)), weights)
        except BeamdiarError as exc:
            failures.append(f"{rec}: OSD failed: {type(exc).__name__}: {exc}")
    jobs = [(rec, scale) for rec in cfg.recordings if rec in overlaps for scale in cfg.time_scales]
    done = Parallel(n_jobs=workers)(
        delayed(_cell_job)(cfg, rec, scale, speech.get(rec, []), bank, overlaps[rec], svector_fn)
        for rec, scale in jobs)

    columns = [NO_OSD] + [n for n, _ in cfg.variants]
    failed_recs = set()
    cells = {}
    for rec, scale, res, err in done:
        if err is not None:
            failures.append(f"{rec} {_scale_name(scale)}: {err}")
            failed_recs.add(rec)
        else:
            cells[(rec, scale)] = res
    good = [r for r in cfg.recordings if r in overlaps and r not in failed_recs]

    systems = {}
    for scale in cfg.time_scales:
        for mode in cfg.modes:
            for col in columns:
                name = f"{_file_tag(scale)}_{mode}_{col}"
                systems[name] = [cells[(rec, scale)][(mode, col)] for rec in good]

    fused = {}
    if cfg.flag("fusion", "enabled") and len(cfg.time_scales) > 1:
        fw = [float(v) for v in _split(cfg.get("fusion", "weights"))] or None
        for mode in cfg.modes:
            for col in columns:
                members = [systems[f"{_file_tag(s)}_{mode}_{col}"] for s in cfg.time_scales]
                fused[f"fused_{mode}_{col}"] = [fuse([m[i] for m in members], fw) for i in range(len(good))]
    for name, anns in {**systems, **fused}.items():
        emit_rttm(anns, out_dir / "rttm" / f"{name}.rttm")

    report = _report(cfg, systems, fused, good, failures)
    (out_dir / "report.txt").write_text("\n".join(report) + "\n")
    return PipelineResult({**systems, **fused}, report, failures)


def _row(label, col, anns, refs, cfg):
    if refs is None:
        return f"{label:<16} {col:<10} {'-':>7} {'-':>7} {'-':>7} {'-':>7}"
    _, total = score_corpus([r for r in refs if r.recording_id in {a.recording_id for a in anns}], anns,
                            cfg.num("scoring", "collar"), cfg.flag("scoring", "score_overlap"))
    t = total.total_reference_speech or 1.0
    return (f"{label:<16} {col:<10} {100 * total.der:7.2f} {100 * total.missed_speech / t:7.2f} "
            f"{100 * total.false_alarm / t:7.2f} {100 * total.speaker_confusion / t:7.2f}")


def _report(cfg, systems, fused, good, failures):
    ref_path = cfg.path(cfg.get("data", "reference"))
    refs = None
    if ref_path is not None:
        refs = [r for r in parse_rttm(ref_path) if r.recording_id in good]
        known = {r.recording_id for r in refs}
        refs += [Annotation(rec) for rec in good if rec not in known]
    lines = ["# beamdiar pipeline report", "# resolved config:"]
    lines += [f"#   {line}" for line in cfg.resolved()]
    lines.append(f"# recordings scored: {' '.join(good) if good else '(none)'}")
    header = f"{'subsystem':<16} {'osd':<10} {'DER%':>7} {'MS%':>7} {'FA%':>7} {'SC%':>7}"
    lines += ["", "## subsystems", header]
    columns = [NO_OSD] + [n for n, _ in cfg.variants]
    for scale in cfg.time_scales:
        for mode in cfg.modes:
            for col in columns:
                label = f"{_scale_name(scale)} {mode}"
                lines.append(_row(label, col, systems[f"{_file_tag(scale)}_{mode}_{col}"], refs, cfg))
    if fused:
        lines += ["", "## fusion over time scales", header]
        for mode in cfg.modes:
            for col in columns:
                lines.append(_row(f"fused {mode}", col, fused[f"fused_{mode}_{col}"], refs, cfg))
    if failures:
        lines += ["", "## failures"] + [f"# {f}" for f in failures]
    return lines
