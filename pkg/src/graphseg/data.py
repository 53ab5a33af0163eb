"""Labeled ECG records: text-file ingestion and a synthetic generator.

The on-disk format is deliberately minimal: a two-column CSV
``sample_index,amplitude`` (header required) plus an annotation file with
one 0-based R-peak sample index per line.  Both are UTF-8 with LF line
endings and full-precision decimal amplitudes.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .solver import Signal


class DataFormatError(ValueError):
    """A record file is malformed; the message carries file and line."""


@dataclass
class LabeledRecord:
    record_id: str
    signal: Signal
    rpeak_annotations: np.ndarray
    lead: str = "MLII"
    # evaluation core of a context-padded window, as a (lo, hi) sample span;
    # detections outside it are ignored when scoring
    eval_span: tuple = None

    def __post_init__(self):
        ann = np.asarray(self.rpeak_annotations, dtype=np.int64)
        n = len(self.signal)
        if len(ann) and (ann[0] < 0 or ann[-1] >= n):
            raise ValueError(f"annotations outside [0, {n})")
        if len(ann) > 1 and np.any(np.diff(ann) <= 0):
            raise ValueError("annotations must be strictly increasing")
        self.rpeak_annotations = ann

    @property
    def n_cycles(self):
        return len(self.rpeak_annotations)


def load_signal_csv(path, sample_rate=360.0) -> Signal:
    """Read the two-column sample CSV into a Signal."""
    values = []
    expected = None
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if header.strip() != "sample_index,amplitude":
            raise DataFormatError(
                f"{path}:1: expected header 'sample_index,amplitude', got {header.strip()!r}"
            )
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataFormatError(f"{path}:{lineno}: expected 2 fields, got {len(parts)}")
            try:
                idx = int(parts[0])
                amp = float(parts[1])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
            if not math.isfinite(amp):
                raise DataFormatError(f"{path}:{lineno}: non-finite amplitude")
            if expected is None:
                expected = idx
            if idx != expected:
                raise DataFormatError(
                    f"{path}:{lineno}: sample_index {idx} breaks the contiguous order"
                )
            expected += 1
            values.append(amp)
    if len(values) < 2:
        raise DataFormatError(f"{path}: needs at least 2 samples, got {len(values)}")
    return Signal(np.array(values), sample_rate)


def _load_annotations(path, n):
    ann = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                idx = int(line)
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
            if not (0 <= idx < n):
                raise DataFormatError(
                    f"{path}:{lineno}: annotation {idx} outside the signal [0, {n})"
                )
            if ann and idx <= ann[-1]:
                raise DataFormatError(
                    f"{path}:{lineno}: annotation {idx} not strictly increasing"
                )
            ann.append(idx)
    return np.array(ann, dtype=np.int64)


def load_record(signal_path, annotation_path, sample_rate=360.0, lead="MLII",
                record_id=None) -> LabeledRecord:
    """Read a record from its sample CSV and annotation file.

    The text format carries no sampling rate, so it is passed in (default
    360 Hz).
    """
    signal = load_signal_csv(signal_path, sample_rate)
    ann = _load_annotations(annotation_path, len(signal))
    if record_id is None:
        record_id = os.path.splitext(os.path.basename(signal_path))[0]
    return LabeledRecord(record_id, signal, ann, lead=lead)


def save_record(record: LabeledRecord, signal_path, annotation_path):
    """Inverse of load_record; amplitudes keep full round-trip precision."""
    with open(signal_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sample_index,amplitude\n")
        for i, v in enumerate(record.signal.samples.tolist()):
            fh.write(f"{i},{v!r}\n")
    with open(annotation_path, "w", encoding="utf-8", newline="\n") as fh:
        for idx in record.rpeak_annotations:
            fh.write(f"{idx}\n")


@dataclass
class SynthConfig:
    """Parameters of the synthetic generator.

    Each cycle gets a Gaussian R bump of fixed 30 ms width at a jittered
    cycle centre, an optional pre-R deflection 150 ms earlier (signed:
    positive is an upward bump, negative a dip), slow sinusoidal baseline
    wander, and white noise.  Ground-truth annotations sit at the exact
    bump-centre samples.
    """

    n_cycles: int
    heart_rate_bpm: float = 75.0
    sample_rate: float = 360.0
    r_amplitude: float = 10.0
    noise_sigma: float = 0.0
    baseline_wander_amp: float = 0.0
    pre_r_dip: float = 0.0
    invert_qrs: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_cycles < 1:
            raise ValueError("n_cycles must be >= 1")
        if self.heart_rate_bpm <= 0 or self.sample_rate <= 0:
            raise ValueError("rates must be positive")
        if self.r_amplitude <= 0:
            raise ValueError("r_amplitude must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


R_WAVE_WIDTH_S = 0.030     # full visible width of the R bump
PRE_R_OFFSET_S = 0.090     # lead time of the pre-R deflection
PRE_R_WIDTH_S = 0.060
WANDER_FREQ_HZ = (0.05, 0.12)  # slow respiratory-style drift


def _add_bump(sig, center, sigma, amp):
    half = int(math.ceil(6.0 * sigma))
    lo = max(0, center - half)
    hi = min(len(sig), center + half + 1)
    t = np.arange(lo, hi, dtype=np.float64)
    sig[lo:hi] += amp * np.exp(-0.5 * ((t - center) / sigma) ** 2)


def generate_synthetic(cfg: SynthConfig) -> LabeledRecord:
    """Deterministic synthetic record with ground-truth R annotations."""
    rng = np.random.default_rng(cfg.seed)
    rate = cfg.sample_rate
    cyc = 60.0 / cfg.heart_rate_bpm * rate
    n = int(round(cfg.n_cycles * cyc))

    jitter = rng.uniform(-0.05, 0.05, cfg.n_cycles)
    centers = np.round((np.arange(cfg.n_cycles) + 0.5 + jitter) * cyc).astype(np.int64)
    centers = np.clip(centers, 0, n - 1)

    sig = np.zeros(n)
    r_sigma = R_WAVE_WIDTH_S * rate / 6.0
    r_amp = -cfg.r_amplitude if cfg.invert_qrs else cfg.r_amplitude
    for c in centers:
        _add_bump(sig, int(c), r_sigma, r_amp)

    if cfg.pre_r_dip != 0.0:
        offset = int(round(PRE_R_OFFSET_S * rate))
        p_sigma = PRE_R_WIDTH_S * rate / 6.0
        for c in centers:
            _add_bump(sig, int(c) - offset, p_sigma, cfg.pre_r_dip)

    wander_freq = rng.uniform(*WANDER_FREQ_HZ)
    wander_phase = rng.uniform(0.0, 2.0 * math.pi)
    if cfg.baseline_wander_amp != 0.0:
        t = np.arange(n) / rate
        sig += cfg.baseline_wander_amp * np.sin(2.0 * math.pi * wander_freq * t + wander_phase)

    if cfg.noise_sigma > 0.0:
        sig += rng.normal(0.0, cfg.noise_sigma, n)

    return LabeledRecord(
        record_id=f"synth-{cfg.seed}",
        signal=Signal(sig, rate),
        rpeak_annotations=centers,
        lead="SYN",
    )
