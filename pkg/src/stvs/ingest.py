"""Loading, validation and windowing of PMU-style voltage time series.

CSV layout: a header row with a ``time`` column in seconds, per-unit
voltage columns named ``V:<id>`` and optional reactive-power columns
``Q:<id>`` in MVAr.  A plain ``key=value`` config file can carry
``fault_clear_time``, ``window_duration`` and ``lookback`` (seconds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError

# Relative tolerance on sample spacing before a file is declared
# non-uniformly sampled.
DT_REL_TOL = 1e-6

# Per-unit level below which a sample counts as "in fault" for the
# auto-detection heuristics.
FAULT_LEVEL_PU = 0.6


@dataclass(frozen=True)
class ColumnSchema:
    """Column-name mapping for CSV ingestion."""

    time: str = "time"
    voltage_prefix: str = "V:"
    reactive_prefix: str = "Q:"


@dataclass(frozen=True)
class Channel:
    """One measurement channel: per-unit voltage plus optional MVAr."""

    id: str
    voltage: np.ndarray
    reactive_power: np.ndarray | None = None


@dataclass(frozen=True)
class VoltageTrajectory:
    """Uniformly sampled multi-channel voltage record with fault markers.

    ``fault_clear_index`` is the sample index of t0 (first post-fault
    sample).  ``prefault_voltage`` maps channel id to the pre-fault
    per-unit level V_pre when known.  Instances are immutable; the
    arrays they hold must not be mutated by callers.
    """

    channels: tuple[Channel, ...]
    dt: float
    fault_clear_index: int = 0
    prefault_voltage: dict[str, float] | None = None
    t_start: float = 0.0

    def __post_init__(self) -> None:
        if not self.channels:
            raise ValidationError("trajectory needs at least one channel")
        if not (self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        n = len(self.channels[0].voltage)
        if n < 2:
            raise ValidationError("channels must hold at least 2 samples")
        for ch in self.channels:
            if len(ch.voltage) != n:
                raise ValidationError(
                    f"channel {ch.id!r} length {len(ch.voltage)} != {n}"
                )
            if not np.all(np.isfinite(ch.voltage)):
                bad = int(np.flatnonzero(~np.isfinite(ch.voltage))[0])
                raise ValidationError(
                    f"channel {ch.id!r} has non-finite voltage at row {bad}"
                )
            if np.any(ch.voltage <= 0):
                bad = int(np.flatnonzero(ch.voltage <= 0)[0])
                raise ValidationError(
                    f"channel {ch.id!r} has non-positive voltage at row {bad}"
                )
        if not (0 <= self.fault_clear_index < n):
            raise ValidationError(
                f"fault_clear_index {self.fault_clear_index} outside [0, {n})"
            )

    @property
    def n_samples(self) -> int:
        return len(self.channels[0].voltage)

    @property
    def channel_ids(self) -> tuple[str, ...]:
        return tuple(ch.id for ch in self.channels)

    @property
    def duration(self) -> float:
        return (self.n_samples - 1) * self.dt

    def voltage_matrix(self) -> np.ndarray:
        """Samples as an (n_samples, n_channels) array."""
        return np.column_stack([ch.voltage for ch in self.channels])

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_samples)

    def with_fault_clear_time(self, t0: float) -> "VoltageTrajectory":
        """Return a copy whose fault_clear_index matches time ``t0``."""
        idx = int(round((t0 - self.t_start) / self.dt))
        if not (0 <= idx < self.n_samples):
            raise ValidationError(
                f"fault clear time {t0} s outside the record "
                f"[{self.t_start}, {self.t_start + self.duration}] s"
            )
        return replace(self, fault_clear_index=idx)

    def with_prefault_voltage(
        self, v_pre: dict[str, float]
    ) -> "VoltageTrajectory":
        return replace(self, prefault_voltage=dict(v_pre))


def load_trajectory(
    path, schema: ColumnSchema | None = None
) -> VoltageTrajectory:
    """Load and validate a trajectory from CSV.

    dt is inferred from the time column and must be uniform within
    ``DT_REL_TOL`` relative tolerance.  NaN or non-positive voltages are
    rejected with the offending row index (0-based data rows).
    """
    schema = schema or ColumnSchema()
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise ValidationError(f"{path}: empty file")
        names = [c.strip() for c in header.split(",")]
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ValidationError(f"{path}: malformed numeric data: {exc}") from exc
    return trajectory_from_columns(names, data, schema=schema, origin=str(path))


def trajectory_from_columns(
    names: list[str],
    data: np.ndarray,
    schema: ColumnSchema | None = None,
    origin: str = "<data>",
) -> VoltageTrajectory:
    """Build a validated trajectory from already-parsed CSV columns."""
    schema = schema or ColumnSchema()
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValidationError(f"{origin}: need at least 2 data rows")
    if schema.time not in names:
        raise ValidationError(f"{origin}: missing {schema.time!r} column")
    v_cols = [c for c in names if c.startswith(schema.voltage_prefix)]
    if not v_cols:
        raise ValidationError(
            f"{origin}: no voltage columns with prefix {schema.voltage_prefix!r}"
        )

    t = data[:, names.index(schema.time)]
    diffs = np.diff(t)
    dt = float(diffs[0])
    if dt <= 0:
        raise ValidationError(f"{origin}: time column is not increasing")
    jitter = np.abs(diffs - dt) / dt
    if np.any(jitter > DT_REL_TOL):
        bad = int(np.argmax(jitter > DT_REL_TOL)) + 1
        raise ValidationError(
            f"{origin}: non-uniform sampling at row {bad} "
            f"(relative jitter {jitter.max():.3g})"
        )

    channels = []
    for col in v_cols:
        cid = col[len(schema.voltage_prefix):]
        v = data[:, names.index(col)].copy()
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise ValidationError(f"{origin}: NaN voltage in {col!r} at row {bad}")
        if np.any(v <= 0):
            bad = int(np.flatnonzero(v <= 0)[0])
            raise ValidationError(
                f"{origin}: non-positive voltage in {col!r} at row {bad}"
            )
        q_name = schema.reactive_prefix + cid
        q = data[:, names.index(q_name)].copy() if q_name in names else None
        channels.append(Channel(id=cid, voltage=v, reactive_power=q))

    return VoltageTrajectory(
        channels=tuple(channels), dt=dt, t_start=float(t[0])
    )


def write_trajectory(traj: VoltageTrajectory, path) -> None:
    """Write a trajectory back to the CSV input format.

    Floats are written with shortest round-trip repr so a load/write/load
    cycle reproduces the samples bit for bit.
    """
    cols = ["time"] + [f"V:{ch.id}" for ch in traj.channels]
    q_channels = [ch for ch in traj.channels if ch.reactive_power is not None]
    cols += [f"Q:{ch.id}" for ch in q_channels]
    t = traj.times()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(traj.n_samples):
            row = [repr(float(t[i]))]
            row += [repr(float(ch.voltage[i])) for ch in traj.channels]
            row += [repr(float(ch.reactive_power[i])) for ch in q_channels]
            fh.write(",".join(row) + "\n")


def extract_post_fault_window(
    traj: VoltageTrajectory, duration: float
) -> VoltageTrajectory:
    """Slice ``duration`` seconds starting at the fault-clear sample.

    The slice is a copy; the parent trajectory is never mutated.
    prefault_voltage carries over from the parent.
    """
    n = int(round(duration / traj.dt))
    if n < 2:
        raise ValidationError(
            f"window duration {duration} s yields {n} samples (need >= 2)"
        )
    start = traj.fault_clear_index
    stop = start + n
    if stop > traj.n_samples:
        max_dur = (traj.n_samples - start) * traj.dt
        raise ValidationError(
            f"window {duration} s exceeds available data "
            f"(max {max_dur:.6g} s past fault clearing)"
        )
    channels = tuple(
        Channel(
            id=ch.id,
            voltage=ch.voltage[start:stop].copy(),
            reactive_power=(
                None
                if ch.reactive_power is None
                else ch.reactive_power[start:stop].copy()
            ),
        )
        for ch in traj.channels
    )
    return VoltageTrajectory(
        channels=channels,
        dt=traj.dt,
        fault_clear_index=0,
        prefault_voltage=(
            dict(traj.prefault_voltage) if traj.prefault_voltage else None
        ),
        t_start=traj.t_start + start * traj.dt,
    )


def _fault_onset_index(traj: VoltageTrajectory) -> int:
    """First sample of the contiguous sub-0.6 pu run ending at t0.

    If no sample right before fault clearing is depressed, the fault is
    not visible in the record and the onset defaults to t0 itself.
    """
    v = traj.voltage_matrix()
    low = np.any(v < FAULT_LEVEL_PU, axis=1)
    i = traj.fault_clear_index
    if i == 0 or not low[i - 1]:
        return i
    while i > 0 and low[i - 1]:
        i -= 1
    return i


def estimate_prefault_voltage(
    traj: VoltageTrajectory, lookback: float
) -> dict[str, float]:
    """Per-channel mean over a lookback window ending at fault onset."""
    n = int(round(lookback / traj.dt))
    if n < 1:
        raise ValidationError(
            f"lookback {lookback} s yields an empty window at dt={traj.dt}"
        )
    onset = _fault_onset_index(traj)
    if onset - n < 0:
        raise ValidationError(
            f"lookback {lookback} s does not fit before fault onset "
            f"(onset at sample {onset})"
        )
    return {
        ch.id: float(np.mean(ch.voltage[onset - n:onset]))
        for ch in traj.channels
    }


def detect_fault_clear_index(traj: VoltageTrajectory) -> int:
    """Heuristic t0: one past the last sub-0.6 pu sample that is followed
    by a monotone rise over 3 samples on the same channel.

    A convenience only; an explicit fault-clear time always wins.
    """
    best = None
    for ch in traj.channels:
        v = ch.voltage
        low = np.flatnonzero(v[:-3] < FAULT_LEVEL_PU)
        for k in low[::-1]:
            if v[k] < v[k + 1] < v[k + 2] < v[k + 3]:
                best = k + 1 if best is None else max(best, k + 1)
                break
    if best is None:
        raise ValidationError(
            "no fault signature found (no sub-0.6 pu dip with recovery); "
            "pass the fault clear time explicitly"
        )
    return best


def load_run_config(path) -> dict[str, float]:
    """Read a plain ``key=value`` run config (values parsed as floats).

    Recognised keys: fault_clear_time, window_duration, lookback.
    Unknown keys are rejected so typos fail loudly.
    """
    known = {"fault_clear_time", "window_duration", "lookback"}
    out: dict[str, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{ln}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ValidationError(f"{path}:{ln}: unknown key {key!r}")
            try:
                out[key] = float(val)
            except ValueError as exc:
                raise ValidationError(
                    f"{path}:{ln}: {key} needs a numeric value, got {val!r}"
                ) from exc
            if not math.isfinite(out[key]):
                raise ValidationError(f"{path}:{ln}: {key} must be finite")
    return out
