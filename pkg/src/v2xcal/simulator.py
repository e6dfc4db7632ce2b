"""Replay a vehicle trace past an RSU and decide per-packet message delivery.

Basic safety messages travel vehicle-to-RSU and signal phase-and-timing
messages RSU-to-vehicle, each on its own fixed cadence. The vehicle position
is linearly interpolated from the trace, every packet's received power is
drawn through the configured channel cascade, and each delivery decision is
logged. All randomness derives from the scenario seed: packet k of a
direction uses the k-th draw of that direction's dedicated streams, so one
direction's draws never perturb the other's.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .propagation import (
    DeliveryReason,
    FadingParams,
    FastFadingModel,
    RadioParams,
    SlowFadingModel,
    log_distance_rx_power,
    nakagami_power_sample,
    snr_threshold_db,
    to_db,
    to_linear,
)

#: Decimal places kept on logged floats so CSV round trips are lossless.
LOG_DECIMALS = 9

#: Guard for floating-point jitter when counting whole send intervals.
_COUNT_EPS = 1e-9


class Direction(enum.Enum):
    """Link direction of a message."""

    VEHICLE_TO_RSU = "vehicle_to_rsu"  # basic safety messages
    RSU_TO_VEHICLE = "rsu_to_vehicle"  # signal phase and timing messages

    @property
    def stream_code(self) -> int:
        return 0 if self is Direction.VEHICLE_TO_RSU else 1


@dataclass
class EnuTrace:
    """Vehicle path in east-north-up meters about the RSU site.

    times_s is seconds from the first sample, non-decreasing. Duplicate
    timestamps collapse to their first sample; at least two distinct times
    are required so positions can be interpolated.
    """

    times_s: np.ndarray
    x_m: np.ndarray
    y_m: np.ndarray
    z_m: np.ndarray

    def __post_init__(self):
        self.times_s = np.asarray(self.times_s, dtype=float)
        self.x_m = np.asarray(self.x_m, dtype=float)
        self.y_m = np.asarray(self.y_m, dtype=float)
        self.z_m = np.asarray(self.z_m, dtype=float)
        n = self.times_s.shape[0]
        if not (self.x_m.shape == self.y_m.shape == self.z_m.shape == (n,)):
            raise ValueError("trace arrays must be 1-D and of equal length")
        for name, arr in (("times_s", self.times_s), ("x_m", self.x_m),
                          ("y_m", self.y_m), ("z_m", self.z_m)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        if np.any(np.diff(self.times_s) < 0.0):
            raise ValueError("times_s must be non-decreasing")
        keep = np.concatenate(([True], np.diff(self.times_s) > 0.0))
        self.times_s = self.times_s[keep]
        self.x_m = self.x_m[keep]
        self.y_m = self.y_m[keep]
        self.z_m = self.z_m[keep]
        if self.times_s.shape[0] < 2:
            raise ValueError("trace needs at least 2 distinct timestamps for interpolation")

    @property
    def duration_s(self) -> float:
        return float(self.times_s[-1] - self.times_s[0])

    def position_at(self, t):
        """Interpolated vehicle position(s) at time(s) t seconds from trace start."""
        rel = np.asarray(t, dtype=float)
        base = self.times_s - self.times_s[0]
        x = np.interp(rel, base, self.x_m)
        y = np.interp(rel, base, self.y_m)
        z = np.interp(rel, base, self.z_m)
        return x, y, z


@dataclass(frozen=True)
class ScenarioConfig:
    """Replay settings: RSU antenna position, message cadences, seed, grids."""

    rsu_x_m: float = 0.0
    rsu_y_m: float = 0.0
    rsu_z_m: float = 0.0
    bsm_rate_hz: float = 10.0
    spat_rate_hz: float = 10.0
    master_seed: int = 1729
    bin_width_m: float = 20.0
    heatmap_cell_m: float = 20.0
    snr_thresholds_db: tuple | None = None  # ((rate, dB), ...) override, else defaults

    def __post_init__(self):
        if self.bsm_rate_hz <= 0.0 or self.spat_rate_hz <= 0.0:
            raise ValueError("message rates must be positive")
        if self.bin_width_m <= 0.0 or self.heatmap_cell_m <= 0.0:
            raise ValueError("bin_width_m and heatmap_cell_m must be positive")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ValueError(f"master_seed must be a non-negative integer, got {self.master_seed!r}")

    def snr_table(self) -> dict | None:
        return dict(self.snr_thresholds_db) if self.snr_thresholds_db is not None else None


@dataclass(frozen=True)
class DeliveryRecord:
    """One packet's outcome."""

    timestamp_s: float
    direction: Direction
    tx_position_m: tuple
    rx_position_m: tuple
    distance_m: float
    rx_power_dbm: float
    delivered: bool
    reason: DeliveryReason


@dataclass
class DeliveryLog:
    """Ordered per-packet outcomes for one scenario run."""

    records: list

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def delivered_count(self) -> int:
        return sum(1 for r in self.records if r.delivered)


@dataclass(frozen=True)
class PdrBin:
    """Delivery statistics for one distance interval [bin_start_m, bin_end_m)."""

    bin_start_m: float
    bin_end_m: float
    sent: int
    delivered: int

    @property
    def empty(self) -> bool:
        return self.sent == 0

    @property
    def pdr_pct(self):
        """Delivery ratio in percent, or None for a bin with no sends."""
        if self.sent == 0:
            return None
        return 100.0 * self.delivered / self.sent


@dataclass
class PdrCurve:
    """Packet delivery ratio versus distance, on contiguous fixed-width bins."""

    bin_width_m: float
    bins: list

    def __post_init__(self):
        if self.bin_width_m <= 0.0:
            raise ValueError("bin_width_m must be positive")
        for prev, cur in zip(self.bins, self.bins[1:]):
            if not math.isclose(prev.bin_end_m, cur.bin_start_m, abs_tol=1e-9):
                raise ValueError("bins must be contiguous and ascending")

    def __len__(self):
        return len(self.bins)

    def __iter__(self):
        return iter(self.bins)

    def non_empty(self) -> dict:
        """Map of bin_start_m to pdr_pct for bins that saw traffic."""
        return {b.bin_start_m: b.pdr_pct for b in self.bins if not b.empty}


@dataclass(frozen=True)
class HeatmapCell:
    """Delivery statistics for one square ground cell, keyed by its center."""

    center_x_m: float
    center_y_m: float
    sent: int
    delivered: int

    @property
    def pdr_pct(self):
        if self.sent == 0:
            return None
        return 100.0 * self.delivered / self.sent


@dataclass
class HeatmapGrid:
    """PDR over vehicle positions on a square grid. Only visited cells are kept."""

    cell_m: float
    cells: list

    def __post_init__(self):
        if self.cell_m <= 0.0:
            raise ValueError("cell_m must be positive")

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)


def _send_count(duration_s: float, rate_hz: float) -> int:
    # Inclusive start, exclusive end: sends at k/rate for k < duration*rate.
    return int(math.floor(duration_s * rate_hz + _COUNT_EPS))


def _round_log(arr):
    return np.round(arr, LOG_DECIMALS)


def run_scenario(
    trace: EnuTrace,
    scenario: ScenarioConfig,
    radio: RadioParams,
    fading: FadingParams,
) -> DeliveryLog:
    """Simulate every scheduled packet over the trace and log each outcome.

    Deterministic for a given (trace, scenario, radio, fading): per
    direction, shadowing and fast-fading draws come from two child streams
    seeded by (master_seed, direction), consumed in packet order. Logged
    floats are rounded to LOG_DECIMALS before the delivery decision so the
    log is exactly reproducible from its CSV form.
    """
    duration = trace.duration_s
    rsu = np.array([scenario.rsu_x_m, scenario.rsu_y_m, scenario.rsu_z_m], dtype=float)
    snr_table = scenario.snr_table()
    threshold_db = snr_threshold_db(radio.data_rate_mbps, snr_table)

    per_direction = []
    for direction, rate in (
        (Direction.VEHICLE_TO_RSU, scenario.bsm_rate_hz),
        (Direction.RSU_TO_VEHICLE, scenario.spat_rate_hz),
    ):
        n = _send_count(duration, rate)
        times = _round_log(np.arange(n, dtype=float) / rate)
        per_direction.append((direction, times))

    records = []
    for direction, times in per_direction:
        n = times.shape[0]
        if n == 0:
            continue
        vx, vy, vz = trace.position_at(times)
        vx, vy, vz = _round_log(vx), _round_log(vy), _round_log(vz)
        rx_, ry_, rz_ = _round_log(rsu[0]), _round_log(rsu[1]), _round_log(rsu[2])
        # math.dist, not a vectorized sqrt: the log parser rederives the
        # distance from the position columns and the two must agree bit for bit.
        site = (float(rx_), float(ry_), float(rz_))
        dist = np.array([math.dist((vx[k], vy[k], vz[k]), site) for k in range(n)])

        ss = np.random.SeedSequence((scenario.master_seed, direction.stream_code))
        slow_seed, fast_seed = ss.spawn(2)

        if fading.slow_model is SlowFadingModel.LOGNORMAL:
            slow_rng = np.random.default_rng(slow_seed)
            rx_power = (
                log_distance_rx_power(radio, fading, np.maximum(dist, 1e-12))
                + fading.sigma_db * slow_rng.standard_normal(n)
            )
        else:
            rx_power = np.asarray(log_distance_rx_power(radio, fading, np.maximum(dist, 1e-12)))

        if fading.fast_model is FastFadingModel.NAKAGAMI:
            fast_rng = np.random.default_rng(fast_seed)
            omega_mw = to_linear(np.asarray(rx_power))
            power_mw = nakagami_power_sample(omega_mw, fading.nakagami_m, fast_rng, size=n)
            rx_power = to_db(power_mw)

        rx_power = _round_log(rx_power)
        above_sens = rx_power >= radio.rx_sensitivity_dbm
        above_snr = rx_power - radio.noise_floor_dbm >= threshold_db
        delivered = above_sens & above_snr

        for k in range(n):
            if delivered[k]:
                reason = DeliveryReason.DELIVERED
            elif not above_sens[k]:
                reason = DeliveryReason.BELOW_SENSITIVITY
            else:
                reason = DeliveryReason.BELOW_SNR
            vehicle = (float(vx[k]), float(vy[k]), float(vz[k]))
            if direction is Direction.VEHICLE_TO_RSU:
                tx_pos, rx_pos = vehicle, site
            else:
                tx_pos, rx_pos = site, vehicle
            records.append(
                DeliveryRecord(
                    timestamp_s=float(times[k]),
                    direction=direction,
                    tx_position_m=tx_pos,
                    rx_position_m=rx_pos,
                    distance_m=float(dist[k]),
                    rx_power_dbm=float(rx_power[k]),
                    delivered=bool(delivered[k]),
                    reason=reason,
                )
            )

    # Chronological order; vehicle-to-RSU first on timestamp ties.
    records.sort(key=lambda r: (r.timestamp_s, r.direction.stream_code))
    return DeliveryLog(records=records)


def vehicle_position(record: DeliveryRecord) -> tuple:
    """The vehicle-side endpoint of a packet, whichever direction it flew."""
    if record.direction is Direction.VEHICLE_TO_RSU:
        return record.tx_position_m
    return record.rx_position_m


def _filter_direction(log: DeliveryLog, direction: Direction | None):
    if direction is None:
        return list(log.records)
    return [r for r in log.records if r.direction is direction]


def pdr_curve(log: DeliveryLog, bin_width_m: float, direction: Direction | None = None) -> PdrCurve:
    """Group packets by floor(distance / bin_width) and compute per-bin PDR.

    Bins run contiguously from zero through the farthest observed distance;
    bins that saw no traffic are kept as explicit empties. An empty log
    yields an empty curve.
    """
    if bin_width_m <= 0.0:
        raise ValueError("bin_width_m must be positive")
    records = _filter_direction(log, direction)
    if not records:
        return PdrCurve(bin_width_m=bin_width_m, bins=[])
    dist = np.array([r.distance_m for r in records])
    ok = np.array([r.delivered for r in records], dtype=bool)
    idx = np.floor(dist / bin_width_m).astype(int)
    n_bins = int(idx.max()) + 1
    sent = np.bincount(idx, minlength=n_bins)
    delivered = np.bincount(idx, weights=ok.astype(float), minlength=n_bins).astype(int)
    bins = [
        PdrBin(
            bin_start_m=i * bin_width_m,
            bin_end_m=(i + 1) * bin_width_m,
            sent=int(sent[i]),
            delivered=int(delivered[i]),
        )
        for i in range(n_bins)
    ]
    return PdrCurve(bin_width_m=bin_width_m, bins=bins)


def heatmap(log: DeliveryLog, cell_m: float, direction: Direction | None = None) -> HeatmapGrid:
    """Aggregate PDR over vehicle positions on a square grid of side cell_m."""
    if cell_m <= 0.0:
        raise ValueError("cell_m must be positive")
    counts = {}
    for r in _filter_direction(log, direction):
        x, y, _ = vehicle_position(r)
        key = (math.floor(x / cell_m), math.floor(y / cell_m))
        sent, delivered = counts.get(key, (0, 0))
        counts[key] = (sent + 1, delivered + (1 if r.delivered else 0))
    cells = [
        HeatmapCell(
            center_x_m=(ix + 0.5) * cell_m,
            center_y_m=(iy + 0.5) * cell_m,
            sent=sent,
            delivered=delivered,
        )
        for (ix, iy), (sent, delivered) in sorted(counts.items())
    ]
    return HeatmapGrid(cell_m=cell_m, cells=cells)


def rmse(observed: PdrCurve, simulated: PdrCurve) -> float:
    """Root-mean-square error between two PDR curves, in percent.

    Compared over bins present and non-empty in both curves. The curves
    must share the same bin width (and the implicit zero origin); having
    no overlapping non-empty bin is an error.
    """
    if not math.isclose(observed.bin_width_m, simulated.bin_width_m, rel_tol=1e-12):
        raise ValueError(
            f"bin widths differ: {observed.bin_width_m} vs {simulated.bin_width_m}"
        )
    a = observed.non_empty()
    b = simulated.non_empty()
    common = sorted(set(a) & set(b))
    if not common:
        raise ValueError("no overlapping non-empty bins between the two curves")
    diffs = np.array([a[k] - b[k] for k in common])
    return float(np.sqrt(np.mean(diffs**2)))


def max_link_distance(trace: EnuTrace, scenario: ScenarioConfig) -> float:
    """Largest distance from any trace sample to the RSU antenna.

    Interpolated positions lie on segments between samples, and distance to
    a fixed point is convex along a segment, so the sample maximum bounds
    the whole replay.
    """
    dx = trace.x_m - scenario.rsu_x_m
    dy = trace.y_m - scenario.rsu_y_m
    dz = trace.z_m - scenario.rsu_z_m
    return float(np.sqrt(dx**2 + dy**2 + dz**2).max())
