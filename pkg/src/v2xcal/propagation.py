"""Cascaded propagation models for 5.9 GHz vehicle-to-infrastructure links.

Received power is built in two stages. A slow stage sets the local mean:
either a deterministic log-distance law anchored at a free-space reference
power, or the same law plus a zero-mean Gaussian shadowing term in dB. An
optional fast stage then draws per-packet multipath power from a Nakagami-m
envelope, implemented as a Gamma draw whose mean equals the slow-stage
power in linear milliwatts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

SPEED_OF_LIGHT_M_S = 299_792_458.0

FOUR_PI = 4.0 * math.pi

#: Minimum SNR required to decode each supported data rate, in dB.
#: Typical figures for 802.11p-class OFDM receivers in a 10 MHz channel.
SNR_THRESHOLDS_DB = {6: 5.0, 12: 11.0, 18: 15.0, 27: 20.0}

SUPPORTED_DATA_RATES_MBPS = (6, 12, 18, 27)

#: 5.9 GHz ITS band edges and the regulatory transmit-power ceiling used by
#: :func:`validate_dsrc_profile`.
DSRC_BAND_HZ = (5.850e9, 5.925e9)
DSRC_MAX_TX_POWER_MW = 1000.0


class SlowFadingModel(enum.Enum):
    """Distance-driven stage of the channel."""

    FREE_SPACE = "fsm"
    LOGNORMAL = "lognormal"


class FastFadingModel(enum.Enum):
    """Per-packet multipath stage of the channel."""

    NONE = "none"
    NAKAGAMI = "nakagami"


class DeliveryReason(enum.Enum):
    """Outcome of a reception decision."""

    DELIVERED = "delivered"
    BELOW_SENSITIVITY = "below_sensitivity"
    BELOW_SNR = "below_snr"


def to_db(linear):
    """Convert a linear power ratio (or mW value) to dB (or dBm)."""
    return 10.0 * np.log10(linear)


def to_linear(db):
    """Convert dB (or dBm) to a linear ratio (or mW value)."""
    return 10.0 ** (np.asarray(db) / 10.0) if isinstance(db, np.ndarray) else 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class RadioParams:
    """Transceiver settings shared by both link directions.

    Powers are linear milliwatts, gains are linear ratios, and the noise
    floor and sensitivity are dBm. Constructors enforce physical validity
    only; search-space range checks live in the calibration module.
    """

    tx_power_mw: float = 20.0
    antenna_gain_tx: float = 1.0
    antenna_gain_rx: float = 1.0
    carrier_frequency_hz: float = 5.9e9
    data_rate_mbps: int = 6
    noise_floor_dbm: float = -110.0
    rx_sensitivity_dbm: float = -110.0

    def __post_init__(self):
        if not (self.tx_power_mw > 0.0 and math.isfinite(self.tx_power_mw)):
            raise ValueError(f"tx_power_mw must be positive, got {self.tx_power_mw}")
        if self.antenna_gain_tx <= 0.0 or self.antenna_gain_rx <= 0.0:
            raise ValueError("antenna gains must be positive linear ratios")
        if self.carrier_frequency_hz <= 0.0:
            raise ValueError(f"carrier_frequency_hz must be positive, got {self.carrier_frequency_hz}")
        if self.data_rate_mbps not in SUPPORTED_DATA_RATES_MBPS:
            raise ValueError(
                f"data_rate_mbps must be one of {SUPPORTED_DATA_RATES_MBPS}, got {self.data_rate_mbps}"
            )
        if not (self.noise_floor_dbm < 0.0 and math.isfinite(self.noise_floor_dbm)):
            raise ValueError(f"noise_floor_dbm must be negative, got {self.noise_floor_dbm}")
        if not (self.rx_sensitivity_dbm < 0.0 and math.isfinite(self.rx_sensitivity_dbm)):
            raise ValueError(f"rx_sensitivity_dbm must be negative, got {self.rx_sensitivity_dbm}")


@dataclass(frozen=True)
class FadingParams:
    """Channel-model selection and its shape parameters.

    alpha is the path-loss exponent applied per decade of distance beyond
    reference_distance_m, system_loss_db is a fixed loss folded into the
    reference power, sigma_db is the shadowing standard deviation (used only
    under LOGNORMAL), and nakagami_m the fading shape (used only under
    NAKAGAMI; m = 1 is Rayleigh-equivalent).
    """

    slow_model: SlowFadingModel = SlowFadingModel.FREE_SPACE
    fast_model: FastFadingModel = FastFadingModel.NONE
    alpha: float = 1.0
    system_loss_db: float = 0.0
    sigma_db: float = 2.0
    nakagami_m: float = 1.0
    reference_distance_m: float = 1.0

    def __post_init__(self):
        if not isinstance(self.slow_model, SlowFadingModel):
            raise ValueError(f"slow_model must be a SlowFadingModel, got {self.slow_model!r}")
        if not isinstance(self.fast_model, FastFadingModel):
            raise ValueError(f"fast_model must be a FastFadingModel, got {self.fast_model!r}")
        if not (self.alpha > 0.0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.system_loss_db < 0.0:
            raise ValueError(f"system_loss_db must be >= 0 dB, got {self.system_loss_db}")
        if self.sigma_db < 0.0:
            raise ValueError(f"sigma_db must be >= 0 dB, got {self.sigma_db}")
        # Gamma power sampling needs shape >= 0.5 for a proper envelope.
        if self.nakagami_m < 0.5:
            raise ValueError(f"nakagami_m must be >= 0.5, got {self.nakagami_m}")
        if not (self.reference_distance_m > 0.0 and math.isfinite(self.reference_distance_m)):
            raise ValueError(f"reference_distance_m must be positive, got {self.reference_distance_m}")


def validate_dsrc_profile(radio: RadioParams) -> None:
    """Raise ValueError if the radio violates the 5.9 GHz ITS deployment limits."""
    lo, hi = DSRC_BAND_HZ
    if not (lo <= radio.carrier_frequency_hz <= hi):
        raise ValueError(
            f"carrier {radio.carrier_frequency_hz/1e9:.4f} GHz outside the "
            f"{lo/1e9:.3f}-{hi/1e9:.3f} GHz ITS band"
        )
    if radio.tx_power_mw > DSRC_MAX_TX_POWER_MW:
        raise ValueError(f"tx power {radio.tx_power_mw} mW exceeds {DSRC_MAX_TX_POWER_MW} mW")


def free_space_rx_power(radio: RadioParams, fading: FadingParams) -> float:
    """Received power at the reference distance, in dBm.

    Friis transmission with isotropic-relative gains and the fixed system
    loss applied: P_t G_t G_r lambda^2 / ((4 pi)^2 d0^2 L).
    """
    lam = SPEED_OF_LIGHT_M_S / radio.carrier_frequency_hz
    loss_linear = to_linear(fading.system_loss_db)
    pr_mw = (
        radio.tx_power_mw
        * radio.antenna_gain_tx
        * radio.antenna_gain_rx
        * lam**2
        / (FOUR_PI**2 * fading.reference_distance_m**2 * loss_linear)
    )
    return float(to_db(pr_mw))


def _check_distance(distance) -> np.ndarray:
    d = np.asarray(distance, dtype=float)
    if not np.all(np.isfinite(d)) or np.any(d <= 0.0):
        raise ValueError("distance must be finite and positive")
    return d


def log_distance_rx_power(radio: RadioParams, fading: FadingParams, distance) -> np.ndarray | float:
    """Deterministic slow-stage received power at one or more distances, dBm.

    Decays from the free-space reference by 10 * alpha dB per decade.
    Distances inside the reference distance clamp to it, so the reference
    power is the model's ceiling.
    """
    d = _check_distance(distance)
    d_eff = np.maximum(d, fading.reference_distance_m)
    p = free_space_rx_power(radio, fading) - 10.0 * fading.alpha * np.log10(
        d_eff / fading.reference_distance_m
    )
    return float(p) if np.isscalar(distance) or np.ndim(distance) == 0 else p


def lognormal_rx_power(radio, fading, distance, rng, size=None):
    """Slow-stage received power with Gaussian shadowing, dBm.

    Adds N(0, sigma_db^2) to the log-distance mean. With size=None a single
    float is returned; otherwise an array of independent draws at the same
    distance(s).
    """
    mean = log_distance_rx_power(radio, fading, distance)
    if size is None:
        return float(mean + fading.sigma_db * rng.standard_normal())
    return mean + fading.sigma_db * rng.standard_normal(size)


def nakagami_power_sample(omega_mw, m, rng, size=None):
    """Draw received power (mW) from a Nakagami-m envelope with mean omega_mw.

    The squared envelope of a Nakagami-m signal is Gamma distributed with
    shape m and scale omega/m, so power is sampled from that Gamma directly:
    mean omega, variance omega^2 / m. Sampling is by inverse transform (one
    uniform per draw), which keeps draws varying smoothly with m under a
    fixed random stream.
    """
    omega = np.asarray(omega_mw, dtype=float)
    if not np.all(np.isfinite(omega)) or np.any(omega <= 0.0):
        raise ValueError("omega_mw must be finite and positive")
    if not (m >= 0.5 and math.isfinite(m)):
        raise ValueError(f"nakagami m must be >= 0.5, got {m}")
    u = rng.random(size)
    sample = omega / m * special.gammaincinv(m, u)
    return float(sample) if size is None and np.ndim(omega_mw) == 0 else sample


def cascade_rx_power(radio, fading, distance, rng, size=None, fast_rng=None):
    """Per-packet received power through the slow and fast stages, dBm.

    The slow stage consumes draws from ``rng`` (only under LOGNORMAL); the
    fast stage consumes from ``fast_rng`` when given, else from ``rng``.
    Separate streams keep one stage's draws independent of whether the
    other stage is enabled.
    """
    if fading.slow_model is SlowFadingModel.LOGNORMAL:
        slow_dbm = lognormal_rx_power(radio, fading, distance, rng, size=size)
    else:
        slow_dbm = log_distance_rx_power(radio, fading, distance)
        if size is not None:
            slow_dbm = np.broadcast_to(np.asarray(slow_dbm, dtype=float), size).copy()
    if fading.fast_model is FastFadingModel.NONE:
        return slow_dbm
    omega_mw = to_linear(np.asarray(slow_dbm)) if size is not None else to_linear(float(slow_dbm))
    power_mw = nakagami_power_sample(
        omega_mw, fading.nakagami_m, fast_rng if fast_rng is not None else rng, size=size
    )
    out = to_db(power_mw)
    return float(out) if size is None else out


def deterministic_gain_db(radio: RadioParams, fading: FadingParams, distance):
    """Non-random channel gain relative to transmit power, in dB.

    Shadowing and fast fading excluded. Feasible configurations keep this
    at or below zero over every link distance; a positive value means the
    model would amplify the signal.
    """
    return log_distance_rx_power(radio, fading, distance) - to_db(radio.tx_power_mw)


def snr_threshold_db(data_rate_mbps: int, table=None) -> float:
    """Minimum decode SNR for a data rate, from the default or a custom table."""
    thresholds = SNR_THRESHOLDS_DB if table is None else table
    try:
        return float(thresholds[data_rate_mbps])
    except KeyError:
        raise ValueError(f"no SNR threshold for data rate {data_rate_mbps} Mbps") from None


def is_received(rx_power_dbm: float, radio: RadioParams, snr_table=None):
    """Decide delivery of a packet received at rx_power_dbm.

    Returns (delivered, reason). A packet is delivered iff the power clears
    the receiver sensitivity and the margin over the noise floor clears the
    data rate's SNR threshold. Sensitivity is checked first.
    """
    if rx_power_dbm < radio.rx_sensitivity_dbm:
        return False, DeliveryReason.BELOW_SENSITIVITY
    threshold = snr_threshold_db(radio.data_rate_mbps, snr_table)
    if rx_power_dbm - radio.noise_floor_dbm < threshold:
        return False, DeliveryReason.BELOW_SNR
    return True, DeliveryReason.DELIVERED
