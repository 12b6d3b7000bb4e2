"""V2I link model.

Each vehicle broadcasts a telemetry message once per second, starting at a
random phase drawn when it enters the link.  A message is received by the
approach's roadside antenna when its SNR clears the receiver's sensitivity:
the SNR follows a two-ray interference path loss plus a per-approach penalty
for the severity of fading and interference, and the sensitivity itself
varies per message around the configured threshold, standing in for the
moment-to-moment variability of those effects.

Delivery consumes no random state: the sensitivity variation is a pure hash
of (vehicle id, broadcast index), so a trace replays bit-identically and a
message delivered under some penalty is always delivered under any smaller
one.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from statistics import NormalDist

from .scenario import ChannelParams

SPEED_OF_LIGHT_MPS = 299_792_458.0

# Messages sent closer to the stop line than this are evaluated at this
# horizontal distance; the spherical-spreading term degenerates at d = 0.
MIN_LINK_DISTANCE_M = 1.0

_M64 = (1 << 64) - 1
_UNIT_NORMAL = NormalDist()


@dataclass(frozen=True)
class CamMessage:
    vehicle_id: int
    seq: int                 # broadcast index of this vehicle, 0-based
    t: float                 # transmission time, s
    distance_m: float        # ground-truth distance to the stop line
    speed_mps: float
    lane: int
    signal_group: str
    approach: str


@dataclass(frozen=True)
class LinkBudget:
    distance_m: float
    path_loss_db: float
    rx_power_dbm: float
    snr_db: float
    penalty_db: float
    sensitivity_offset_db: float
    delivered: bool


class CommsCounters:
    """Sent/received tallies per approach."""

    def __init__(self, approaches):
        self.sent = {a: 0 for a in approaches}
        self.received = {a: 0 for a in approaches}

    def record(self, approach: str, delivered: bool):
        self.sent[approach] += 1
        if delivered:
            self.received[approach] += 1

    def totals(self) -> tuple[int, int]:
        return sum(self.sent.values()), sum(self.received.values())


def two_ray_path_loss_db(distance_m: float, h_tx_m: float, h_rx_m: float,
                         freq_hz: float, permittivity: float) -> float:
    """Path loss of the coherent sum of the line-of-sight ray and the
    ground-reflected ray, in dB.  Symmetric in the two antenna heights."""
    if distance_m <= 0:
        raise ValueError(f"distance must be > 0, got {distance_m}")
    lam = SPEED_OF_LIGHT_MPS / freq_hz
    d_los = math.hypot(distance_m, h_tx_m - h_rx_m)
    d_ref = math.hypot(distance_m, h_tx_m + h_rx_m)
    sin_theta = (h_tx_m + h_rx_m) / d_ref
    cos_theta = distance_m / d_ref
    root = math.sqrt(permittivity - cos_theta * cos_theta)
    gamma = (sin_theta - root) / (sin_theta + root)
    # d_ref - d_los rewritten to avoid cancellation at long range
    path_delta = 4.0 * h_tx_m * h_rx_m / (d_ref + d_los)
    phi = 2.0 * math.pi * path_delta / lam
    interference = abs(1.0 + gamma * cmath.exp(1j * phi))
    if interference == 0.0:
        return math.inf
    return 20.0 * math.log10(4.0 * math.pi * distance_m / lam / interference)


def schedule_first_cam(rng, cam_period_s: float) -> float:
    """Offset of a vehicle's first transmission after entry, uniform on
    [0, period); later transmissions follow every period exactly."""
    return rng.random() * cam_period_s


def _mix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def sensitivity_offset_db(vehicle_id: int, seq: int, sigma_db: float) -> float:
    """Per-message receiver sensitivity offset: a zero-mean normal deviate
    in dB, derived from a pure integer hash so no random state is consumed."""
    if sigma_db == 0.0:
        return 0.0
    h = _mix64(_mix64(vehicle_id + 1) + seq)
    u = ((h >> 11) + 0.5) / float(1 << 53)
    return sigma_db * _UNIT_NORMAL.inv_cdf(u)


def link_budget(distance_m: float, params: ChannelParams, penalty_db: float,
                sensitivity_offset: float = 0.0) -> LinkBudget:
    """Evaluate one transmission.  The sensitivity comparison is inclusive:
    a message exactly at the effective threshold is delivered."""
    d = max(distance_m, MIN_LINK_DISTANCE_M)
    loss = two_ray_path_loss_db(d, params.rsu_antenna_height_m,
                                params.vehicle_antenna_height_m,
                                params.carrier_freq_hz, params.asphalt_permittivity)
    rx_power = params.tx_power_dbm - loss
    snr = rx_power - penalty_db - params.noise_dbm
    return LinkBudget(
        distance_m=distance_m,
        path_loss_db=loss,
        rx_power_dbm=rx_power,
        snr_db=snr,
        penalty_db=penalty_db,
        sensitivity_offset_db=sensitivity_offset,
        delivered=snr >= params.snr_threshold_db + sensitivity_offset,
    )


def deliver(msgs: list[CamMessage], params: ChannelParams,
            penalties_by_approach: dict[str, float], lossless: bool,
            counters: CommsCounters | None = None,
            ) -> tuple[list[CamMessage], list[LinkBudget]]:
    """Pass a batch of messages through the channel.

    Returns the delivered messages and the per-message link budgets.  Under
    the lossless (baseline) condition everything is delivered, but budgets
    are still evaluated so the log keeps the same shape.  When ``counters``
    is given, sent/received tallies are updated per approach.
    """
    received: list[CamMessage] = []
    budgets: list[LinkBudget] = []
    sigma = params.sensitivity_sigma_db
    for msg in msgs:
        offset = sensitivity_offset_db(msg.vehicle_id, msg.seq, sigma)
        budget = link_budget(msg.distance_m, params,
                             penalties_by_approach[msg.approach], offset)
        if lossless:
            budget = LinkBudget(budget.distance_m, budget.path_loss_db,
                                budget.rx_power_dbm, budget.snr_db,
                                budget.penalty_db, budget.sensitivity_offset_db, True)
        budgets.append(budget)
        if counters is not None:
            counters.record(msg.approach, budget.delivered)
        if budget.delivered:
            received.append(msg)
    return received, budgets
