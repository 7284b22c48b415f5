"""Rotary-wing propulsion power, per-step energy, battery accounting and
total-system energy efficiency."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .config import EnergyParams


def propulsion_power(v: float, params: EnergyParams) -> float:
    """Propulsion power in watts at horizontal speed ``v`` (m/s).

    ``params.power_model_sign`` picks the sign of the v^2 / (2 v0^2) term in
    the induced-power bracket: ``"paper"`` adds it, ``"corrected"`` subtracts
    it (the usual rotary-wing form, where induced power falls with speed).
    """
    if v < 0:
        raise ValueError(f"negative speed {v}")
    u_tip, v0 = params.tip_speed, params.mean_hover_velocity
    blade = params.kappa0 * (1.0 + 3.0 * v * v / (u_tip * u_tip))
    root = math.sqrt(1.0 + v ** 4 / (4.0 * v0 ** 4))
    half = v * v / (2.0 * v0 * v0)
    bracket = root + half if params.power_model_sign == "paper" else root - half
    induced = params.kappa1 * math.sqrt(max(bracket, 0.0))
    parasite = 0.5 * params.kappa2 * v ** 3
    return blade + induced + parasite


def step_energy(v: float, dt: float, params: EnergyParams) -> float:
    if dt <= 0:
        raise ValueError(f"step duration must be positive, got {dt}")
    return dt * propulsion_power(v, params)


@dataclass(frozen=True)
class BatteryState:
    capacity: float
    consumed: float = 0.0
    last_step_energy: float = 0.0
    alive: bool = True


def consume(battery: BatteryState, e: float) -> BatteryState:
    if e < 0:
        raise ValueError(f"negative energy {e}")
    consumed = battery.consumed + e
    alive = battery.alive and consumed < battery.capacity
    return replace(battery, consumed=consumed, last_step_energy=e, alive=alive)


def total_system_ee(total_bits: float, total_energy: float) -> float:
    """Delivered bits per joule over all UAVs and time-steps."""
    if not total_energy > 0:
        raise ValueError("energy efficiency is undefined for zero total energy")
    return total_bits / total_energy
