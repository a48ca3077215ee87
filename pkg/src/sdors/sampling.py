"""Seeded generation of instances and surgery-duration scenarios."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import DurationModel, Instance, Patient, ScenarioSet, ValidationError, make_patient

TIME_LIMITS = (420, 435, 450, 465, 480)
MAX_REJECTION_DRAWS = 10_000


@dataclass(frozen=True)
class GenConfig:
    patients: int = 12
    hospitals: int = 2
    days: int = 2
    rooms: int = 2
    scenarios: int = 10
    kappa1: float = 50.0
    kappa2: float = -5.0
    kappa3: float = -80.0
    kappa4: float = -100.0
    gamma: float = 500.0
    duration: DurationModel = field(default_factory=DurationModel)
    seed: int = 0

    def validate(self) -> None:
        for name in ("patients", "hospitals", "days", "rooms", "scenarios"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if not (self.kappa1 > 0 > self.kappa2 > self.kappa3 > self.kappa4):
            raise ValidationError("kappa ordering must satisfy k1 > 0 > k2 > k3 > k4")
        d = self.duration
        if not (d.low < d.mean < d.high):
            raise ValidationError("duration truncation must bracket the mean")
        if d.sd < 0:
            raise ValidationError("duration sd must be non-negative")

    @property
    def kappa(self) -> tuple[float, float, float, float]:
        return (self.kappa1, self.kappa2, self.kappa3, self.kappa4)


def split_stream(seed: int, label: str) -> int:
    """Derive an independent 64-bit seed from ``seed`` and a text label."""
    payload = f"{int(seed)}|{label}".encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def lognormal_params(mean: float, sd: float) -> tuple[float, float]:
    """Underlying normal (mu, sigma) for a lognormal with the given moments."""
    mu = math.log(mean**2 / math.sqrt(mean**2 + sd**2))
    sigma = math.sqrt(math.log(1.0 + sd**2 / mean**2))
    return mu, sigma


def generate_instance(
    cfg: GenConfig,
    rho: np.ndarray | None = None,
    alpha: np.ndarray | None = None,
) -> Instance:
    """Draw an instance.  ``rho``/``alpha`` override the sampled patient attributes."""
    cfg.validate()
    rng = _rng(split_stream(cfg.seed, "instance"))
    H, D, P = cfg.hospitals, cfg.days, cfg.patients
    B = rng.choice(np.array(TIME_LIMITS, dtype=float), size=(H, D))
    F = np.round(rng.uniform(4000.0, 6000.0, size=(H, D)), 2)
    G = np.round(rng.uniform(1500.0, 2500.0, size=(H, D)), 2)
    r = rng.integers(1, 6, size=P)
    a = rng.integers(60, 121, size=P)
    if rho is not None:
        r = np.broadcast_to(np.asarray(rho, dtype=int), (P,))
    if alpha is not None:
        a = np.broadcast_to(np.asarray(alpha, dtype=int), (P,))
    patients = [make_patient(p, int(r[p]), int(a[p]), D, cfg.kappa, cfg.gamma) for p in range(P)]
    inst = Instance(
        hospitals=H,
        days=D,
        rooms_per_hospital=cfg.rooms,
        patients=patients,
        suite_open_cost=G,
        room_open_cost=F,
        time_limit=B,
        gamma=cfg.gamma,
        kappa=cfg.kappa,
        duration=cfg.duration,
        seed=cfg.seed,
    )
    inst.validate()
    return inst


def sample_durations(
    rng: np.random.Generator, dist: DurationModel, shape: tuple[int, ...]
) -> np.ndarray:
    """Truncated lognormal by rejection, rounded to whole minutes."""
    mu, sigma = lognormal_params(dist.mean, dist.sd)
    out = rng.lognormal(mu, sigma, size=shape)
    bad = (out < dist.low) | (out > dist.high)
    draws = 0
    while bad.any():
        draws += 1
        if draws > MAX_REJECTION_DRAWS:
            raise ValidationError("rejection sampling exceeded its draw cap; check truncation bounds")
        out[bad] = rng.lognormal(mu, sigma, size=int(bad.sum()))
        bad = (out < dist.low) | (out > dist.high)
    return np.rint(out).astype(int)


def sample_scenarios(inst: Instance, count: int, seed: int | None = None) -> ScenarioSet:
    """``count`` duration vectors for the instance's patients."""
    if count < 1:
        raise ValidationError("scenario count must be >= 1")
    if seed is None:
        seed = split_stream(inst.seed, "scenarios")
    rng = _rng(seed)
    T = sample_durations(rng, inst.duration, (count, inst.n_patients))
    return ScenarioSet(durations=T, seed=int(seed))


def with_duration_sd(inst: Instance, sd: float) -> Instance:
    return replace(inst, duration=replace(inst.duration, sd=sd))


__all__ = [
    "GenConfig",
    "Patient",
    "generate_instance",
    "lognormal_params",
    "sample_durations",
    "sample_scenarios",
    "split_stream",
    "with_duration_sd",
]
