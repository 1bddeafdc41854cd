"""Seeded random Hermitian instances with a controllable spectrum.

Eigenvectors come from a symmetrized complex Gaussian (GUE) matrix; the
eigenvalues are then replaced ("spectral surgery") according to the profile.
Each trial draws from its own stream ``default_rng([seed, trial])`` so trials
are reproducible independently of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..linalg import HermitianMatrix

__all__ = ["InstanceGenerator", "SpectrumProfile", "TrialInstance", "haar_unitary"]

SPECTRAL_RADIUS = 1.5
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SpectrumProfile:
    """``well_separated``, ``clustered`` (pairs ``gap`` apart) or
    ``degenerate`` (exact repeats with the given multiplicities)."""

    kind: str = "well_separated"
    gap: float = 1e-3
    multiplicities: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("well_separated", "clustered", "degenerate"):
            raise ValueError(f"unknown spectrum profile {self.kind!r}")
        if self.gap <= 0:
            raise ValueError("cluster gap must be positive")
        if any(m < 1 for m in self.multiplicities):
            raise ValueError("multiplicities must be positive")
        object.__setattr__(self, "multiplicities", tuple(int(m) for m in self.multiplicities))

    @classmethod
    def parse(cls, spec) -> "SpectrumProfile":
        """Accepts a profile, a dict, or strings like ``clustered:1e-4`` and
        ``degenerate:3,2``."""
        if isinstance(spec, SpectrumProfile):
            return spec
        if isinstance(spec, dict):
            return cls(
                spec.get("kind", "well_separated"),
                float(spec.get("gap", 1e-3)),
                tuple(spec.get("multiplicities", ())),
            )
        kind, _, arg = str(spec).partition(":")
        if kind == "clustered" and arg:
            return cls(kind, gap=float(arg))
        if kind == "degenerate" and arg:
            return cls(kind, multiplicities=tuple(int(m) for m in arg.split(",")))
        return cls(kind)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gap": self.gap, "multiplicities": list(self.multiplicities)}


def _separated(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    if count == 1:
        return np.array([rng.uniform(-0.5, 0.5) * radius])
    base = np.linspace(-radius, radius, count)
    spacing = base[1] - base[0]
    lam = base + rng.uniform(-0.25, 0.25, count) * spacing
    return np.clip(lam, -radius, radius)


def _spectrum(rng: np.random.Generator, profile: SpectrumProfile, dim: int, radius: float) -> np.ndarray:
    if profile.kind == "well_separated":
        return _separated(rng, dim, radius)
    if profile.kind == "clustered":
        # pairs (c, c + gap) plus a singleton when dim is odd
        centers = _separated(rng, (dim + 1) // 2, radius - profile.gap)
        lam = np.concatenate([centers, centers[: dim // 2] + profile.gap])
        return np.sort(lam)
    mult = list(profile.multiplicities) or [min(3, dim), 2]
    blocks, left = [], dim
    for m in mult:
        take = min(m, left)
        if take:
            blocks.append(take)
        left -= take
    blocks += [1] * left
    values = _separated(rng, len(blocks), radius)
    return np.repeat(values, blocks)


def haar_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    _, u = np.linalg.eigh(0.5 * (g + g.conj().T))
    return u


@dataclass
class TrialInstance:
    """Random source for a single trial. Draw order fixes the instance."""

    trial: int
    profile: SpectrumProfile
    dim: int
    perturbation_scale: float
    rng: np.random.Generator = field(repr=False)
    radius: float = SPECTRAL_RADIUS

    def spectrum(self, dim: int | None = None) -> np.ndarray:
        return _spectrum(self.rng, self.profile, dim or self.dim, self.radius)

    def hermitian(self, eigenvalues=None) -> HermitianMatrix:
        lam = self.spectrum() if eigenvalues is None else np.asarray(eigenvalues, dtype=float)
        u = haar_unitary(self.rng, len(lam))
        return HermitianMatrix.from_array((u * lam) @ u.conj().T)

    def perturbation(self, hermitian: bool = True, scale: float | None = None) -> np.ndarray:
        """Random direction with Frobenius norm ``scale`` (default
        ``perturbation_scale``)."""
        d = self.dim
        g = self.rng.standard_normal((d, d)) + 1j * self.rng.standard_normal((d, d))
        if hermitian:
            g = 0.5 * (g + g.conj().T)
        s = self.perturbation_scale if scale is None else scale
        return g * (s / np.linalg.norm(g))


@dataclass(frozen=True)
class InstanceGenerator:
    """Reproducible instance source.

    Independently of the base profile, trials with ``trial % 10 == 0`` use a
    degenerate spectrum and trials with ``trial % 10 == 5`` a clustered one,
    so every block of ten trials exercises the confluent code paths.
    """

    seed: int = 0
    dim: int = 6
    spectrum_profile: SpectrumProfile = SpectrumProfile()
    perturbation_scale: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not self.perturbation_scale > 0:
            raise ValueError("perturbation_scale must be positive")
        object.__setattr__(self, "seed", int(self.seed) & _SEED_MASK)
        object.__setattr__(self, "spectrum_profile", SpectrumProfile.parse(self.spectrum_profile))

    def profile_for(self, trial: int) -> SpectrumProfile:
        base = self.spectrum_profile
        if trial % 10 == 0 and base.kind != "degenerate":
            return SpectrumProfile("degenerate")
        if trial % 10 == 5 and base.kind == "well_separated":
            return SpectrumProfile("clustered", gap=base.gap)
        return base

    def instance(self, trial: int) -> TrialInstance:
        return TrialInstance(
            trial=trial,
            profile=self.profile_for(trial),
            dim=self.dim,
            perturbation_scale=self.perturbation_scale,
            rng=np.random.default_rng([self.seed, trial]),
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "dim": self.dim,
            "spectrum_profile": self.spectrum_profile.to_dict(),
            "perturbation_scale": self.perturbation_scale,
        }
