"""Gaussian noise models (iid and dependent) and reproducible sampling.

Dependent noise is specified through a symmetric factor A with covariance
``Sigma = A @ A``, so sampling is a single matrix-vector product ``A @ xi``
with ``xi`` standard normal.  Randomness flows through counter-style
(seed, stream_id) pairs so that replicate r can use stream r and results
are reproducible under any degree of concurrency.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from ._validate import as_float_vector, as_square_matrix, check_symmetric


@dataclass(frozen=True)
class RngStream:
    """A named random stream: (seed, stream_id) -> deterministic generator."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise ValueError("seed and stream_id must be non-negative integers")

    def generator(self) -> np.random.Generator:
        """A fresh generator; identical draws for identical (seed, stream_id)."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.default_rng(ss)


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Noise law: iid Gaussian sigma2*I or N(0, A @ A) with A symmetric."""

    kind: str
    sigma2: float | None = None
    factor_a: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "iid":
            if self.sigma2 is None or not self.sigma2 > 0:
                raise ValueError("iid noise requires sigma2 > 0")
        elif self.kind == "factor":
            a = as_square_matrix(self.factor_a, name="factor_a")
            check_symmetric(a, 1e-10, "factor_a")
            a = a.copy()
            a.flags.writeable = False
            object.__setattr__(self, "factor_a", a)
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def iid(cls, sigma2: float) -> "NoiseSpec":
        return cls("iid", sigma2=float(sigma2))

    @classmethod
    def factor(cls, a) -> "NoiseSpec":
        return cls("factor", factor_a=np.asarray(a, dtype=float))

    @classmethod
    def ar1(cls, n: int, rho: float, scale: float = 1.0) -> "NoiseSpec":
        """Factor noise with covariance ``scale^2 * rho^|i-j|``."""
        if not -1.0 < rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")
        if not scale > 0:
            raise ValueError("scale must be > 0")
        idx = np.arange(n)
        sigma = scale**2 * rho ** np.abs(idx[:, None] - idx[None, :])
        return cls.factor(factor_from_covariance(sigma))


def factor_from_covariance(sigma) -> np.ndarray:
    """Symmetric PSD square root A of a covariance matrix (Sigma = A @ A)."""
    sigma = as_square_matrix(sigma, name="Sigma")
    check_symmetric(sigma, 1e-8, "Sigma")
    w, v = np.linalg.eigh(sigma)
    if np.min(w) < -1e-8 * max(np.max(np.abs(w)), 1.0):
        raise ValueError("Sigma is not positive semidefinite")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def sample_noise(spec: NoiseSpec, n: int, rng: RngStream) -> np.ndarray:
    """Draw one noise vector; deterministic given the stream.

    Both kinds consume the same underlying standard-normal path, so an iid
    spec and a factor spec with A = sigma*I produce identical vectors for
    the same stream.
    """
    xi = rng.generator().standard_normal(n)
    if spec.kind == "iid":
        return np.sqrt(spec.sigma2) * xi
    if spec.factor_a.shape[0] != n:
        raise ValueError(f"factor_a is {spec.factor_a.shape[0]}x..., expected {n}")
    return spec.factor_a @ xi


def covariance(spec: NoiseSpec, n: int) -> np.ndarray:
    """The exact covariance matrix: sigma2*I or A @ A."""
    if spec.kind == "iid":
        return spec.sigma2 * np.eye(n)
    if spec.factor_a.shape[0] != n:
        raise ValueError(f"factor_a is {spec.factor_a.shape[0]}x..., expected {n}")
    return spec.factor_a @ spec.factor_a


def generate_sample(f, spec: NoiseSpec, rng: RngStream) -> np.ndarray:
    """Observations Y = F + noise."""
    from .models import SignalSpec

    if isinstance(f, SignalSpec):
        f = f.values
    f = as_float_vector(f, name="F")
    return f + sample_noise(spec, f.size, rng)


def from_config(config: Mapping, n: int | None = None) -> NoiseSpec:
    """Build a NoiseSpec from its harness-JSON description.

    Supported forms: ``{"kind": "iid", "sigma2": s}``,
    ``{"kind": "ar1", "rho": r, "scale": s}`` (requires ``n``), and
    ``{"kind": "factor", "a_path": "<.npy file>"}``.
    """
    kind = config["kind"]
    if kind == "iid":
        return NoiseSpec.iid(float(config["sigma2"]))
    if kind == "ar1":
        if n is None:
            raise ValueError("ar1 noise config requires the sample size n")
        return NoiseSpec.ar1(n, float(config["rho"]), float(config.get("scale", 1.0)))
    if kind == "factor":
        a = np.load(Path(config["a_path"]))
        return NoiseSpec.factor(a)
    raise ValueError(f"unknown noise kind {kind!r}")
