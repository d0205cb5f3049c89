"""Core domain types: hidden bit vectors, the read-noise channel, recovery metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BernoulliPrior",
    "FixedPrior",
    "Prior",
    "GroundTruth",
    "ChannelMatrix",
    "RecoveryReport",
    "UndefinedMetricError",
    "sample_ground_truth",
    "hamming_distance",
    "overlap",
    "eps_recovery",
]


class UndefinedMetricError(ValueError):
    """Raised when a metric has no value (e.g. overlap with no one-bits)."""


@dataclass(frozen=True)
class BernoulliPrior:
    """Each agent holds bit one independently with probability ``p``."""

    p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"prior probability must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class FixedPrior:
    """A uniformly random subset of exactly ``k`` agents holds bit one."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError(f"fixed one-count must be non-negative, got {self.k}")


Prior = BernoulliPrior | FixedPrior


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Hidden bit vector together with its number of one-bits."""

    bits: np.ndarray
    ones: int

    def __post_init__(self) -> None:
        if self.bits.ndim != 1:
            raise ValueError("bits must be a one-dimensional vector")
        if self.ones != int(np.count_nonzero(self.bits)):
            raise ValueError("ones does not match the number of 1 entries in bits")

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "GroundTruth":
        arr = np.asarray(bits, dtype=np.int8)
        if arr.size and (arr.min() < 0 or arr.max() > 1):
            raise ValueError("bits must be 0/1 valued")
        arr = arr.copy()
        arr.setflags(write=False)
        return cls(bits=arr, ones=int(arr.sum()))

    @property
    def n(self) -> int:
        return self.bits.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroundTruth):
            return NotImplemented
        return self.ones == other.ones and np.array_equal(self.bits, other.bits)


@dataclass(frozen=True)
class ChannelMatrix:
    """Read-noise channel: probabilities of reading a sent bit as one.

    ``s11`` is the probability that a one-bit is read as one and ``s01`` the
    probability that a zero-bit is read as one.  The complementary entries
    ``s10 = 1 - s11`` and ``s00 = 1 - s01`` are derived.  A channel is only
    valid when reading a one is strictly more likely for a true one-bit,
    i.e. ``s11 - s01 > 0``.
    """

    s11: float
    s01: float

    def __post_init__(self) -> None:
        for name, value in (("s11", self.s11), ("s01", self.s01)):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"channel entry {name} must lie in [0, 1], got {value}")
        if not self.s11 - self.s01 > 0.0:
            raise ValueError(
                f"channel must satisfy s11 - s01 > 0, got s11={self.s11}, s01={self.s01}"
            )

    @property
    def s10(self) -> float:
        return 1.0 - self.s11

    @property
    def s00(self) -> float:
        return 1.0 - self.s01

    @classmethod
    def identity(cls) -> "ChannelMatrix":
        """Noise-free channel: every bit is read exactly as sent."""
        return cls(s11=1.0, s01=0.0)

    @classmethod
    def z_channel(cls, s10: float) -> "ChannelMatrix":
        """False negatives only: one-bits flip to zero with probability ``s10``."""
        return cls(s11=1.0 - s10, s01=0.0)


@dataclass(frozen=True)
class RecoveryReport:
    """Outcome of comparing an estimate against the ground truth."""

    hamming: int
    overlap: float
    eps_ok: bool
    epsilon: float


def sample_ground_truth(n: int, prior: Prior, rng: np.random.Generator) -> GroundTruth:
    """Draw a hidden bit vector of length ``n`` from the given prior."""
    if n < 1:
        raise ValueError(f"number of agents must be at least 1, got {n}")
    if isinstance(prior, BernoulliPrior):
        bits = (rng.random(n) < prior.p).astype(np.int8)
    elif isinstance(prior, FixedPrior):
        if prior.k > n:
            raise ValueError(f"fixed one-count {prior.k} exceeds number of agents {n}")
        bits = np.zeros(n, dtype=np.int8)
        if prior.k:
            bits[rng.choice(n, size=prior.k, replace=False)] = 1
    else:
        raise TypeError(f"unsupported prior: {prior!r}")
    bits.setflags(write=False)
    return GroundTruth(bits=bits, ones=int(bits.sum()))


def _as_bits(vec: np.ndarray | GroundTruth) -> np.ndarray:
    if isinstance(vec, GroundTruth):
        return vec.bits
    return np.asarray(vec)


def hamming_distance(a: np.ndarray | GroundTruth, b: np.ndarray | GroundTruth) -> int:
    """Number of positions where the two bit vectors differ."""
    av, bv = _as_bits(a), _as_bits(b)
    if av.size != bv.size:
        raise ValueError(f"length mismatch: {av.size} vs {bv.size}")
    return int(np.count_nonzero(av != bv))


def overlap(truth: GroundTruth, estimate: np.ndarray) -> float:
    """Fraction of true one-bit agents that the estimate also classifies as one."""
    est = _as_bits(estimate)
    if est.size != truth.n:
        raise ValueError(f"length mismatch: {truth.n} vs {est.size}")
    if truth.ones == 0:
        raise UndefinedMetricError("overlap is undefined when the truth has no one-bits")
    hits = int(np.count_nonzero((truth.bits == 1) & (est == 1)))
    return hits / truth.ones


def eps_recovery(truth: GroundTruth, estimate: np.ndarray, epsilon: float) -> RecoveryReport:
    """Check the estimate against the Hamming budget ``2 * epsilon * ones``.

    When the truth has no one-bits the overlap is reported as 1.0 (vacuous
    recovery) rather than raising, so the report stays well-formed.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    dist = hamming_distance(truth, estimate)
    ov = 1.0 if truth.ones == 0 else overlap(truth, estimate)
    return RecoveryReport(
        hamming=dist,
        overlap=ov,
        eps_ok=dist <= 2.0 * epsilon * truth.ones,
        epsilon=epsilon,
    )
