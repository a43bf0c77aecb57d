"""Workload generators: seeded folded-normal streams and lower-bound adversaries.

The RNG is SplitMix64, written out here so streams are bit-identical on every
platform::

    state = (state + 0x9E3779B97F4A7C15) mod 2^64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    return z ^ (z >> 31)

A uniform in (0, 1) is ``((next >> 11) + 0.5) * 2^-53``.  Gaussians come from
the inverse normal CDF (Wichura's AS241, the PPND16 rational approximation),
which uses only +, -, *, / and one log/sqrt, so results do not depend on a
platform's libm beyond those correctly-rounded operations.

Amount sampling, per transaction: draw u, set ``amount = floor(|sigma *
Phi^-1(u)| + 0.5)``, redraw while the amount is 0; then draw one more uniform
``v`` and send left-to-right iff ``v < p_ltr``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

from .core import Direction, PcnError, Transaction, TransactionStream, money

MASK64 = (1 << 64) - 1


class GridTooCoarse(PcnError):
    pass


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Open interval (0, 1); never returns 0 or 1."""
        return ((self.next_u64() >> 11) + 0.5) * 2.0**-53


# AS241 PPND16 coefficients
_A = (
    3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
    3.3430575583588128105e4, 2.5090809287301226727e3,
)
_B = (
    1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
    2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
    5.2264952788528545610e3,
)
_C = (
    1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4,
)
_D = (
    1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
    1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_E = (
    6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
    2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7,
)
_F = (
    1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
    7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _poly(coef, x):
    acc = 0.0
    for c in reversed(coef):
        acc = acc * x + c
    return acc


def inverse_normal_cdf(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_A, r) / _poly(_B, r)
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        val = _poly(_C, r) / _poly(_D, r)
    else:
        r -= 5.0
        val = _poly(_E, r) / _poly(_F, r)
    return -val if q < 0 else val


@dataclass(frozen=True)
class StreamConfig:
    sigma: float = 3.0
    p_ltr: float = 0.5
    length: int = 50
    seed: int = 0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if not 0.0 <= self.p_ltr <= 1.0:
            raise ValueError("p_ltr must be in [0, 1]")
        if self.length < 0:
            raise ValueError("length must be >= 0")


def sample_amount(rng: SplitMix64, sigma: float) -> int:
    while True:
        amount = math.floor(abs(sigma * inverse_normal_cdf(rng.uniform())) + 0.5)
        if amount > 0:
            return amount


def sample_stream(config: StreamConfig) -> TransactionStream:
    rng = SplitMix64(config.seed)
    txs = []
    for _ in range(config.length):
        amount = sample_amount(rng, config.sigma)
        direction = Direction.LTR if rng.uniform() < config.p_ltr else Direction.RTL
        txs.append(Transaction(amount, direction))
    return TransactionStream(tuple(txs))


def rounded_folded_normal_mean(sigma: float) -> float:
    """Mean of round(|N(0, sigma^2)|) conditioned on being nonzero."""
    phi = lambda z: 0.5 * math.erfc(-z / math.sqrt(2.0))  # noqa: E731
    p0 = 2.0 * phi(0.5 / sigma) - 1.0
    total = 0.0
    k = 1
    while True:
        pk = 2.0 * (phi((k + 0.5) / sigma) - phi((k - 0.5) / sigma))
        total += k * pk
        if k > 10 and k > 40 * sigma:
            break
        k += 1
    return total / (1.0 - p0)


# ---------------------------------------------------------------------------
# adversaries
# ---------------------------------------------------------------------------


class AdversaryVariant(enum.Enum):
    EPSILON = "epsilon"
    EPOCH = "epoch"


@dataclass(frozen=True)
class AdversaryConfig:
    variant: AdversaryVariant
    f1: Fraction = Fraction(3)
    epsilon: Fraction = Fraction(3)
    length: int = 0
    A: int = 8
    c: int = 1
    C: int = 4

    def build(self) -> TransactionStream:
        if self.variant is AdversaryVariant.EPSILON:
            return adversary_epsilon_stream(self.f1, self.epsilon, self.length)
        return adversary_epoch_stream(self.A, self.c, self.C)


def adversary_epsilon_stream(f1, epsilon, length: int) -> TransactionStream:
    """``length`` left-to-right transactions of size epsilon/3.

    ``f1`` is not used to build the stream; it is part of the adversary's
    parameters because the interesting length scales with it.
    """
    size = money(epsilon) / 3
    if length < 0:
        raise ValueError("length must be >= 0")
    if size.denominator != 1 or size < 1:
        raise GridTooCoarse(f"epsilon/3 = {size} is not a whole number of coins")
    return TransactionStream.of([int(size)] * length)


def epoch_phase_count(c: int, C: int) -> int:
    """Largest P with (c+1)^P <= C, computed in integers."""
    p = 0
    while (c + 1) ** (p + 1) <= C:
        p += 1
    return p


def adversary_epoch_stream(A: int, c: int, C: int) -> TransactionStream:
    """One epoch: phase i has (c+1)^i ltr transactions of size A/(c+1)^i for
    i = 0..P, then a single rtl transaction of size A."""
    if c < 1 or C < 1 or A < 1:
        raise ValueError("A, c and C must be >= 1")
    txs = []
    for i in range(epoch_phase_count(c, C) + 1):
        n = (c + 1) ** i
        if A % n:
            raise GridTooCoarse(f"A={A} is not divisible by (c+1)^{i}={n}")
        txs.extend([Transaction(A // n, Direction.LTR)] * n)
    txs.append(Transaction(A, Direction.RTL))
    return TransactionStream(tuple(txs))
