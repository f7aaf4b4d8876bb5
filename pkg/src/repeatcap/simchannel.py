"""Monte-Carlo repeat channels and the pre-processor / run-processor pipeline.

All randomness comes from a Philox counter-based generator keyed by an
explicit 64-bit seed. Each trial consumes one row of uniforms, so the
compiled and pure-Python kernels see identical inputs.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._backend import kernels

DEFAULT_K = 3
DEFAULT_CLIP = 30
MIN_TRIALS = 10_000
_BLOCK = 20_000


class InsufficientSamplesWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class RepetitionRule:
    """Law D of the number of copies of each input bit."""

    kind: str
    param: float

    def __post_init__(self):
        kind = str(self.kind).lower()
        object.__setattr__(self, "kind", kind)
        if kind == "bernoulli":
            if not 0.0 < self.param <= 1.0:
                raise ValueError("Bernoulli rule needs p in (0, 1]")
        elif kind == "poisson":
            if not self.param > 0.0:
                raise ValueError("Poisson rule needs lambda > 0")
        else:
            raise ValueError(f"unknown repetition rule {self.kind!r}")

    @classmethod
    def bernoulli(cls, p):
        return cls("bernoulli", float(p))

    @classmethod
    def poisson(cls, lam):
        return cls("poisson", float(lam))

    @property
    def code(self):
        return 0 if self.kind == "bernoulli" else 1

    @property
    def d(self):
        """Pr[D = 0]."""
        return 1.0 - self.param if self.kind == "bernoulli" else math.exp(-self.param)

    @property
    def p(self):
        return 1.0 - self.d

    @property
    def mean(self):
        return self.param

    @property
    def bar_mean(self):
        """E[D | D > 0]."""
        return self.mean / self.p

    def draw(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "bernoulli":
            return (u < self.param).astype(np.int64)
        return stats.poisson.ppf(u, self.param).astype(np.int64)

    def draw_bar(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "bernoulli":
            return np.ones(u.shape, dtype=np.int64)
        d = self.d
        return np.maximum(stats.poisson.ppf(d + u * (1.0 - d), self.param), 1).astype(np.int64)


@dataclass(frozen=True)
class RunLengthSequence:
    runs: tuple
    first_bit: int = 0

    def __post_init__(self):
        if self.first_bit not in (0, 1):
            raise ValueError("first_bit must be 0 or 1")
        if any(int(r) < 1 for r in self.runs):
            raise ValueError("run lengths must be positive")

    @classmethod
    def from_bits(cls, bits):
        bits = np.asarray(bits, dtype=np.int64)
        if bits.size == 0:
            return cls((), 0)
        edges = np.flatnonzero(np.diff(bits)) + 1
        bounds = np.concatenate([[0], edges, [bits.size]])
        return cls(tuple(int(x) for x in np.diff(bounds)), int(bits[0]))

    def to_bits(self):
        vals = [(self.first_bit + j) % 2 for j in range(len(self.runs))]
        return np.repeat(np.array(vals, dtype=np.int64), np.array(self.runs, dtype=np.int64))

    def __len__(self):
        return len(self.runs)


def make_rng(seed):
    """Philox generator for a non-negative 64-bit seed."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be a 64-bit non-negative integer")
    return np.random.Generator(np.random.Philox(seed))


def _open_uniforms(rng, shape):
    # strictly inside (0, 1): log(u) stays finite and the Poisson search terminates
    return (rng.integers(0, 2**53, size=shape, dtype=np.int64) + 0.5) / 2.0**53


def _as_bits(bits):
    bits = np.asarray(bits, dtype=np.int64)
    if bits.ndim != 1 or bits.size == 0:
        raise ValueError("input must be a non-empty bit sequence")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("input entries must be 0 or 1")
    if bits[0] != 0:
        raise ValueError("the first input bit must be 0")
    return bits


def parse_bits(text):
    """'0001101' -> array of bits."""
    text = text.strip()
    if not text or set(text) - {"0", "1"}:
        raise ValueError(f"not a bit string: {text!r}")
    return np.array([int(c) for c in text], dtype=np.int64)


def _rng_from(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return make_rng(seed)


def simulate_repeat_channel(rule, bits, seed):
    """Replace every bit by D copies; the first bit draws from D | D > 0."""
    bits = _as_bits(bits)
    u = _open_uniforms(_rng_from(seed), bits.size)
    counts = np.empty(bits.size, dtype=np.int64)
    counts[0] = rule.draw_bar(u[:1])[0]
    counts[1:] = rule.draw(u[1:])
    return np.repeat(bits, counts)


@dataclass(frozen=True)
class PreprocessorTrace:
    """Outputs Z and geometric draws G of one pre-processor run.

    ``seen_last`` is the number of even-run bits passed in the final
    iteration, which always ends by exhausting the input.
    """

    z: tuple
    g: tuple
    seen_last: int

    @property
    def m(self):
        return len(self.z)

    @property
    def delta(self):
        """Slack in n = sum_i (Z_i + G_i - 1) - delta, with 0 <= delta <= G_M - 1."""
        return self.g[-1] - 1 - self.seen_last


def _geometric(p, u):
    if p >= 1.0:
        return 1
    return max(1, int(math.ceil(math.log(u) / math.log1p(-p))))


def simulate_preprocessor(rule, bits, seed, geo_p=None, trace=False):
    """Positive integers Z produced by the pre-processor.

    Each iteration draws G ~ Geometric(p) on {1, 2, ...}, skips G - 1 bits of
    the even runs, and outputs the total length of the odd runs before the
    G-th even bit, which then starts the next iteration.
    """
    bits = _as_bits(bits)
    rng = _rng_from(seed)
    geo_p = rule.p if geo_p is None else float(geo_p)
    n = bits.size
    zs, gs = [], []
    start = 0
    seen = 0
    while True:
        g = _geometric(geo_p, float(_open_uniforms(rng, 1)[0]))
        ref = bits[start]
        seen = 0
        z = 0
        i = start
        found = False
        while i < n:
            if bits[i] != ref:
                seen += 1
                if seen == g:
                    found = True
                    break
            else:
                z += 1
            i += 1
        zs.append(z)
        gs.append(g)
        if not found:
            break
        start = i
    if trace:
        return PreprocessorTrace(tuple(zs), tuple(gs), seen)
    return zs


def simulate_runprocessor(rule, z, seed):
    """One draw of D-bar plus z - 1 independent draws of D."""
    if int(z) != z or z < 1:
        raise ValueError("z must be a positive integer")
    z = int(z)
    u = _open_uniforms(_rng_from(seed), z)
    return int(rule.draw_bar(u[:1])[0] + rule.draw(u[1:]).sum())


def direct_run_lengths(rule, bits, trials, seed, k=DEFAULT_K, clip=DEFAULT_CLIP):
    """First k output run lengths of the channel itself, one row per trial."""
    bits = _as_bits(bits)
    return _batched(lambda u: kernels.direct_runs(bits, rule.code, rule.param, u, k, clip),
                    trials, bits.size, seed)


def composed_run_lengths(rule, bits, trials, seed, k=DEFAULT_K, clip=DEFAULT_CLIP, geo_p=None):
    """First k outputs of the pre-processor followed by the run-processor."""
    bits = _as_bits(bits)
    geo_p = rule.p if geo_p is None else float(geo_p)
    return _batched(lambda u: kernels.composed_runs(bits, rule.code, rule.param, geo_p, u, k, clip),
                    trials, 2 * bits.size, seed)


def _batched(fn, trials, width, seed):
    rng = _rng_from(seed)
    parts = []
    left = int(trials)
    while left > 0:
        m = min(left, _BLOCK)
        parts.append(fn(np.ascontiguousarray(_open_uniforms(rng, (m, width)))))
        left -= m
    return np.concatenate(parts) if parts else np.zeros((0, 0), dtype=np.int64)


@dataclass(frozen=True)
class EquivalenceReport:
    trials: int
    k: int
    support: int
    tv: float
    threshold: float
    chi2: float
    p_value: float
    passed: bool
    cells: dict = field(default_factory=dict, repr=False, compare=False)

    def summary(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict} tv={self.tv:.5f} threshold={self.threshold:.5f} "
                f"support={self.support} chi2_p={self.p_value:.4g} trials={self.trials}")


def _histogram(rows):
    keys, counts = np.unique(rows, axis=0, return_counts=True)
    return {tuple(int(v) for v in key): int(c) for key, c in zip(keys, counts)}


def equivalence_test(rule, bits, trials=100_000, seed=0, k=DEFAULT_K, clip=DEFAULT_CLIP,
                     geo_p=None):
    """Compare the joint law of the first k output runs under both routes.

    Passes when the total-variation distance between the two empirical laws
    is at most 3 sqrt(S / trials), S being the number of occupied cells.
    ``geo_p`` overrides the pre-processor's geometric parameter (for
    negative controls).
    """
    if trials < MIN_TRIALS:
        warnings.warn(f"{trials} trials is below the recommended {MIN_TRIALS}",
                      InsufficientSamplesWarning, stacklevel=2)
    seq = np.random.SeedSequence(int(seed))
    sa, sb = seq.spawn(2)
    rng_a = np.random.Generator(np.random.Philox(sa))
    rng_b = np.random.Generator(np.random.Philox(sb))
    a = direct_run_lengths(rule, bits, trials, rng_a, k, clip)
    b = composed_run_lengths(rule, bits, trials, rng_b, k, clip, geo_p)
    ha, hb = _histogram(a), _histogram(b)
    keys = sorted(set(ha) | set(hb))
    ca = np.array([ha.get(key, 0) for key in keys], dtype=float)
    cb = np.array([hb.get(key, 0) for key in keys], dtype=float)
    tv = 0.5 * float(np.abs(ca / trials - cb / trials).sum())
    support = len(keys)
    threshold = 3.0 * math.sqrt(support / trials)
    if support > 1:
        chi2, p_value, _, _ = stats.chi2_contingency(np.vstack([ca, cb]))
    else:
        chi2, p_value = 0.0, 1.0
    cells = {key: (int(x), int(y)) for key, x, y in zip(keys, ca, cb)}
    return EquivalenceReport(int(trials), k, support, tv, threshold, float(chi2),
                             float(p_value), tv <= threshold, cells)
