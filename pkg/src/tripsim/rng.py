"""Counter-based keyed PRNG with per-agent subsequence splitting.

The generator is Threefry-2x32 (20 rounds): a keyed bijective mixing of a
64-bit counter under a 64-bit key. The global 2^64 sample sequence is split
into 2^32 subsequences of 2^32 samples each; subsequence ``i`` starts at
global counter ``i * 2^32``. Every agent owns one subsequence (index = agent
id) and stores only its 32-bit local counter, so any computation that draws
exclusively through per-agent cursors is deterministic regardless of thread
count or scheduling order.

Indices at and above ``SYSTEM_STREAM_BASE`` are reserved for non-agent
draws (scenario synthesis, initial infections, holiday participation, seed
derivation) so that setup never perturbs agent streams.

All distribution adapters consume a deterministic number of raw 64-bit words
per returned variate, except ``gamma`` whose rejection loop consumes a count
that is a function of the drawn words themselves (replay-safe): uniform and
exponential use 1 word, normal and lognormal use 2 (Box-Muller, cosine
branch), each gamma iteration uses 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_M32 = np.uint32(0xFFFFFFFF)
_ROTATIONS = (13, 15, 26, 6, 17, 29, 16, 24)
_KS_PARITY = np.uint32(0x1BD11BDA)

#: number of counter bits per subsequence (local counter width)
SUBSEQ_BITS = 32
MAX_LOCAL_COUNTER = 2**SUBSEQ_BITS - 1

#: first subsequence index reserved for system (non-agent) streams
SYSTEM_STREAM_BASE = 2**31

# Named system streams.
STREAM_SYNTH = SYSTEM_STREAM_BASE + 0
STREAM_INIT_INFECTIONS = SYSTEM_STREAM_BASE + 1
STREAM_HOLIDAY = SYSTEM_STREAM_BASE + 2
STREAM_SEED_DERIVE = SYSTEM_STREAM_BASE + 3

_INV_2_53 = float(2.0**-53)


def threefry2x32(key: int, c0, c1):
    """Threefry-2x32, 20 rounds.

    Parameters
    ----------
    key : int
        64-bit key; low word becomes k0, high word k1.
    c0, c1 : array_like of uint32
        Counter words (low, high). Broadcast to a common shape.

    Returns
    -------
    (x0, x1) : pair of uint32 arrays, the two output words.
    """
    k0 = np.uint32(key & 0xFFFFFFFF)
    k1 = np.uint32((key >> 32) & 0xFFFFFFFF)
    ks = (k0, k1, _KS_PARITY ^ k0 ^ k1)

    x0 = np.asarray(c0, dtype=np.uint32)
    x1 = np.asarray(c1, dtype=np.uint32)
    with np.errstate(over="ignore"):
        x0 = x0 + ks[0]
        x1 = x1 + ks[1]
        for r in range(20):
            rot = _ROTATIONS[r % 8]
            x0 = x0 + x1
            x1 = (x1 << np.uint32(rot)) | (x1 >> np.uint32(32 - rot))
            x1 = x1 ^ x0
            if (r + 1) % 4 == 0:
                s = (r + 1) // 4
                x0 = x0 + ks[s % 3]
                x1 = x1 + ks[(s + 1) % 3] + np.uint32(s)
    return x0, x1


def generate_words(key: int, index, counter) -> np.ndarray:
    """64-bit output words for (subsequence index, local counter) pairs.

    The global counter is ``index * 2^32 + counter``: the index occupies the
    high counter word, the local counter the low word. The two 32-bit outputs
    are combined little-endian (x0 low, x1 high).
    """
    index = np.asarray(index, dtype=np.uint32)
    counter = np.asarray(counter, dtype=np.uint32)
    x0, x1 = threefry2x32(key, counter, index)
    return x0.astype(np.uint64) | (x1.astype(np.uint64) << np.uint64(32))


def _word_scalar(key: int, index: int, counter: int) -> int:
    """Plain-int scalar path of ``generate_words`` (same output, no arrays)."""
    k0 = key & 0xFFFFFFFF
    k1 = (key >> 32) & 0xFFFFFFFF
    ks2 = 0x1BD11BDA ^ k0 ^ k1
    ks = (k0, k1, ks2)
    x0 = (counter + k0) & 0xFFFFFFFF
    x1 = (index + k1) & 0xFFFFFFFF
    for r in range(20):
        rot = _ROTATIONS[r % 8]
        x0 = (x0 + x1) & 0xFFFFFFFF
        x1 = ((x1 << rot) | (x1 >> (32 - rot))) & 0xFFFFFFFF
        x1 ^= x0
        if (r + 1) % 4 == 0:
            s = (r + 1) // 4
            x0 = (x0 + ks[s % 3]) & 0xFFFFFFFF
            x1 = (x1 + ks[(s + 1) % 3] + s) & 0xFFFFFFFF
    return x0 | (x1 << 32)


def words_to_uniform01(words: np.ndarray) -> np.ndarray:
    """Map 64-bit words to float64 in [0, 1) using the top 53 bits."""
    return (np.asarray(words, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * _INV_2_53


class StreamExhausted(RuntimeError):
    """A subsequence ran out of counter space (local counter overflow)."""


@dataclass
class StreamCursor:
    """Position within one subsequence: (index, local counter)."""

    index: int
    counter: int = 0


def generate(key: int, cursor: StreamCursor) -> int:
    """One 64-bit word from the cursor's position; advances the cursor."""
    if cursor.counter > MAX_LOCAL_COUNTER:
        raise StreamExhausted(f"subsequence {cursor.index} exhausted")
    word = int(generate_words(key, [cursor.index], [cursor.counter])[0])
    cursor.counter += 1
    return word


def _check_headroom(counter: np.ndarray, needed: int = 1) -> None:
    if counter.size and int(counter.max()) > MAX_LOCAL_COUNTER + 1 - needed:
        raise StreamExhausted("subsequence exhausted (counter overflow)")


def batch_uniform(key: int, ids: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """One uniform [0,1) draw per id, consuming each id's own stream.

    ``counters`` is the full per-index counter array; entries at ``ids`` are
    advanced in place. ``ids`` must not contain duplicates (each id may be
    drawn for at most once per call).
    """
    ids = np.asarray(ids)
    if ids.size == 0:
        return np.empty(0, dtype=np.float64)
    assert len(np.unique(ids)) == len(ids), "duplicate ids in one batch draw"
    c = counters[ids]
    _check_headroom(c)
    words = generate_words(key, ids.astype(np.uint32), c.astype(np.uint32))
    counters[ids] = c + 1
    return words_to_uniform01(words)


def batch_exponential(key: int, ids: np.ndarray, counters: np.ndarray, rate: np.ndarray) -> np.ndarray:
    """One Exponential(rate) draw per id via inverse CDF (1 word each)."""
    u = batch_uniform(key, ids, counters)
    return -np.log1p(-u) / np.asarray(rate, dtype=np.float64)


class Stream:
    """Scalar draw interface bound to one subsequence of a keyed generator.

    Wraps (key, index, counter); every draw advances the counter. Use
    ``attach``/``detach`` semantics of the caller to persist the counter
    (e.g. back into a population array).
    """

    __slots__ = ("key", "index", "counter")

    def __init__(self, key: int, index: int, counter: int = 0):
        self.key = key
        self.index = int(index)
        self.counter = int(counter)

    def _word(self) -> int:
        if self.counter > MAX_LOCAL_COUNTER:
            raise StreamExhausted(f"subsequence {self.index} exhausted")
        w = _word_scalar(self.key, self.index, self.counter)
        self.counter += 1
        return w

    def uniform01(self) -> float:
        """Uniform in [0, 1), 53-bit mantissa."""
        return float(self._word() >> 11) * _INV_2_53

    def exponential(self, rate: float) -> float:
        if rate <= 0:
            raise ValueError("rate must be > 0")
        return -math.log1p(-self.uniform01()) / rate

    def normal(self) -> float:
        """Standard normal via Box-Muller (cosine branch), exactly 2 words."""
        u1 = 1.0 - self.uniform01()
        u2 = self.uniform01()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def lognormal(self, mean: float, std: float) -> float:
        """LogNormal parameterized by its own mean and standard deviation.

        The (mean, std) moments are converted to log-space (mu, sigma).
        """
        if mean <= 0 or std <= 0:
            raise ValueError("mean and std must be > 0")
        sigma2 = math.log1p((std / mean) ** 2)
        mu = math.log(mean) - 0.5 * sigma2
        return math.exp(mu + math.sqrt(sigma2) * self.normal())

    def gamma(self, shape: float, scale: float) -> float:
        """Gamma(shape, scale) via Marsaglia-Tsang; counted-rejection loop.

        Each iteration consumes exactly 3 words (one normal + one uniform);
        shapes < 1 use the boost ``gamma(shape+1) * u^(1/shape)`` with one
        extra word. Replay depends only on the stream contents.
        """
        if shape <= 0 or scale <= 0:
            raise ValueError("shape and scale must be > 0")
        if shape < 1.0:
            u = self.uniform01()
            return self.gamma(shape + 1.0, scale) * math.pow(u, 1.0 / shape) if u > 0 else 0.0
        d = shape - 1.0 / 3.0
        c = 1.0 / math.sqrt(9.0 * d)
        while True:
            x = self.normal()
            u = self.uniform01()
            v = (1.0 + c * x) ** 3
            if v <= 0:
                continue
            if math.log(u if u > 0 else 5e-324) < 0.5 * x * x + d - d * v + d * math.log(v):
                return d * v * scale


def derive_run_key(master_key: int, run_index: int) -> int:
    """Independent 64-bit run key derived from a master seed."""
    return int(generate_words(master_key, [STREAM_SEED_DERIVE], [run_index])[0])
