"""Bit sequence sources: exact Bernoulli sampling, file readers and
writers, and deterministic adversarial generators for negative testing.

Sampling model
--------------
Output bit i is 1 exactly when an (conceptually infinite) uniform binary
word U_i is lexicographically below the binary expansion of the bias p.
That makes P(bit = 1) equal to p exactly, for any rational p, with no
fixed-width quantisation.

U_i is materialised 64 bits at a time. The first 64 bits settle the
comparison unless they coincide with the first 64 expansion bits of p
(probability 2^-64), in which case further 64-bit refills are drawn until
the tie breaks. Every 64-bit word is a pure function of
(seed, bit index, refill number) through a splitmix64-style finaliser, so
generation is reproducible and independent of chunking or thread count.

Statistical quality of the underlying uniform generator is the usual
splitmix64 story: fine for simulation, not for cryptography.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    InsufficientPrecision,
    OutOfRange,
    ParseError,
    TruncatedHeader,
    UnknownSource,
)
from .exactnum import RealParam

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
# distinct streams for tie-break refills and substream derivation
_REFILL_SALT = 0xD1342543DE82EF95
_SUBSTREAM_SALT = 0x9FB21C651E98DF25

_PACKED_MAGIC = b"HBR1"
_WHITESPACE = b" \t\n\r\x0b\x0c"

_POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


def _mix(x: int) -> int:
    """splitmix64 finaliser on a 64-bit integer (pure Python path)."""
    x &= _MASK
    x ^= x >> 30
    x = (x * _MIX1) & _MASK
    x ^= x >> 27
    x = (x * _MIX2) & _MASK
    x ^= x >> 31
    return x


def _mix_np(z: np.ndarray) -> np.ndarray:
    """Vectorised splitmix64 finaliser; operates on uint64, wraps mod 2^64."""
    z = z.copy()
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX2)
    z ^= z >> np.uint64(31)
    return z


def _mix_inplace(z: np.ndarray, tmp: np.ndarray) -> None:
    # allocation-free twin of _mix_np for the bulk generation path
    np.right_shift(z, np.uint64(30), out=tmp)
    z ^= tmp
    z *= np.uint64(_MIX1)
    np.right_shift(z, np.uint64(27), out=tmp)
    z ^= tmp
    z *= np.uint64(_MIX2)
    np.right_shift(z, np.uint64(31), out=tmp)
    z ^= tmp


def _stream_key(seed: int, refill: int = 0) -> int:
    return _mix((_mix(seed) + refill * _REFILL_SALT) & _MASK)


def _word(seed: int, index: int, refill: int = 0) -> int:
    """The refill-th uniform 64-bit word attached to one output bit."""
    return _mix((_stream_key(seed, refill) + (index + 1) * _GOLDEN) & _MASK)


def _words(seed: int, lo: int, hi: int, refill: int = 0) -> np.ndarray:
    """Uniform words for bit indices [lo, hi), identical to _word per index."""
    idx = np.arange(lo, hi, dtype=np.uint64)
    z = (idx + np.uint64(1)) * np.uint64(_GOLDEN)
    z += np.uint64(_stream_key(seed, refill))
    return _mix_np(z)


def substream_seed(seed: int, index: int) -> int:
    """Derive the seed of substream `index` from a master seed.

    Used for Monte Carlo trials and any other per-unit seeding; a pure
    function of (seed, index), so parallel schedules cannot change results.
    """
    return _mix((_mix(seed ^ _SUBSTREAM_SALT) + (index + 1) * _GOLDEN) & _MASK)


class BitPrefix:
    """An immutable finite prefix of a binary sequence, bit-packed MSB-first."""

    __slots__ = ("_packed", "_n", "_arr")

    def __init__(self, packed: bytes, length: int):
        if length < 0:
            raise ValueError("negative length")
        need = (length + 7) // 8
        if len(packed) != need:
            raise ValueError(f"expected {need} payload bytes, got {len(packed)}")
        # normalise pad bits in the final byte to zero so equality is by value
        rem = length % 8
        if rem and packed and packed[-1] & (0xFF >> rem):
            packed = packed[:-1] + bytes([packed[-1] & (0xFF << (8 - rem)) & 0xFF])
        self._packed = bytes(packed)
        self._n = length
        self._arr = np.frombuffer(self._packed, dtype=np.uint8)

    @classmethod
    def from_uint8(cls, bits: np.ndarray) -> "BitPrefix":
        bits = np.asarray(bits, dtype=np.uint8)
        return cls(np.packbits(bits).tobytes(), int(bits.size))

    @classmethod
    def from_bits(cls, bits) -> "BitPrefix":
        return cls.from_uint8(np.fromiter(bits, dtype=np.uint8))

    @classmethod
    def from_text01(cls, text: str) -> "BitPrefix":
        return cls.from_bits(int(c) for c in text)

    @classmethod
    def zeros(cls, n: int) -> "BitPrefix":
        return cls(bytes((n + 7) // 8), n)

    @classmethod
    def ones(cls, n: int) -> "BitPrefix":
        return cls(b"\xff" * ((n + 7) // 8), n)

    def __len__(self) -> int:
        return self._n

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitPrefix)
            and self._n == other._n
            and self._packed == other._packed
        )

    def __hash__(self) -> int:
        return hash((self._n, self._packed))

    def __repr__(self) -> str:
        head = self.to01() if self._n <= 32 else self.to01()[:32] + "..."
        return f"BitPrefix({head!r}, length={self._n})"

    @property
    def packed(self) -> bytes:
        return self._packed

    def bit(self, i: int) -> int:
        if not 0 <= i < self._n:
            raise IndexError(i)
        return (self._packed[i >> 3] >> (7 - (i & 7))) & 1

    def ones_in_prefix(self, n: int | None = None) -> int:
        """Exact count of ones among the first n bits (all bits by default)."""
        if n is None:
            n = self._n
        if not 0 <= n <= self._n:
            raise IndexError(n)
        full, rem = divmod(n, 8)
        total = int(_POPCOUNT8[self._arr[:full]].sum(dtype=np.int64))
        if rem:
            total += bin(self._packed[full] >> (8 - rem)).count("1")
        return total

    def unpack(self, n: int | None = None) -> np.ndarray:
        """First n bits as a uint8 array of 0/1 values."""
        if n is None:
            n = self._n
        if not 0 <= n <= self._n:
            raise IndexError(n)
        return np.unpackbits(self._arr, count=n)

    def unpack_range(self, lo: int, hi: int) -> np.ndarray:
        """Bits lo..hi-1 as a uint8 array, unaligned boundaries included."""
        if not 0 <= lo <= hi <= self._n:
            raise IndexError((lo, hi))
        start = lo >> 3
        bits = np.unpackbits(self._arr[start : (hi + 7) >> 3])
        off = lo - 8 * start
        return bits[off : off + (hi - lo)]

    def to01(self) -> str:
        return "".join("01"[b] for b in self.unpack())

    def concat(self, other: "BitPrefix") -> "BitPrefix":
        return BitPrefix.from_uint8(np.concatenate([self.unpack(), other.unpack()]))


# ---------------------------------------------------------------------------
# Exact Bernoulli sampling


def _as_param(p) -> RealParam:
    if isinstance(p, RealParam):
        return p
    return RealParam.from_exact(Fraction(p))


def _resolve_exact_tie(seed: int, index: int, rem: int, den: int) -> int:
    # The first 64 uniform bits equal the first 64 expansion bits of p.
    # Keep comparing 64-bit blocks of U against further expansion blocks of
    # p; rem/den is the fractional part of p * 2^(64*refills) so far.
    refill = 1
    while True:
        if rem == 0:
            # expansion of p is all zeros from here on, so U >= p
            return 0
        hi, rem = divmod(rem << 64, den)
        u = _word(seed, index, refill)
        if u != hi:
            return 1 if u < hi else 0
        refill += 1


def _resolve_prefix_tail(seed: int, index: int, k: int, remaining: int, refill: int) -> int:
    # Compare further uniform words against the remaining prefix bits (the
    # low `remaining` bits of k). If every known bit matches we cannot
    # decide the sample and the parameter cannot be extended.
    while remaining > 0:
        u = _word(seed, index, refill)
        if remaining >= 64:
            w = (k >> (remaining - 64)) & _MASK
            if u != w:
                return 1 if u < w else 0
            remaining -= 64
            refill += 1
            continue
        uw = u >> (64 - remaining)
        w = k & ((1 << remaining) - 1)
        if uw != w:
            return 1 if uw < w else 0
        remaining = 0
    raise InsufficientPrecision(
        f"bit {index}: uniform word matches all {k.bit_length()} known bias bits"
    )


def _bernoulli_chunk(p: RealParam, seed: int, lo: int, hi: int) -> np.ndarray:
    """Exact Bernoulli(p) bits for indices [lo, hi) as uint8 0/1."""
    if p.is_exact:
        num, den = p.exact.numerator, p.exact.denominator
        if num == 0:
            return np.zeros(hi - lo, dtype=np.uint8)
        if num == den:
            return np.ones(hi - lo, dtype=np.uint8)
        scaled = num << 64
        thresh, rem = scaled // den, scaled % den
        u = _words(seed, lo, hi)
        t64 = np.uint64(thresh)
        bits = (u < t64).astype(np.uint8)
        for off in np.nonzero(u == t64)[0]:
            bits[off] = _resolve_exact_tie(seed, lo + int(off), rem, den)
        return bits

    m = len(p.prefix)
    if m == 0:
        raise InsufficientPrecision("empty bias prefix cannot resolve any sample")
    k = 0  # integer value of the m prefix bits
    for b in p.prefix.bits:
        k = (k << 1) | b
    u = _words(seed, lo, hi)
    if m <= 64:
        uw = u >> np.uint64(64 - m)
        kk = np.uint64(k)
        bits = (uw < kk).astype(np.uint8)
        ties = np.nonzero(uw == kk)[0]
        if ties.size:
            raise InsufficientPrecision(
                f"bit {lo + int(ties[0])}: uniform word matches all {m} known bias bits"
            )
        return bits
    w0 = np.uint64(k >> (m - 64))
    bits = (u < w0).astype(np.uint8)
    for off in np.nonzero(u == w0)[0]:
        bits[off] = _resolve_prefix_tail(seed, lo + int(off), k, m - 64, refill=1)
    return bits


def _fill_exact_bulk(out: np.ndarray, num: int, den: int, seed: int, chunk: int) -> None:
    # allocation-free bulk fill of out[0..n) with exact Bernoulli(num/den)
    # bits; ties against the 64-bit threshold escalate per index
    n = out.size
    scaled = num << 64
    thresh, rem = scaled // den, scaled % den
    t64 = np.uint64(thresh)
    key = np.uint64(_stream_key(seed, 0))
    chunk = min(chunk, n)
    base = np.arange(chunk, dtype=np.uint64)
    z = np.empty(chunk, dtype=np.uint64)
    tmp = np.empty(chunk, dtype=np.uint64)
    for lo in range(0, n, chunk):
        m = min(chunk, n - lo)
        zb, tb = z[:m], tmp[:m]
        np.add(base[:m], np.uint64(lo + 1), out=zb)
        zb *= np.uint64(_GOLDEN)
        zb += key
        _mix_inplace(zb, tb)
        seg = out[lo : lo + m]
        np.less(zb, t64, out=seg.view(bool))
        if np.count_nonzero(zb == t64):
            for off in np.nonzero(zb == t64)[0]:
                seg[off] = _resolve_exact_tie(seed, lo + int(off), rem, den)


def gen_bernoulli(p, n: int, seed: int, chunk: int = 1 << 22) -> BitPrefix:
    """n exact Bernoulli(p) bits, deterministic in (p, n, seed).

    p may be an exact rational (point value) or a RealParam with a binary
    prefix; the latter raises InsufficientPrecision if any sample cannot be
    decided from the known bits.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    p = _as_param(p)
    seed &= _MASK
    if n == 0:
        return BitPrefix(b"", 0)
    if p.is_exact and 0 < p.exact < 1:
        bits = np.empty(n, dtype=np.uint8)
        _fill_exact_bulk(bits, p.exact.numerator, p.exact.denominator, seed, chunk)
        return BitPrefix.from_uint8(bits)
    parts = [_bernoulli_chunk(p, seed, lo, min(n, lo + chunk)) for lo in range(0, n, chunk)]
    return BitPrefix.from_uint8(np.concatenate(parts))


def bernoulli_matrix(p, seeds: np.ndarray, n: int, cell_budget: int = 1 << 23) -> np.ndarray:
    """Bernoulli bits for many streams at once: row t equals
    gen_bernoulli(p, n, seeds[t]) bit for bit.

    Only exact rational p is supported here; the Monte Carlo harness never
    samples from an interval-valued bias.
    """
    p = _as_param(p)
    if not p.is_exact:
        raise InsufficientPrecision("batch sampling needs an exact bias")
    seeds = np.asarray(seeds, dtype=np.uint64)
    rows = seeds.size
    out = np.empty((rows, n), dtype=np.uint8)
    if rows == 0 or n == 0:
        return out
    num, den = p.exact.numerator, p.exact.denominator
    if num == 0 or num == den:
        out[:] = 0 if num == 0 else 1
        return out
    scaled = num << 64
    thresh, rem = scaled // den, scaled % den
    t64 = np.uint64(thresh)
    keys = _mix_np(_mix_np(seeds))  # _stream_key(seed, 0) per row
    col_chunk = max(1, min(n, cell_budget // max(rows, 1)))
    z = np.empty((rows, col_chunk), dtype=np.uint64)
    tmp = np.empty((rows, col_chunk), dtype=np.uint64)
    for lo in range(0, n, col_chunk):
        hi = min(n, lo + col_chunk)
        m = hi - lo
        zb, tb = z[:, :m], tmp[:, :m]
        idx = np.arange(lo + 1, hi + 1, dtype=np.uint64)
        idx *= np.uint64(_GOLDEN)
        np.add(idx[None, :], keys[:, None], out=zb)
        _mix_inplace(zb, tb)
        seg = out[:, lo:hi]
        np.less(zb, t64, out=seg.view(bool))
        if np.count_nonzero(zb == t64):
            tr, tc = np.nonzero(zb == t64)
            for r, c in zip(tr, tc):
                seg[int(r), int(c)] = _resolve_exact_tie(
                    int(seeds[int(r)]), lo + int(c), rem, den
                )
    return out


# ---------------------------------------------------------------------------
# File formats


def read_bits(path, fmt: str) -> BitPrefix:
    """Read a bit file.

    text01: ASCII '0'/'1' with whitespace ignored. packed: magic "HBR1",
    an 8-byte little-endian bit count, then MSB-first payload bytes.
    """
    data = Path(path).read_bytes()
    if fmt == "text01":
        bits = bytearray()
        for off, byte in enumerate(data):
            if byte in (0x30, 0x31):
                bits.append(byte - 0x30)
            elif byte in _WHITESPACE:
                continue
            else:
                raise ParseError(f"unexpected character {chr(byte)!r}", offset=off)
        return BitPrefix.from_uint8(np.frombuffer(bytes(bits), dtype=np.uint8))
    if fmt == "packed":
        if len(data) < 12:
            raise TruncatedHeader(f"packed header needs 12 bytes, got {len(data)}")
        if data[:4] != _PACKED_MAGIC:
            raise ParseError(f"bad magic {data[:4]!r}")
        count = int.from_bytes(data[4:12], "little")
        need = 12 + (count + 7) // 8
        if len(data) < need:
            raise TruncatedHeader(f"declared {count} bits, payload truncated")
        if len(data) > need:
            raise ParseError("trailing bytes after declared payload", offset=need)
        return BitPrefix(data[12:], count)
    raise ValueError(f"unknown format {fmt!r}")


def write_bits(y: BitPrefix, path, fmt: str) -> None:
    path = Path(path)
    if fmt == "text01":
        path.write_text(y.to01() + "\n")
    elif fmt == "packed":
        header = _PACKED_MAGIC + len(y).to_bytes(8, "little")
        path.write_bytes(header + y.packed)
    else:
        raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# Adversarial sources

ADVERSARIAL_NAMES = (
    "all-zeros",
    "all-ones",
    "alternating",
    "drifting-bias",
    "champernowne-like",
)


def _drifting_bias(n: int, p0: Fraction, p1: Fraction) -> BitPrefix:
    # Deterministic error-diffusion fill: after k bits the number of ones is
    # floor(sum_{j<k} p(j)) for the linearly interpolated bias
    # p(j) = p0 + (p1 - p0) * j / (n - 1). The running average then tracks
    # the drifting bias to within 1/k, which is what defeats checkpoint
    # coherence while each local window still looks plausible.
    if not (0 <= p0 <= 1 and 0 <= p1 <= 1):
        raise OutOfRange("drifting-bias endpoints must lie in [0, 1]")
    if n <= 1:
        return BitPrefix.from_bits([1] * n if p0 >= Fraction(1, 2) else [0] * n)
    # cumulative target sum_{j<k} p(j) = k*p0 + (p1-p0) * k(k-1) / (2(n-1)),
    # evaluated in integers over the common denominator 2(n-1)*den
    den = 2 * (n - 1) * p0.denominator * p1.denominator
    a0 = p0.numerator * p1.denominator
    a1 = p1.numerator * p0.denominator
    bits = np.empty(n, dtype=np.uint8)
    prev = 0
    for k in range(1, n + 1):
        numer = 2 * (n - 1) * a0 * k + (a1 - a0) * k * (k - 1)
        cur = numer // den
        bits[k - 1] = cur - prev
        prev = cur
    return BitPrefix.from_uint8(bits)


def _champernowne(n: int) -> BitPrefix:
    chunks = []
    total = 0
    i = 1
    while total < n:
        b = bin(i)[2:]
        chunks.append(b)
        total += len(b)
        i += 1
    return BitPrefix.from_text01("".join(chunks)[:n])


def gen_adversarial(name: str, n: int, p0=None, p1=None) -> BitPrefix:
    """Deterministic non-random sequences designed to defeat specific tests."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if name == "all-zeros":
        return BitPrefix.zeros(n)
    if name == "all-ones":
        return BitPrefix.ones(n)
    if name == "alternating":
        # starts with 1, so all checkpoint averages are exactly 1/2
        bits = np.zeros(n, dtype=np.uint8)
        bits[0::2] = 1
        return BitPrefix.from_uint8(bits)
    if name == "drifting-bias":
        if p0 is None or p1 is None:
            raise UnknownSource("drifting-bias needs p0 and p1")
        return _drifting_bias(n, Fraction(p0), Fraction(p1))
    if name == "champernowne-like":
        return _champernowne(n)
    raise UnknownSource(f"no adversarial source named {name!r}")


# ---------------------------------------------------------------------------
# Source specifications (one handle for the CLI and the pipeline)


@dataclass(frozen=True)
class SourceSpec:
    kind: str  # bernoulli | file | adversarial
    p: RealParam | None = None
    seed: int | None = None
    path: str | None = None
    fmt: str | None = None
    name: str | None = None
    p0: Fraction | None = None
    p1: Fraction | None = None

    @classmethod
    def bernoulli(cls, p, seed: int) -> "SourceSpec":
        return cls(kind="bernoulli", p=_as_param(p), seed=seed)

    @classmethod
    def file(cls, path, fmt: str) -> "SourceSpec":
        return cls(kind="file", path=str(path), fmt=fmt)

    @classmethod
    def adversarial(cls, name: str, p0=None, p1=None) -> "SourceSpec":
        return cls(
            kind="adversarial",
            name=name,
            p0=None if p0 is None else Fraction(p0),
            p1=None if p1 is None else Fraction(p1),
        )

    def realize(self, n: int) -> BitPrefix:
        if self.kind == "bernoulli":
            return gen_bernoulli(self.p, n, self.seed)
        if self.kind == "adversarial":
            return gen_adversarial(self.name, n, self.p0, self.p1)
        if self.kind == "file":
            return read_bits(self.path, self.fmt)
        raise UnknownSource(f"unknown source kind {self.kind!r}")

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.p is not None:
            out["p"] = self.p.describe()
        if self.seed is not None:
            out["seed"] = self.seed
        if self.path is not None:
            out["path"] = self.path
            out["format"] = self.fmt
        if self.name is not None:
            out["name"] = self.name
        if self.p0 is not None:
            out["p0"] = f"{self.p0.numerator}/{self.p0.denominator}"
            out["p1"] = f"{self.p1.numerator}/{self.p1.denominator}"
        return out
