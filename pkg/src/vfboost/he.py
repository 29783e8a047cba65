"""Additively homomorphic encryption backends and operation accounting.

Two interchangeable backends drive the federated protocol:

* ``CountingBackend`` keeps plaintext payloads and only tracks how many
  encryptions, decryptions, and ciphertext additions the protocol would
  have performed. Its histogram path is vectorised; the counts follow the
  accounting rule below.
* ``PaillierBackend`` is a real Paillier cryptosystem (g = n + 1 variant)
  over fixed-point encoded reals. Every operation touches actual
  ciphertexts and bumps the same counters one call at a time.

Accounting rule: folding an instance set of size m into b populated bins
costs (m - b) ciphertext additions per statistic, because the first
ciphertext placed in a bin is an assignment. Decrypting a histogram costs
one decryption per populated bin per statistic.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

import gmpy2
import numpy as np

from .errors import FixedPointRangeError, IntegrityError, ParameterError

FIXED_POINT_SCALE = 1 << 40
DEFAULT_KEY_BITS = 512

_backend_ids = itertools.count(1)


@dataclass
class HECounters:
    """Monotone counters of HE operations."""

    c_enc: int = 0
    c_dec: int = 0
    c_add: int = 0

    def snapshot(self) -> tuple:
        return (self.c_enc, self.c_dec, self.c_add)

    def delta(self, earlier: tuple) -> "HECounters":
        return HECounters(
            c_enc=self.c_enc - earlier[0],
            c_dec=self.c_dec - earlier[1],
            c_add=self.c_add - earlier[2],
        )

    def add(self, other: "HECounters") -> None:
        self.c_enc += other.c_enc
        self.c_dec += other.c_dec
        self.c_add += other.c_add


@dataclass(frozen=True)
class HECostModel:
    """Seconds per HE operation. Defaults are Paillier-2048 ballpark."""

    t_enc: float = 2e-3
    t_dec: float = 1e-3
    t_add: float = 1e-5

    def __post_init__(self):
        if self.t_enc < 0 or self.t_dec < 0 or self.t_add < 0:
            raise ParameterError("per-operation times must be non-negative")

    def seconds(self, counters: HECounters) -> float:
        return (
            counters.c_enc * self.t_enc
            + counters.c_dec * self.t_dec
            + counters.c_add * self.t_add
        )


@dataclass(frozen=True)
class Ciphertext:
    payload: object
    backend: str
    key_id: int


class CountingBackend:
    """Plaintext stand-in that only counts operations."""

    name = "counting"

    def __init__(self):
        self.counters = HECounters()
        self.key_id = next(_backend_ids)

    def encrypt(self, value) -> Ciphertext:
        self.counters.c_enc += 1
        return Ciphertext(float(value), self.name, self.key_id)

    def add(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        self._check(a)
        self._check(b)
        self.counters.c_add += 1
        return Ciphertext(a.payload + b.payload, self.name, self.key_id)

    def decrypt(self, ct: Ciphertext) -> float:
        self._check(ct)
        self.counters.c_dec += 1
        return ct.payload

    def _check(self, ct: Ciphertext):
        if ct.backend != self.name or ct.key_id != self.key_id:
            raise IntegrityError("ciphertext does not belong to this key")

    # protocol-level vector operations

    def encrypt_vector(self, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        self.counters.c_enc += len(values)
        return values

    def histogram(self, enc_vector, members, bin_ids, n_bins) -> np.ndarray:
        """Aggregate one encrypted statistic into bins and decrypt the sums."""
        counts = np.bincount(bin_ids, minlength=n_bins)
        populated = int(np.count_nonzero(counts))
        self.counters.c_add += len(bin_ids) - populated
        self.counters.c_dec += populated
        return np.bincount(bin_ids, weights=enc_vector[members], minlength=n_bins)


class PaillierBackend:
    """Paillier cryptosystem with fixed-point message encoding.

    Keys are generated deterministically from ``seed`` so protocol runs
    are reproducible; randomness of the ciphertext blinding factor r does
    not affect any decrypted value.
    """

    name = "paillier"

    def __init__(
        self,
        key_bits: int = DEFAULT_KEY_BITS,
        seed: int = 0,
        scale: int = FIXED_POINT_SCALE,
    ):
        if key_bits < 64:
            raise ParameterError("key_bits must be at least 64")
        self.counters = HECounters()
        self.scale = int(scale)
        self._rand = random.Random(seed)
        self.n, self._lam, self._mu = self._keygen(key_bits)
        self.n_squared = self.n * self.n
        self.max_plain = self.n // 3
        self.key_id = int(self.n % (1 << 62))

    def _keygen(self, key_bits: int):
        half = key_bits // 2
        while True:
            p = gmpy2.next_prime(self._rand.getrandbits(half) | (1 << (half - 1)) | 1)
            q = gmpy2.next_prime(self._rand.getrandbits(half) | (1 << (half - 1)) | 1)
            if p == q:
                continue
            n = p * q
            if n.bit_length() != key_bits:
                continue
            lam = (p - 1) * (q - 1)
            return n, lam, gmpy2.invert(lam, n)

    def _encode(self, value: float) -> int:
        m = round(float(value) * self.scale)
        if abs(m) >= self.max_plain:
            raise FixedPointRangeError(
                f"value {value} does not fit the fixed-point message space"
            )
        return m % self.n

    def _decode(self, m: int) -> float:
        if m > self.n // 2:
            m -= self.n
        return float(m) / self.scale

    def encrypt(self, value) -> Ciphertext:
        m = self._encode(value)
        r = self._rand.randrange(1, int(self.n))
        ct = (1 + m * self.n) % self.n_squared
        ct = ct * gmpy2.powmod(r, self.n, self.n_squared) % self.n_squared
        self.counters.c_enc += 1
        return Ciphertext(int(ct), self.name, self.key_id)

    def add(self, a: Ciphertext, b: Ciphertext) -> Ciphertext:
        self._check(a)
        self._check(b)
        self.counters.c_add += 1
        return Ciphertext(a.payload * b.payload % self.n_squared, self.name, self.key_id)

    def decrypt(self, ct: Ciphertext) -> float:
        self._check(ct)
        u = gmpy2.powmod(ct.payload, self._lam, self.n_squared)
        m = (u - 1) // self.n * self._mu % self.n
        self.counters.c_dec += 1
        return self._decode(int(m))

    def _check(self, ct: Ciphertext):
        if ct.backend != self.name or ct.key_id != self.key_id:
            raise IntegrityError("ciphertext does not belong to this key")

    # protocol-level vector operations

    def encrypt_vector(self, values: np.ndarray):
        return [self.encrypt(v) for v in values]

    def histogram(self, enc_vector, members, bin_ids, n_bins) -> np.ndarray:
        slots: list[Ciphertext | None] = [None] * n_bins
        for pos, b in zip(members, bin_ids):
            ct = enc_vector[pos]
            slots[b] = ct if slots[b] is None else self.add(slots[b], ct)
        sums = np.zeros(n_bins)
        for b, slot in enumerate(slots):
            if slot is not None:
                sums[b] = self.decrypt(slot)
        return sums
