"""Number-theoretic substrate: safe-prime DL groups, RSA keypairs over safe
primes, modular exponentiation with negative-exponent support, and exponent
sampling.

All values are plain Python ints; gmpy2 accelerates the inner loops
(powmod, invert, probe filtering) while the Miller-Rabin decision procedure
is implemented here and applied to every emitted prime.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import gmpy2

MR_ROUNDS = 64

# Trial-division primes for sieving candidate windows.
_SMALL_PRIMES: list[int] = []
_n = 3
while _n < 20000:
    for _p in _SMALL_PRIMES:
        if _p * _p > _n:
            _SMALL_PRIMES.append(_n)
            break
        if _n % _p == 0:
            break
    else:
        _SMALL_PRIMES.append(_n)
    _n += 2


def miller_rabin(n: int, rounds: int = MR_ROUNDS, rng: random.Random | None = None) -> bool:
    """Probabilistic primality test with error probability < 4^-rounds."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n == p:
            return True
        if n % p == 0:
            return False
    r = rng or random
    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for _ in range(rounds):
        a = r.randrange(2, n - 1)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = (x * x) % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _sieve_ok(n: int) -> bool:
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    return True


def is_probable_prime(n: int, rng: random.Random | None = None) -> bool:
    """Sieve filter, then gmpy2's test, then the in-repo Miller-Rabin.

    Both probabilistic tests must agree; keeping two independent routes
    guards against a bug in either.
    """
    if n < 2:
        return False
    if not _sieve_ok(n):
        return n in _SMALL_PRIMES or n == 2
    if not gmpy2.is_prime(n, MR_ROUNDS):
        return False
    return miller_rabin(n, MR_ROUNDS, rng)


def find_safe_prime(bits: int, rng: random.Random, max_windows: int = 4096) -> int:
    """Random-start incremental search for p = 2q+1 with both p and q prime.

    Candidate windows are sieved jointly on q and 2q+1 before any
    probabilistic test runs.
    """
    if bits < 5:
        raise ValueError("safe prime needs at least 5 bits")
    window = 1 << 14
    for _ in range(max_windows):
        q0 = rng.getrandbits(bits - 1) | (1 << (bits - 2)) | 1
        alive = bytearray([1]) * window
        for sp in _SMALL_PRIMES:
            inv2 = (sp + 1) // 2
            # q0 + 2k divisible by sp
            k = (-(q0 % sp) * inv2) % sp
            for i in range(k, window, sp):
                alive[i] = 0
            # 2(q0 + 2k) + 1 divisible by sp
            inv4 = pow(4, -1, sp)
            k = (-((2 * q0 + 1) % sp) * inv4) % sp
            for i in range(k, window, sp):
                alive[i] = 0
        for k in range(window):
            if not alive[k]:
                continue
            q = q0 + 2 * k
            if q.bit_length() != bits - 1:
                break
            if q <= max(_SMALL_PRIMES):
                # tiny parameters: the sieve above knocks out q itself
                continue
            if not gmpy2.is_prime(q, 30):
                continue
            p = 2 * q + 1
            if is_probable_prime(p, rng) and is_probable_prime(q, rng):
                return p
    raise RuntimeError(f"no {bits}-bit safe prime found; RNG unusable or bits too small")


def _find_small_safe_prime(bits: int, rng: random.Random) -> int:
    # Below the sieve's reach: enumerate candidates directly.
    lo, hi = 1 << (bits - 1), 1 << bits
    candidates = []
    for p in range(lo | 1, hi, 2):
        q = (p - 1) // 2
        if miller_rabin(p, 40, rng) and miller_rabin(q, 40, rng):
            candidates.append(p)
    if not candidates:
        raise RuntimeError(f"no {bits}-bit safe prime exists")
    return candidates[rng.randrange(len(candidates))]


@dataclass(frozen=True, slots=True)
class DlGroup:
    """Prime-order subgroup of units modulo a safe prime.

    p_safe = 2*q_g + 1; xi generates the subgroup of order q_g.
    """

    p_safe: int
    q_g: int
    xi: int

    def validate(self) -> None:
        if self.p_safe != 2 * self.q_g + 1:
            raise ValueError("p_safe != 2*q_g + 1")
        if not is_probable_prime(self.p_safe) or not is_probable_prime(self.q_g):
            raise ValueError("modulus or order not prime")
        if self.xi in (1, self.p_safe - 1) or not (1 < self.xi < self.p_safe):
            raise ValueError("xi out of range")
        if pow(self.xi, self.q_g, self.p_safe) != 1:
            raise ValueError("xi does not have order q_g")

    @property
    def element_bytes(self) -> int:
        return (self.p_safe.bit_length() + 7) // 8

    @property
    def exponent_bytes(self) -> int:
        return (self.q_g.bit_length() + 7) // 8


@dataclass(frozen=True, slots=True)
class RsaKeyPair:
    """RSA modulus over two safe primes, with the roles of d and e such that
    d stays with the client and e is the public verification exponent."""

    n: int
    e: int
    d: int
    phi: int
    xi: int
    p: int
    q: int

    def validate(self) -> None:
        if self.n != self.p * self.q or self.p == self.q:
            raise ValueError("bad factorization")
        for v in (self.p, self.q, (self.p - 1) // 2, (self.q - 1) // 2):
            if not is_probable_prime(v):
                raise ValueError("factors are not safe primes")
        if self.phi != (self.p - 1) * (self.q - 1):
            raise ValueError("bad totient")
        if (self.d * self.e) % self.phi != 1:
            raise ValueError("d*e != 1 mod phi")
        if gmpy2.gcd(self.xi, self.n) != 1:
            raise ValueError("xi not a unit")

    @property
    def element_bytes(self) -> int:
        return (self.n.bit_length() + 7) // 8


def gen_dl_group(bits: int, rng: random.Random) -> DlGroup:
    """Fresh safe-prime group; xi = h^2 for random h, retried until xi is a
    nontrivial square (then its order is exactly q_g)."""
    if bits < 16:
        raise ValueError("bits must be >= 16")
    if bits <= 24:
        p_safe = _find_small_safe_prime(bits, rng)
    else:
        p_safe = find_safe_prime(bits, rng)
    q_g = (p_safe - 1) // 2
    while True:
        h = rng.randrange(2, p_safe - 1)
        xi = (h * h) % p_safe
        if xi not in (1, p_safe - 1):
            break
    g = DlGroup(p_safe=p_safe, q_g=q_g, xi=xi)
    g.validate()
    return g


def gen_rsa_keypair(bits: int, rng: random.Random) -> RsaKeyPair:
    """RSA modulus of exactly `bits` bits from two distinct safe primes;
    d uniform with gcd(d, phi) = 1 and e = d^-1 mod phi."""
    if bits < 16:
        raise ValueError("bits must be >= 16")
    half_hi = (bits + 1) // 2
    half_lo = bits // 2
    find = _find_small_safe_prime if half_hi <= 24 else find_safe_prime
    for _ in range(256):
        p = find(half_hi, rng)
        q = find(half_lo, rng)
        if p == q:
            continue
        n = p * q
        if n.bit_length() == bits:
            break
    else:
        raise RuntimeError("could not hit the requested modulus size")
    phi = (p - 1) * (q - 1)
    while True:
        d = rng.randrange(2, n)
        if gmpy2.gcd(d, phi) == 1:
            break
    e = int(gmpy2.invert(d, phi))
    while True:
        xi = rng.randrange(2, n)
        if gmpy2.gcd(xi, n) == 1:
            break
    kp = RsaKeyPair(n=n, e=e, d=d, phi=phi, xi=xi, p=p, q=q)
    kp.validate()
    return kp


def pow_mod(base: int, exp: int, modulus: int) -> int:
    """base^exp mod modulus in [0, modulus); negative exponents go through
    the modular inverse of the base (which must then be a unit)."""
    if modulus <= 1:
        raise ValueError("modulus must be > 1")
    if exp < 0:
        try:
            inv = gmpy2.invert(base, modulus)
        except ZeroDivisionError:
            raise ValueError("negative exponent with non-invertible base") from None
        return int(gmpy2.powmod(inv, -exp, modulus))
    return int(gmpy2.powmod(base, exp, modulus))


def sample_scalar_nonzero(group: DlGroup, rng: random.Random) -> int:
    """Uniform over {1, ..., q_g - 1}."""
    return rng.randrange(1, group.q_g)
