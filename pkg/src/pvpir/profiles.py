"""Parameter profiles.

Two profiles are built in: "toy" (16-bit moduli, 8-bit item lanes) for fast
tests, and "paper" (3072-bit moduli, 31-bit item lanes) for the full-scale
soundness and overhead runs. The paper profile uses fixed, reproducible
parameters rather than searching for fresh 3072-bit safe primes on every
key generation:

- The DL group is the well-known 3072-bit MODP safe-prime group (group 15
  of the classic IKE series; p = 2^3072 - 2^3008 - 1 + 2^64*(floor(2^2942*pi)
  + 1690314)), with xi = 4 generating the order-(p-1)/2 subgroup.
- The RSA parameters are a fixed keypair over two 1536-bit safe primes,
  generated once with the in-repo safe-prime search and re-verified by the
  test suite. The secret exponent is published here on purpose: the profile
  exists for benchmarks and soundness experiments, not for protecting data.

A calibration group of order 11 is exported for the statistical soundness
tests, where acceptance rates around 1/q must be measurable.

The default profile comes from the PVPIR_PROFILE environment variable and
falls back to "toy".
"""

from __future__ import annotations

import os
import random
from dataclasses import dataclass

import gmpy2

from .groups import DlGroup, RsaKeyPair, gen_dl_group, gen_rsa_keypair


_MODP3072_P = int(
    "ffffffffffffffffc90fdaa22168c234c4c6628b80dc1cd129024e088a67cc74020bbea6"
    "3b139b22514a08798e3404ddef9519b3cd3a431b302b0a6df25f14374fe1356d6d51c245"
    "e485b576625e7ec6f44c42e9a637ed6b0bff5cb6f406b7edee386bfb5a899fa5ae9f2411"
    "7c4b1fe649286651ece45b3dc2007cb8a163bf0598da48361c55d39a69163fa8fd24cf5f"
    "83655d23dca3ad961c62f356208552bb9ed529077096966d670c354e4abc9804f1746c08"
    "ca18217c32905e462e36ce3be39e772c180e86039b2783a2ec07a28fb5c55df06f4c52c9"
    "de2bcbf6955817183995497cea956ae515d2261898fa051015728e5a8aaac42dad33170d"
    "04507a33a85521abdf1cba64ecfb850458dbef0a8aea71575d060c7db3970f85a6e1e4c7"
    "abf5ae8cdb0933d71e8c94e04a25619dcee3d2261ad2ee6bf12ffa06d98a0864d8760273"
    "3ec86a64521f2b18177b200cbbe117577a615d6c770988c0bad946e208e24fa074e5ab31"
    "43db5bfce0fd108e4b82d120a93ad2caffffffffffffffff",
    16,
)

_PAPER_RSA_P = int(
    "93df79c02c03a9d3c63ebb1566dbf212743a74e405241ad022acf4fa96219765309e9fc6"
    "3386bd543323b444fb0bbcdcf6603955ecf31087db1d8da18b1404f0925b556748bfd31d"
    "e18ed04827c434c2efd6237ce5ab52b72213fe4bcd326ef10ab28b5c4b43f54a53f84fed"
    "bd0c7a09feac035646152c297bcd86c349b45b4745fe3d7fcfc939c24bf9ab6764494ec6"
    "6416bc7119bce6a64385eb3306273ed817e80aa75f33e31e1fcae94cadedee66110e7459"
    "4963ca5d8db3c25be9e2f1cb",
    16,
)

_PAPER_RSA_Q = int(
    "e9fb86fec6ffbe804168101964856eb8a2f0b8980c8b6f416f05ac868110b6ae0c7ff5e5"
    "c4da124cb96c71389ebedb77d7e50f1fa86e66f7a6b340c84035f3b6920e72a361569636"
    "940f69ac241d05e273b3badab9ffe8d49e97067d8dd0b4e2f463f9ddbee6289f07bfcb4e"
    "255a971cf95b22f33c6e91c1e2293f5f77c9914679d47e72ed297e60d479baaaa6b99e54"
    "de5350d31dba678357ca598393a0c69601b36833de7b06c431cc686f0c1a43c4a3195d2a"
    "5edce4983e1f9bab7e7812eb",
    16,
)

_PAPER_RSA_D = int(
    "1f4ac5f58f98f20ae2e75d23a124690d31b37669abc3863a58527d9706edcbf95305c041"
    "d58c588b8cf1af7bf728a5f7243f835461951c3f76c580f58cf6e4adde3ef0ffffb1c49c"
    "385207c75c864544b42c5c9dfe0ca27a0d0931ed674bffe0671cf1605a2a53096db794d1"
    "79d6f9bb229efce65538ef27dc0801995e644e606e4b4f7af8d458cb7f1abefd089b749c"
    "b5f71b81568e9bd19adb59e9e75f4ef5632d48faad5f3f85323b2d2e1a6861d3b9d2c226"
    "f8d305b2979ffbc270bd422d8c01b686e6fc93c88bf04eeb9bf01289d901d3b2f0fad6e6"
    "0bebf825e81a740a58fa2e258a82a55a2612352f926d2f7aea57cc62eb09e3eb7cdb6cc9"
    "57cb466b016b86b2320b4bc2144273a6519c0340f82d6dc5fbfec0fe6a5e97dbd63ff29e"
    "17509a1fbc758aba4ec99f55e887a3a3d55676caaa1c308833865e98d4c1d17605daa559"
    "e6b9a2e8471b465d93b7af71556e7f7bb767f057793b33641e302d1cf2dde73595681f65"
    "093dd3b77fc57cdd6312c1287dda4522384c4c567ac28387",
    16,
)

_PAPER_RSA_XI = int(
    "b1be483df14ecc7063159b3b236235e71b90b97a3a576967ddf4b6fb5c8cf28bd4367d2b"
    "7589be8b816a861d0f1f522fd1bbd281cf3da17b81f930969db6d12267620d00dcb92840"
    "be2b0bdd94bfb8de2af51dad2a5bb3399154ed3a7997296f6b104c9a28ecfc8d625a0ac0"
    "5226aa9b18d976ff4ccc09ba12b0c81464315021c535f3175c5baddc6b0e1eecff4f8bc5"
    "c7a4c9983613b9615a640a902dbd76e1c6422dee9759a07f760605bc08ad3c2d4f298448"
    "4fd191d9d7853792971b82268c8c4e33b4f6ec1411f9c0b78800c1d312309d9c8ac0a5e0"
    "bc7e3062b878be36a3fb220a3e2a4f4c2443f0a4e5129ffe2de9733b78debc5e9d15a244"
    "a8a03034b08a8ff9a0929a401e8028ded9d846d57bff0db51c3645eacc8205ffab79c81b"
    "714bb1456eac0990d543be080502ad394cc0d2a9fdcea7fd14f49ed5cd99e938557a2267"
    "8446730bd77c5d45dff407d688195f83fc6f32a5b55cf082e675629a195645b6b42f08ae"
    "8951f15d22c3a4c9f0ee8d6b76487481119fe851ffd11b0",
    16,
)


PAPER_DL_GROUP = DlGroup(p_safe=_MODP3072_P, q_g=(_MODP3072_P - 1) // 2, xi=4)

# Order-11 group inside p = 23; small enough that 1/q acceptance rates show
# up clearly within 10^5 trials.
CALIBRATION_GROUP = DlGroup(p_safe=23, q_g=11, xi=4)


def _paper_rsa() -> RsaKeyPair:
    p, q = _PAPER_RSA_P, _PAPER_RSA_Q
    n = p * q
    phi = (p - 1) * (q - 1)
    e = int(gmpy2.invert(_PAPER_RSA_D, phi))
    return RsaKeyPair(n=n, e=e, d=_PAPER_RSA_D, phi=phi, xi=_PAPER_RSA_XI, p=p, q=q)


@dataclass(frozen=True, slots=True)
class Profile:
    """Parameter sizes for one deployment scale."""

    name: str
    dl_bits: int
    rsa_bits: int
    lane_width_bits: int
    prg_lambda: int = 128

    def dl_group(self, rng: random.Random) -> DlGroup:
        if self.name == "paper":
            return PAPER_DL_GROUP
        return gen_dl_group(self.dl_bits, rng)

    def rsa_keypair(self, rng: random.Random) -> RsaKeyPair:
        if self.name == "paper":
            return _paper_rsa()
        return gen_rsa_keypair(self.rsa_bits, rng)


TOY = Profile(name="toy", dl_bits=16, rsa_bits=16, lane_width_bits=8)
PAPER = Profile(name="paper", dl_bits=3072, rsa_bits=3072, lane_width_bits=31)

_PROFILES = {"toy": TOY, "paper": PAPER}


def get_profile(name: str | None = None) -> Profile:
    """Resolve a profile by name, or by PVPIR_PROFILE, defaulting to toy."""
    if name is None:
        name = os.environ.get("PVPIR_PROFILE", "toy")
    try:
        return _PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r} (expected one of: toy, paper)") from None
