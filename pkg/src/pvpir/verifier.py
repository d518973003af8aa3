"""Third-party verification from files alone.

The verifier consumes the public key file, the per-query verification key
file, and the answers transcript; it never sees secret key material or the
query itself, and reproduces exactly the client's accept/reject decision.
The unverified baseline scheme carries no tags, so asking to verify it is
an error rather than an accept.
"""

from __future__ import annotations

from .groups import pow_mod
from .protocol import REJECT, SchemeId, reconstruct
from .serial import DecodeError
from .storage import load_answers, load_public_keys, load_verification_key


class NotVerifiableError(ValueError):
    """The scheme in the transcript has no verification relation."""


def verify_standalone(pk, vk, answers):
    """Accept/reject bit plus the reconstructed per-lane values on accept."""
    if pk.scheme == SchemeId.PLAIN_FSS_PIR:
        raise NotVerifiableError("scheme not verifiable")
    outcome = reconstruct(answers, pk, vk)
    if outcome is REJECT:
        return False, None
    return True, tuple(outcome)


def verify_files(pk_path: str, vk_path: str, answers_path: str):
    pk = load_public_keys(pk_path)
    if pk.scheme == SchemeId.PLAIN_FSS_PIR:
        raise NotVerifiableError("scheme not verifiable")
    vk_scheme, vk = load_verification_key(vk_path)
    if vk_scheme != pk.scheme:
        raise DecodeError("verification key scheme does not match the public keys")
    if pk.scheme != SchemeId.PI2_RSA_PREDICATE:
        dl = pk.dl
        if not (1 < vk < dl.p_safe) or pow_mod(vk, dl.q_g, dl.p_safe) != 1:
            raise DecodeError("verification key not in the order-q subgroup")
    answers = load_answers(answers_path, pk)
    return verify_standalone(pk, vk, answers)
