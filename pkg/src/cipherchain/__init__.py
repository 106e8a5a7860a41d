"""MCMC cryptanalysis of classical ciphers with pluggable, bit-exact PRNGs."""

from .cipher import (
    Alphabet,
    CombinedKey,
    SubstitutionKey,
    TranspositionKey,
    decrypt,
    encrypt,
    normalize,
    random_key,
)
from .langmodel import BigramModel, build_model, score_delta_on_swap, score_log_pi
from .mcmc import ChainConfig, ChainState, accept, propose_swap, run_chain
from .prng import PrngKind, RandomSource, seed_source

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "BigramModel",
    "ChainConfig",
    "ChainState",
    "CombinedKey",
    "PrngKind",
    "RandomSource",
    "SubstitutionKey",
    "TranspositionKey",
    "accept",
    "build_model",
    "decrypt",
    "encrypt",
    "normalize",
    "propose_swap",
    "random_key",
    "run_chain",
    "score_delta_on_swap",
    "score_log_pi",
    "seed_source",
]
