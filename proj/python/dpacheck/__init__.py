"""DPA completeness checking against GDPR processor obligations."""

from ._core import (
    Checker,
    DataError,
    ServiceError,
    Store,
    __version__,
    cohen_kappa,
    cosine,
    f_beta,
    kappa_band,
    normalize,
    run_cli,
    split_sentences,
    tokenize,
    validate_store,
)

__all__ = [
    "Checker",
    "DataError",
    "ServiceError",
    "Store",
    "__version__",
    "cohen_kappa",
    "cosine",
    "f_beta",
    "kappa_band",
    "normalize",
    "run_cli",
    "split_sentences",
    "tokenize",
    "validate_store",
]
