"""Audio depression detection with gender-bias diagnostics.

A numpy library covering the full desk-scale experiment: synthetic
16 kHz interview corpus, mel/raw feature extraction, class- and
gender-balanced sub-sampling, from-scratch CNN+LSTM training, and
per-gender F1 / fairness reporting.
"""

from fairdep.errors import ConfigError, ContractError, DataError, FairdepError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ContractError",
    "DataError",
    "FairdepError",
    "__version__",
]
