"""bdlm: bearing vibration diagnostics.

Two pipelines over raw vibration windows: a 24-statistic feature extractor
that textualizes segments into instruction-tuning records for external LLM
fine-tuning, and a desk-scale frozen-transformer classifier trained on patched
raw signals, plus an experiment harness for cross-condition and cross-dataset
transfer protocols.
"""

from . import experiments, features, ingest, model, signals, spectral, textgen
from .errors import BdlmError

__version__ = "0.1.0"

__all__ = ["BdlmError", "experiments", "features", "ingest", "model",
           "signals", "spectral", "textgen", "__version__"]
