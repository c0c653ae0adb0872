"""Two-branch (dense + LSTM) ensemble classifier for neoepitope-MHC binding.

Pipeline: CSV ingestion or synthetic data -> fit-on-train preprocessing ->
SMOTE on the training split -> dense and recurrent branch training ->
fixed-weight aggregation -> metrics, relevance propagation and reports.
"""

from .bundle import ModelBundle, load_bundle, save_bundle
from .data import Dataset, FeatureRecord, Schema, SynthConfig, parse_dataset, split, synth_generate, tokenize, write_dataset
from .ensemble import EnsembleConfig, aggregate, predict
from .errors import BundleError, ConfigError, DataError, NeoError, ParseError
from .pipeline import PipelineConfig, benchmark, grid_run, run_pipeline
from .smote import SmoteConfig, oversample

__version__ = "0.1.0"
