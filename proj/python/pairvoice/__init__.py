"""Wet/dry voice classification with pair-wise differencing."""

import json as _json

from ._core import (
    PairvoiceError,
    extract_features,
    f0_track,
    independent_ttest,
    load_wav,
    paired_ttest,
    selection_table,
    student_t_p,
)
from . import _core

__all__ = [
    "PairvoiceError",
    "extract_features",
    "f0_track",
    "independent_ttest",
    "load_wav",
    "paired_ttest",
    "run_experiment",
    "selection_table",
    "student_t_p",
    "synth",
]


def synth(out_dir, force=False, **config):
    """Write a synthetic cohort; keyword arguments override SynthConfig fields."""
    return _core.synth(str(out_dir), _json.dumps(config), force)


def run_experiment(manifest, **config):
    """Run the experiment grid and return the report as a dict."""
    return _json.loads(_core.run_experiment(str(manifest), _json.dumps(config)))
