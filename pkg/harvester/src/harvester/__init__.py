"""Produce cascade record files and profiles from image classifiers, and
serve those classifiers as live runner stages."""

from .harvest import HarvestJob, discover_samples, harvest
from .macs import measure_gmacs
from .records_io import truncate_confidence, write_profile_file, write_record_file
from .serve import serve
from .zoo import PreprocessSpec, ZooModel

__version__ = "0.1.0"

__all__ = [
    "HarvestJob",
    "PreprocessSpec",
    "ZooModel",
    "discover_samples",
    "harvest",
    "measure_gmacs",
    "serve",
    "truncate_confidence",
    "write_profile_file",
    "write_record_file",
]
