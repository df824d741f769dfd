"""File formats: PNG images, NFCK checkpoints, CSV reports, config files."""

from .checkpoint import ModelCheckpoint, load_checkpoint, save_checkpoint
from .config import load_config, parse_config_text
from .dataset import PairedDataset, PairEntry
from .png import load_image, save_image, save_spectrum_png
from .reports import format_value, read_report, write_report

__all__ = [
    "ModelCheckpoint", "save_checkpoint", "load_checkpoint",
    "load_config", "parse_config_text",
    "PairedDataset", "PairEntry",
    "load_image", "save_image", "save_spectrum_png",
    "write_report", "read_report", "format_value",
]
