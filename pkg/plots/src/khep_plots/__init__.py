"""Static figure generation for khep artifacts."""

from .artifacts import ArtifactError, DomainInfo, read_csv_columns
from .render import KINDS, PlotSpec, gallery_grid, render

__version__ = "0.1.0"
