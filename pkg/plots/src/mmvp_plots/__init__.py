"""Figure rendering for the rate-recovery experiment CSV outputs."""

from .figures import FIGURE_IDS, FigureData, FigureSpec, Line, render
from .schema import SchemaError

__version__ = "0.1.0"
