"""Age-structured SIR dynamics with vaccination, solved along characteristics."""
from .core import Grid, GridFunction, History, InequalityReport

__all__ = ["Grid", "GridFunction", "History", "InequalityReport"]
__version__ = "0.1.0"
