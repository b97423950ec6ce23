"""Figure generation for fsavns outputs. Read-only: consumes the documented
CSV and checkpoint file formats, never the solver package itself."""

__version__ = "0.1.0"
