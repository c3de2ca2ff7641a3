"""Hardware-aware DNN/accelerator co-design exploration engine."""

__version__ = "0.1.0"
