"""Process matrices for finite and continuous-variable systems."""

__version__ = "0.1.0"
