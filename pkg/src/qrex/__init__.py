"""qrex: information-spectrum collision entropies and privacy amplification."""

__version__ = "0.1.0"
