"""Joint receive-filter and transmit-waveform design for waveform-adaptive STAP."""

__version__ = "0.1.0"
