"""Compressed sensing toolkit for multichannel fetal ECG telemonitoring."""
__version__ = "0.1.0"
