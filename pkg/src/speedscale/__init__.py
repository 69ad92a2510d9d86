"""Nonclairvoyant speed scaling for total flow time plus energy."""

__version__ = "0.1.0"
