"""Stroboscopic QND spin-noise simulator and two-pulse magnetometry model."""

__version__ = "0.1.0"
