"""Screening of Ziehl-Neelsen smear images for acid-fast bacilli."""

__version__ = "0.1.0"
