"""Pricing-agent lab for insurance quotes on price-comparison websites."""

__version__ = "0.1.0"
