"""Shared exception hierarchy.

Modules raise their own subclasses; the CLI maps DataError to exit code 2
and everything else unexpected to exit code 3.
"""


class PoiPlanError(Exception):
    """Base class for all errors raised by this package."""


class DataError(PoiPlanError):
    """Input data or on-disk artifacts cannot be used as-is."""
