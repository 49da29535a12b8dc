"""
Error types shared across the toolkit.

Each class maps to one command-line exit code (see the EXIT_* constants in cli).
"""

from typing import List, Optional


class BoxSensitivityError(Exception):
    """Base class for every error raised on purpose by this package"""


class ParseError(BoxSensitivityError, ValueError):
    """Input document is not valid JSON or a record has the wrong shape"""


class ValidationError(BoxSensitivityError, ValueError):
    """Input parsed fine but violates a domain rule"""

    def __init__(self, message: str, offending: Optional[List] = None):
        super().__init__(message)
        self.offending = list(offending or [])


class ContractViolation(BoxSensitivityError, AssertionError):
    """An internal invariant was broken"""


class UsageError(BoxSensitivityError):
    """Command-line flags that cannot be run together"""
