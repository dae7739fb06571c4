"""Python 3.10 compatibility: ``enum.StrEnum`` was added in 3.11."""

import enum

try:
    from enum import StrEnum
except ImportError:  # Python < 3.11

    class StrEnum(str, enum.Enum):
        """Backport of ``enum.StrEnum``: members are str; str() gives the value."""

        __str__ = str.__str__
        __format__ = str.__format__

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()
