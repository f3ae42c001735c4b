"""Exception hierarchy.

Every error raised by the library derives from :class:`AgidsError`.  The CLI
maps the three families onto exit codes: usage (1), data (2), limit (3).
"""

from __future__ import annotations


class AgidsError(Exception):
    """Base class for all library errors."""

    exit_code = 2


class UsageError(AgidsError, ValueError):
    """Invalid argument supplied by the caller."""

    exit_code = 1


class InvalidFraction(UsageError):
    def __init__(self, fraction: float, allowed: str = "(0, 1)"):
        super().__init__(f"fraction {fraction!r} outside {allowed}")
        self.fraction = fraction


class DataError(AgidsError):
    """Input data violates a contract (missing columns, unknown ids, ...)."""


class MissingColumn(DataError):
    def __init__(self, name: str):
        super().__init__(f"missing required column {name!r}")
        self.name = name


class MalformedRow(DataError):
    def __init__(self, line_no: int, reason: str = ""):
        msg = f"malformed row at line {line_no}"
        super().__init__(f"{msg}: {reason}" if reason else msg)
        self.line_no = line_no
        self.reason = reason


class EmptyDataset(DataError):
    pass


class UnknownVulnerability(DataError):
    def __init__(self, vuln_id: str):
        super().__init__(f"unknown vulnerability {vuln_id!r}")
        self.vuln_id = vuln_id


class UnknownNode(DataError):
    def __init__(self, ip: str):
        super().__init__(f"{ip!r} is not a node of the attack graph")
        self.ip = ip


class SingleClass(DataError):
    pass


class EmptyTraining(DataError):
    pass


class WidthMismatch(DataError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected {expected} feature columns, got {got}")
        self.expected = expected
        self.got = got


class LengthMismatch(DataError):
    def __init__(self, left: int, right: int):
        super().__init__(f"length mismatch: {left} != {right}")
        self.left = left
        self.right = right


class EmptyPool(DataError):
    pass


class LimitExceeded(AgidsError):
    """Path enumeration hit the configured cap; partial results are discarded."""

    exit_code = 3

    def __init__(self, max_paths: int):
        super().__init__(f"path enumeration exceeded cap of {max_paths} paths")
        self.max_paths = max_paths
