from typing import Optional


class MaxMinError(Exception):
    """Base error for every failure the command line maps to an exit code"""

    exit_code: int = 1


class UsageError(MaxMinError):
    exit_code = 1


class InstanceParseError(MaxMinError):
    exit_code = 1

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None) -> None:
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"{message}{suffix}")
        self.field = field
        self.line = line


class PreconditionError(MaxMinError):
    exit_code = 1


class InvariantViolation(MaxMinError):
    """An internal postcondition failed; never silently accepted"""

    exit_code = 1


class GuardExceeded(MaxMinError):
    exit_code = 3


class RetryExhausted(MaxMinError):
    exit_code = 4


class TrivialScale(MaxMinError):
    """canonicalize found s <= 0, the caller should take the matching path"""

    exit_code = 1

    def __init__(self, s: int) -> None:
        super().__init__(f"scale exponent s={s} is not positive")
        self.s = s


class NumericalFailure(MaxMinError):
    """The LP backend gave up or returned a point that fails its own rows"""

    exit_code = 1
