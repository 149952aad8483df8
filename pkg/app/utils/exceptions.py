# app/utils/exceptions.py
from typing import Optional, Sequence


class GestureQCException(Exception):
    """Base exception for the toolkit."""

    exit_code: int = 1

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class InvalidInputException(GestureQCException):
    def __init__(self, detail: str):
        super().__init__(f"Invalid input: {detail}")


class ImageTooSmallException(GestureQCException):
    def __init__(self, width: int, height: int, minimum: int = 3):
        super().__init__(
            f"Image {width}x{height} is smaller than {minimum}x{minimum}"
        )
        self.width = width
        self.height = height


class AnnotationParseException(GestureQCException):
    def __init__(self, line_number: int, detail: str):
        super().__init__(f"line {line_number}: {detail}")
        self.line_number = line_number


class ConfigException(GestureQCException):
    def __init__(self, detail: str, key: Optional[str] = None):
        prefix = f"{key}: " if key else ""
        super().__init__(f"Config error: {prefix}{detail}")
        self.key = key


class DimensionException(GestureQCException):
    def __init__(self, what: str, left: Sequence[int], right: Sequence[int]):
        super().__init__(
            f"Dimension mismatch in {what}: {tuple(left)} vs {tuple(right)}"
        )
        self.left = tuple(left)
        self.right = tuple(right)


class EmptyGroundTruthException(GestureQCException):
    def __init__(self):
        super().__init__("empty ground truth")


class IncomparableReportsException(GestureQCException):
    def __init__(self, detail: str):
        super().__init__(f"Reports are not comparable: {detail}")


class NumericFailureException(GestureQCException):
    def __init__(self, detail: str):
        super().__init__(f"Numeric failure: {detail}")


class ArityException(GestureQCException):
    def __init__(self, expected: int, got: int):
        super().__init__(f"Expected {expected} inputs, got {got}")


class UsageException(GestureQCException):
    exit_code = 2
