"""
Exception classes for the STL fleet planner.

This module defines a hierarchy of custom exceptions used to report the various
error scenarios of the toolkit: malformed mission formulas, traces that do not cover
a formula, degenerate motion primitives, inconsistent mission specifications and
broken mission files. The root class is not a ``ValueError``: exceptions raised inside
pydantic validators reach the caller unchanged.
"""


class StlFleetException(Exception):
    """
    Base exception for the STL fleet planner.

    All custom exceptions of the package inherit from this class.
    """


class StlFleetFormulaException(StlFleetException):
    """
    Exception raised for errors in an STL formula.

    Generic parent of the parser and name-resolution errors.
    """


class StlFleetSyntaxException(StlFleetFormulaException):
    """
    Exception raised when a mission formula does not conform to the DSL grammar.

    The line and column of the offending token are kept on the exception and
    repeated in the message.
    """

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


class StlFleetIntervalException(StlFleetSyntaxException):
    """
    Exception raised for an invalid time interval.

    This error occurs when the lower bound of an interval is negative or larger
    than its upper bound.
    """


class StlFleetUnknownNameException(StlFleetFormulaException):
    """
    Exception raised when an agent or region name cannot be resolved.
    """

    def __init__(self, name: str, kind: str = "name"):
        self.name = name
        self.kind = kind
        super().__init__(f"unknown {kind} '{name}'")


class StlFleetEvaluationException(StlFleetException):
    """
    Exception raised when a formula cannot be evaluated over a trace.
    """


class StlFleetEmptyWindowException(StlFleetEvaluationException):
    """
    Exception raised when a time interval discretises to no sample.
    """


class StlFleetInsufficientTraceException(StlFleetEvaluationException):
    """
    Exception raised when a trace is too short to cover the horizon of a formula.
    """


class StlFleetPrimitiveException(StlFleetException):
    """
    Exception raised for errors while building or sampling motion primitives.
    """


class StlFleetNonfiniteInputException(StlFleetPrimitiveException):
    """
    Exception raised when a boundary state contains NaN or infinite components.
    """


class StlFleetDegenerateDurationException(StlFleetPrimitiveException):
    """
    Exception raised when a segment duration is not strictly positive.
    """


class StlFleetDegenerateSamplingException(StlFleetPrimitiveException):
    """
    Exception raised when no sample time falls inside a segment.
    """


class StlFleetDimensionMismatchException(StlFleetException):
    """
    Exception raised when arrays or decision vectors do not match a mission.
    """


class StlFleetInvalidSpecException(StlFleetException):
    """
    Exception raised when a mission specification or environment violates its invariants.
    """


class StlFleetHorizonException(StlFleetInvalidSpecException):
    """
    Exception raised when the horizon of the mission formula exceeds the trajectory duration.
    """


class StlFleetBadParamException(StlFleetException):
    """
    Exception raised for invalid parameters.

    This error occurs when client code passes invalid arguments, such as duplicate
    agent names or an odd fleet size, to a builder or planner function.
    """


class StlFleetMissionFileException(StlFleetException):
    """
    Exception raised for an invalid mission file.

    The dotted ``section.key`` path of the offending field prefixes the message.
    """

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}" if field_path else message)
