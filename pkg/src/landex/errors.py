"""Exception hierarchy.

Two families matter to callers: :class:`DataError` for anything wrong with
the inputs (parse failures, validation, missing exchange rates) and
:class:`NumericalError` for problems surfacing inside the estimators.
The CLI maps them to exit codes 3 and 4.
"""


class LandexError(Exception):
    pass


class DataError(LandexError):
    pass


class NumericalError(LandexError):
    pass


# market model
class EmptyBundle(DataError):
    pass


class OutOfGrid(DataError):
    pass


class DuplicateParcel(DataError):
    pass


# ingest
class MalformedRow(DataError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownToken(DataError):
    pass


class BadTimestamp(DataError):
    pass


class DuplicatePriceRow(DataError):
    pass


class NonPositivePrice(DataError):
    pass


class InconsistentGroup(DataError):
    pass


class NegativeAge(DataError):
    pass


class MissingPrice(DataError):
    pass


class ZeroPrice(DataError):
    pass


class EmptyInput(DataError):
    pass


class EmptyAfterFilter(DataError):
    pass


class MissingTerm(DataError):
    pass


class InvalidConfig(DataError):
    pass


# stats
class TooFewObservations(DataError):
    pass


class ConstantSeries(DataError):
    pass


class NoOverlap(DataError):
    pass


# regression
class RankDeficient(NumericalError):
    def __init__(self, message: str, labels=()):
        super().__init__(message)
        self.labels = list(labels)


class DimensionMismatch(NumericalError):
    pass


class NonPositiveWeight(NumericalError):
    pass


class DegenerateVarianceFit(NumericalError):
    pass
