"""Exception hierarchy for pairhash."""


class PairHashError(ValueError):
    """Base class for all library errors."""


class EmptyDataset(PairHashError):
    pass


class NonFinite(PairHashError):
    def __init__(self, row: int, col: int):
        super().__init__(f"non-finite value at ({row}, {col})")
        self.row = row
        self.col = col


class LabelOutOfUniverse(PairHashError):
    def __init__(self, row: int, label: int | None = None):
        super().__init__(f"row {row} has label {label} outside the label universe")
        self.row = row
        self.label = label


class UnlabeledRow(PairHashError):
    def __init__(self, row: int):
        super().__init__(f"row {row} has no labels")
        self.row = row


class ConflictingPair(PairHashError):
    pass


class DimensionMismatch(PairHashError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class LengthMismatch(DimensionMismatch):
    pass


class IndexOutOfRange(PairHashError, IndexError):
    pass


class StaleCache(PairHashError):
    pass


class NonFiniteLoss(PairHashError, FloatingPointError):
    pass


class EmptyDatabase(PairHashError):
    pass


class InvalidCutoff(PairHashError):
    pass


class ParseError(PairHashError):
    def __init__(self, message: str, location: int | None = None):
        super().__init__(message if location is None else f"{message} (at {location})")
        self.location = location


class HeaderMismatch(PairHashError):
    pass


class VersionMismatch(PairHashError):
    pass


class CorruptPayload(PairHashError):
    pass
