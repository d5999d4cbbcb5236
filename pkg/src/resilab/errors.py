"""Exception hierarchy shared by all resilab modules."""


class ResilabError(Exception):
    """Base class for every error raised by resilab."""


class DataError(ResilabError):
    """Input data violates a schema or a domain invariant."""


class MissingColumn(DataError):
    pass


class NonFiniteValue(DataError):
    def __init__(self, row: int, column: str, raw: str = ""):
        self.row = row
        self.column = column
        super().__init__(f"row {row}: non-finite or unparsable {column!r} ({raw!r})")


class NonPositiveMarketCap(DataError):
    def __init__(self, row: int, value: float):
        self.row = row
        super().__init__(f"row {row}: market cap must be > 0, got {value!r}")


class UnknownDateInFactors(DataError):
    def __init__(self, date, row: int | None = None):
        self.date = date
        self.row = row
        where = f"row {row}: " if row is not None else ""
        super().__init__(f"{where}date {date} not present in factor series")


class InvalidNaics(DataError):
    def __init__(self, row: int, raw: str):
        self.row = row
        super().__init__(f"row {row}: naics must be 2-6 digits, got {raw!r}")


class ExcessReturnMismatch(DataError):
    def __init__(self, row: int, supplied: float, computed: float):
        self.row = row
        super().__init__(
            f"row {row}: supplied excess return {supplied!r} != ret - rf = {computed!r}"
        )


class DuplicateObservation(DataError):
    pass


class NaicsTooShort(DataError):
    def __init__(self, firm_id: str, naics: str, level: int):
        self.firm_id = firm_id
        super().__init__(f"firm {firm_id}: naics {naics!r} has fewer than {level} digits")


class InvalidMeasure(DataError):
    pass


class EstimationError(ResilabError):
    pass


class RankDeficient(EstimationError):
    pass


class RankDeficientDesign(RankDeficient):
    def __init__(self, firm_id: str):
        self.firm_id = firm_id
        super().__init__(f"firm {firm_id}: factor design matrix is rank deficient")


class MissingFactorDate(EstimationError):
    pass


class SeriesTooShort(EstimationError):
    pass


class InsufficientOverlap(EstimationError):
    pass


class PortfolioError(ResilabError):
    pass


class EmptyUniverse(PortfolioError):
    def __init__(self, date):
        self.date = date
        super().__init__(f"fewer than two firms with measure values on {date}")


class MissingCap(PortfolioError):
    def __init__(self, firm_id: str, date):
        self.firm_id = firm_id
        self.date = date
        super().__init__(f"firm {firm_id}: no market cap available for weighting on {date}")


class WindowOutOfRange(PortfolioError):
    pass


class OptionError(ResilabError):
    pass


class GridTooNarrow(OptionError):
    pass


class NegativePrice(OptionError):
    pass


class ArbitrageViolation(OptionError):
    pass


class WeightMismatch(OptionError):
    pass


class MaturityMismatch(OptionError):
    pass


class InvalidGrid(OptionError):
    pass


class InvalidSpec(ResilabError):
    pass


class ConfigError(ResilabError):
    pass
