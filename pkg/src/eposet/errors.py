"""Exception hierarchy shared by every module."""


class EposetError(Exception):
    """Base class for all errors raised by this package."""


class InputError(EposetError):
    """Malformed input or configuration (CLI exit code 2)."""


class EmptyInput(InputError):
    pass


class MixedRank(InputError):
    pass


class AllZeroWeights(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class NotNormalized(InputError):
    pass


class LevelMismatch(InputError):
    pass


class LevelOutOfRange(InputError):
    pass


class NonPrimeQ(InputError):
    pass


class BudgetExceeded(InputError):
    def __init__(self, level, count, budget):
        super().__init__(f"level {level} has {count} elements, budget is {budget}")
        self.level = level
        self.count = count
        self.budget = budget


class InvalidPoset(InputError):
    pass


class NotDownwardRegular(EposetError):
    def __init__(self, level, offending):
        super().__init__(f"level {level}: down-degrees differ at ids {list(offending)[:10]}")
        self.level = level
        self.offending = list(offending)


class NotMiddleRegular(EposetError):
    def __init__(self, k, i, pair):
        super().__init__(f"chain counts m({k},{i}) differ, e.g. at pair {pair}")
        self.k = k
        self.i = i
        self.pair = pair


class ZeroMass(EposetError):
    pass


class NotAffine(EposetError):
    pass


class NotStochastic(EposetError):
    pass


class NotSelfAdjoint(EposetError):
    pass


class EmptySupport(EposetError):
    def __init__(self, element):
        super().__init__(f"restricted walk has an empty row at element {element}")
        self.element = element


class RankDeficient(EposetError):
    def __init__(self, rank, expected):
        super().__init__(f"stacked lifted basis has rank {rank}, expected {expected}")
        self.rank = rank
        self.expected = expected


class StripsOverlap(EposetError):
    pass


class ContainmentViolated(EposetError):
    def __init__(self, eigenvalue, needed_slack):
        super().__init__(
            f"eigenvalue {eigenvalue!r} outside every strip; needs slack {needed_slack!r}"
        )
        self.eigenvalue = eigenvalue
        self.needed_slack = needed_slack


class EmptySet(EposetError):
    pass


class ZeroMean(EposetError):
    pass


class NoLocalConstantSign(EposetError):
    pass
