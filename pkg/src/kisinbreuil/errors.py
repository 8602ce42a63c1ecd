"""Exception types shared across the package."""


class KisinBreuilError(Exception):
    pass


class NonMonicDivisor(KisinBreuilError):
    pass


class NotEisenstein(KisinBreuilError):
    pass


class ProfileError(KisinBreuilError):
    pass


class ProfileOverflow(KisinBreuilError):
    pass


class NotInFiltration(KisinBreuilError):
    pass


class NotUnit(KisinBreuilError):
    pass


class NotDivisible(KisinBreuilError):
    pass


class NotInSourceRing(KisinBreuilError):
    pass


class NoWitness(KisinBreuilError):
    pass


class NotFiniteHeight(KisinBreuilError):
    pass


class ShapeMismatch(KisinBreuilError):
    pass


class NoConvergence(KisinBreuilError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class NotUnipotent(KisinBreuilError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class NotStableCandidate(KisinBreuilError):
    pass


class NotALattice(KisinBreuilError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class ParseError(KisinBreuilError):
    pass
