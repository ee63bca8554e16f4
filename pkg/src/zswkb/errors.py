"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` so the command line front end can map
failures onto its documented status codes without a lookup table.
"""


class ZSError(Exception):
    exit_code = 4


class ConfigError(ZSError):
    exit_code = 2


class CertificationError(ZSError):
    exit_code = 3


# potential
class ZeroPotential(ZSError):
    pass


class DegenerateExtremumWarning(UserWarning):
    pass


# turning points
class NonSimpleTurningPoint(ZSError):
    pass


class IncompleteSearch(ZSError):
    pass


class OrderingViolation(ZSError):
    pass


class KindMismatch(ZSError):
    pass


class UnsupportedOrder(ZSError):
    pass


# branch tracking and actions
class BranchAmbiguity(ZSError):
    pass


class TurningPointOnPath(ZSError):
    pass


class SingularEndpoint(ZSError):
    pass


# wkb
class ExtrapolationOutsidePath(ZSError):
    pass


class NoMonotonePath(ZSError):
    pass


# transition / solvers
class NewtonDivergence(ZSError):
    pass


class DegenerateJacobian(ZSError):
    pass


# oracle
class StepLimit(ZSError):
    pass


class ContourThroughZero(ZSError):
    pass


class CountMismatch(ZSError):
    def __init__(self, msg, rect=None):
        super().__init__(msg)
        self.rect = rect


# orchestration
class WindowCertificationFailed(CertificationError):
    pass


class InsufficientLadder(ConfigError):
    pass
