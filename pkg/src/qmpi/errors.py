"""Exception hierarchy shared by every layer of the stack."""


class QmpiError(Exception):
    """Base class for all errors raised by qmpi."""


# -- engine ---------------------------------------------------------------

class CapacityExceeded(QmpiError):
    pass


class DeadHandle(QmpiError):
    pass


class SameQubitCnot(QmpiError):
    pass


class StillEntangled(QmpiError):
    pass


class NotSeparable(QmpiError):
    pass


class TooFewOwners(QmpiError):
    pass


class ForcedOutcomeImpossible(QmpiError):
    pass


# -- fabric ---------------------------------------------------------------

class NotConnected(QmpiError):
    pass


class UnknownNode(QmpiError):
    pass


class TagMismatch(QmpiError):
    pass


class ProtocolError(QmpiError):
    """A peer sent a message that does not fit the protocol in progress."""


class LocalityViolation(QmpiError):
    pass


class DuplicateOwner(QmpiError, ValueError):
    pass


class DeadlockTimeout(QmpiError):
    """A blocking call could not complete: no peer can make progress."""


class RankShutdown(QmpiError):
    """Raised inside a parked rank when the run is being torn down."""


# -- communicator / primitives --------------------------------------------

class DuplicateInit(QmpiError):
    pass


class SizeMismatch(QmpiError):
    pass


class NotOwner(QmpiError):
    pass


class SelfSend(QmpiError):
    pass


class WrongCount(QmpiError):
    pass


class NestedExpose(QmpiError):
    pass


class StaleContext(QmpiError):
    pass


class ShareTampered(QmpiError):
    pass


# -- runtime --------------------------------------------------------------

class ConfigError(QmpiError, ValueError):
    pass


class DuplicateName(QmpiError):
    pass


class UnknownProgram(QmpiError):
    pass


class RankPanic(QmpiError):
    """One rank of a launch failed; ``rank`` names it, ``cause`` is the original error."""

    def __init__(self, rank, cause):
        self.rank = rank
        self.cause = cause
        super().__init__(f"rank {rank} failed: {type(cause).__name__}: {cause}")


class GlobalDeadlock(RankPanic):
    pass


# -- assembly -------------------------------------------------------------

class NqasmError(QmpiError):
    """Assembly error carrying the 1-based source position."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class UnknownOpcode(NqasmError):
    pass


class BadArity(NqasmError):
    pass


class BadOperand(NqasmError):
    pass


class UnallocatedQubit(NqasmError):
    pass


class DoubleFree(NqasmError):
    pass


class NqasmRuntimeError(NqasmError):
    """A fabric/engine error raised while executing an instruction."""
