"""Exception hierarchy shared by all simulator layers."""


class SimError(Exception):
    """Base class for all simulator errors."""


class FlashStateError(SimError):
    """Illegal transition requested on the flash state machine."""


class ProgramOnNonErased(FlashStateError):
    pass


class ReprogramOnErased(FlashStateError):
    pass


class ReprogramOnFullTlc(FlashStateError):
    pass


class ReprogramBudgetExceeded(FlashStateError):
    pass


class ReprogramOutsideFrontier(FlashStateError):
    pass


class FrontierNotFullyReprogrammed(FlashStateError):
    pass


class OutOfOrderProgram(FlashStateError):
    pass


class EraseActiveBlock(FlashStateError):
    pass


class OutOfFreeBlocks(SimError):
    pass


class NoSpaceForMigration(SimError):
    pass


class QuotaExhausted(SimError):
    pass


class DeviceFull(SimError):
    pass


class MalformedLine(SimError):
    pass


class EmptyRun(SimError):
    pass


class MissingBaseline(SimError):
    pass


class ConfigError(SimError):
    pass
