from typing import Optional, Tuple, Dict, Any


class SALEError(Exception):
    """
    Root of every error raised by the SALE packages.
    """


class ConfigError(SALEError, ValueError):

    def __init__(self, key: str, message: str):
        """
        Invalid or unknown configuration entry.

        :param key: Name of the offending configuration key.
        :param message: Human readable description.
        """

        super().__init__(f"[{key}] {message}")
        self.key = key


class ContractError(SALEError, RuntimeError):
    """
    Misuse of the kernel API (double start of an exchange, closed handle, mismatched schedule...).
    """


class TransportError(SALEError, RuntimeError):

    def __init__(self, neighbor: int, message: str):
        """
        Failure while delivering or receiving a message.

        :param neighbor: Rank of the peer involved in the failed communication.
        :param message: Human readable description.
        """

        super().__init__(f"neighbor {neighbor}: {message}")
        self.neighbor = neighbor


class NumericalError(SALEError, ArithmeticError):
    """
    Failure of the numerical scheme. The harness stamps the cycle number before surfacing it.
    """

    cycle: Optional[int] = None


class TangledMeshError(NumericalError):

    def __init__(self, cell: Tuple[int, ...], volume: float):
        super().__init__(f"tangled mesh: cell {cell} has volume {volume:.6e}")
        self.cell = cell
        self.volume = volume


class TimestepCollapseError(NumericalError):
    pass


class RemapOverrunError(NumericalError):
    pass


class PositivityError(NumericalError):

    def __init__(self, cell: Tuple[int, ...], quantity: str, value: float):
        super().__init__(f"negative {quantity} {value:.6e} in cell {cell} after remap")
        self.cell = cell


class DegenerateStateError(NumericalError):
    pass


class EmptyCellError(NumericalError):
    pass


class VacuumError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class MissingBaselineError(SALEError, ValueError):
    pass


class VerificationError(SALEError):

    def __init__(self, message: str, metrics: Optional[Dict[str, Any]] = None):
        """
        An oracle comparison exceeded its tolerance.

        :param message: Human readable description.
        :param metrics: Measured errors and their tolerances.
        """

        super().__init__(message)
        self.metrics = {} if metrics is None else metrics
