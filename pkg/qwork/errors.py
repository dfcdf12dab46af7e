class QuantumWorkError(Exception):
    pass


class DimensionMismatchError(QuantumWorkError, ValueError):
    pass


class NotHermitianError(QuantumWorkError):
    pass


class NotUnitaryError(QuantumWorkError):
    pass


class InvalidStateError(QuantumWorkError):
    pass


class GridLeakageError(QuantumWorkError):
    pass


class NormDriftError(QuantumWorkError):
    pass


class DegenerateWindowError(QuantumWorkError):
    pass


class ParityError(QuantumWorkError, ValueError):
    pass


class ResolutionError(QuantumWorkError):
    pass


class VanishingWeightError(QuantumWorkError):
    pass


class PreconditionError(QuantumWorkError):
    pass


class SamplingError(QuantumWorkError):
    pass
