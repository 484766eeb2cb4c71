class ContractViolation(ValueError):
    """Raised when an operation's preconditions or invariants do not hold."""


class WeightFileError(ContractViolation):
    """Base class for DGW1 weight-file problems."""


class WeightFormatError(WeightFileError):
    """Magic bytes, version or header encoding are not what we write."""


class ManifestMismatchError(WeightFileError):
    """The stored architecture or tensor manifest does not match the target."""


class TruncatedPayloadError(WeightFileError):
    """The file ends before the header, payload or checksum is complete."""


class ChecksumError(WeightFileError):
    """The payload CRC-64 does not match the stored value."""


class UnknownClassIdError(ContractViolation):
    def __init__(self, class_id: int):
        super().__init__(f"Unknown source class id: {class_id}")
        self.class_id = class_id


class TrainingDivergedError(ContractViolation):
    def __init__(self, batch_seed: int, value: float):
        super().__init__(f"Non-finite training loss ({value}) on batch seed {batch_seed}")
        self.batch_seed = batch_seed
        self.value = value
