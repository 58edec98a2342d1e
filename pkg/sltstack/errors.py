"""
Error Types
Exception hierarchy shared by every sltstack module
"""


class SltError(Exception):
    """Base class for all sltstack errors"""


class ShapeError(SltError, ValueError):
    """Operand shapes do not conform"""

    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes
        rendered = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {rendered}")


class ConfigError(SltError, ValueError):
    """Configurations or checkpoints that cannot be combined"""


class DecodeError(SltError, RuntimeError):
    """A search could not produce a valid result"""


class NonFiniteError(SltError, ArithmeticError):
    """A loss or gradient contained NaN or infinity"""


class CheckpointFormatError(SltError, ValueError):
    """A checkpoint file is not in SQBR1 format"""


class StageError(SltError, RuntimeError):
    """An experiment stage failed"""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")
