"""Exception hierarchy. Each class carries a stable ``code`` string."""


class FPSIError(Exception):
    code = "ERROR"


class GeometryError(FPSIError, ValueError):
    code = "GEOMETRY_ERROR"


class ArgumentError(FPSIError, ValueError):
    code = "ARGUMENT_ERROR"


class FormatError(FPSIError, ValueError):
    code = "FORMAT_ERROR"


class MeshInvalid(FPSIError, ValueError):
    code = "MESH_INVALID"


class MeshTangled(FPSIError, RuntimeError):
    code = "MESH_TANGLED"

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class NumericError(FPSIError, ArithmeticError):
    code = "NUMERIC_ERROR"


class BCConflict(FPSIError, ValueError):
    code = "BC_CONFLICT"


class SingularMatrix(FPSIError, ArithmeticError):
    code = "SINGULAR_MATRIX"

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message if pivot is None else f"{message} (pivot {pivot})")
        self.pivot = pivot


class OutputError(FPSIError, OSError):
    code = "IO_ERROR"
