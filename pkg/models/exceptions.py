from typing import List, Optional, Sequence


class ReconstructionError(ValueError):
    """Base error for the reconstruction library"""


class ShapeMismatchError(ReconstructionError):
    """Raised when matrix dimensions do not agree"""


class NotSymmetricError(ReconstructionError):
    """Raised when a symmetric matrix was expected"""


class GraphConstructionError(ReconstructionError):
    """Raised for invalid node coordinates or adjacency data"""


class GraphConnectivityError(GraphConstructionError):
    """Raised when a graph has more than one connected component"""

    def __init__(self, components: Sequence[Sequence[int]]):
        self.components: List[List[int]] = [sorted(int(i) for i in c) for c in components]
        preview = "; ".join(
            "{" + ", ".join(str(i) for i in comp[:8]) + (", ..." if len(comp) > 8 else "") + "}"
            for comp in self.components[:5]
        )
        super().__init__(f"Graph is disconnected: {len(self.components)} components: {preview}")


class EigenConvergenceError(ReconstructionError):
    """Raised when Jacobi sweeps fail to diagonalize a matrix"""


class NumericalInstabilityError(ReconstructionError):
    """Raised when a forward or backward pass produces non-finite values"""

    def __init__(self, message: str, layer: Optional[int] = None):
        self.layer = layer
        super().__init__(message if layer is None else f"layer {layer}: {message}")


class TrainingDivergedError(ReconstructionError):
    """Raised when the training loss blows up"""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"Training diverged at epoch {epoch}: loss = {loss!r}")


class DatasetFormatError(ReconstructionError):
    """Raised for malformed dataset files"""

    def __init__(self, message: str, row: Optional[object] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(message + suffix)


class ConfigError(ReconstructionError):
    """Raised for invalid configuration values; `field` names the offending key"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
