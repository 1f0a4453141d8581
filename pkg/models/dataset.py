from dataclasses import dataclass

from .exceptions import ShapeMismatchError
from .graph import Graph
from .temporal import TimeSignal


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ground-truth time-varying signal on a k-NN graph"""

    name: str
    graph: Graph
    signal: TimeSignal
    knn_k: int

    def __post_init__(self):
        if self.signal.n_nodes != self.graph.n:
            raise ShapeMismatchError(
                f"Signal has {self.signal.n_nodes} rows but the graph has {self.graph.n} nodes"
            )

    @property
    def shape(self):
        return self.signal.shape

    def __str__(self) -> str:
        return f"Dataset({self.name}, {self.signal.n_nodes} nodes x {self.signal.n_times} times, k={self.knn_k})"

    def __repr__(self) -> str:
        return self.__str__()
