from .exceptions import (ConfigError, DatasetFormatError, GraphConnectivityError, GraphConstructionError,
                         ReconstructionError, TrainingDivergedError)
from .graph import Graph, build_knn_graph, normalized_laplacian
from .temporal import TimeSignal, sobolev_smoothness, temporal_difference
from .solvers import SamplingMask, SolverConfig, solve
from .timegnn import CascadeModel, load_checkpoint, save_checkpoint
from .gcn import GCNModel
from .trainer import ModelConfig, TrainConfig, train
from .dataset import Dataset
from .metrics import Metrics, compute_metrics

__all__ = ['ConfigError', 'DatasetFormatError', 'GraphConnectivityError', 'GraphConstructionError',
           'ReconstructionError', 'TrainingDivergedError', 'Graph', 'build_knn_graph', 'normalized_laplacian',
           'TimeSignal', 'sobolev_smoothness', 'temporal_difference', 'SamplingMask', 'SolverConfig', 'solve',
           'CascadeModel', 'load_checkpoint', 'save_checkpoint', 'GCNModel', 'ModelConfig', 'TrainConfig',
           'train', 'Dataset', 'Metrics', 'compute_metrics']
