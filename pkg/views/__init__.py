from .reconstruction_view import ReconstructionView
from .results_view import ResultsView

__all__ = ['ReconstructionView', 'ResultsView']
