from .run_logging import configure_logging, log_run

__all__ = ['configure_logging', 'log_run']
