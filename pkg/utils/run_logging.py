import functools
import logging
import time
from typing import Any, Callable, Dict, Optional

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbosity: int = 0) -> None:
    """Install one root handler; verbosity -1 = warnings only, 0 = info, 1+ = debug"""
    if verbosity < 0:
        level = logging.WARNING
    elif verbosity == 0:
        level = logging.INFO
    else:
        level = logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def _describe(result: Any) -> Dict[str, Any]:
    """Pick the attributes worth reporting from a run result"""
    details = {}
    for attr in ("iterations", "final_residual", "converged", "epochs_run", "final_loss", "name"):
        value = getattr(result, attr, None)
        if value is not None:
            details[attr] = value
    if isinstance(result, list):
        details["items"] = len(result)
    return details


def log_run(level: int = logging.INFO, summary: Optional[Callable[[Any], Dict[str, Any]]] = None):
    """Decorator that logs start, completion time and failures of a computation"""

    def decorator(func):
        logger = logging.getLogger(func.__module__)

        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            logger.log(level, "Starting %s", func.__name__)
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                duration = time.perf_counter() - start
                logger.error("%s failed after %.3fs: %s", func.__name__, duration, e)
                raise

            duration = time.perf_counter() - start
            details = (summary or _describe)(result)
            rendered = ", ".join(f"{k}={v}" for k, v in details.items())
            logger.log(level, "%s completed in %.3fs%s", func.__name__, duration,
                       f" ({rendered})" if rendered else "")
            return result

        return wrapper

    return decorator
