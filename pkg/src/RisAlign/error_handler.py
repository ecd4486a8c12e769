"""
Error handling for RisAlign

Exception hierarchy shared by every module plus a central handler that logs
failures, keeps a short history and maps them to CLI exit codes.
"""

import json
import logging
import traceback
from collections.abc import Callable
from datetime import datetime
from enum import Enum
from functools import wraps
from typing import Any

import yaml
from pydantic import ValidationError


class ErrorLevel(Enum):
    """Error severity levels"""

    INFO = "info"
    WARNING = "warning"
    ERROR = "error"
    CRITICAL = "critical"


class ErrorCategory(Enum):
    """Error categories for classification"""

    DOMAIN = "domain"
    SHAPE = "shape"
    UNSUPPORTED = "unsupported"
    TRUNCATION = "truncation"
    INFEASIBLE = "infeasible"
    ORDERING = "ordering"
    ESTIMATION = "estimation"
    SIMULATION = "simulation"
    CONFIGURATION = "configuration"
    FILE = "file"
    UNKNOWN = "unknown"


EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_RUNTIME_ERROR = 3


class RisAlignError(Exception):
    """Base exception for RisAlign"""

    def __init__(
        self,
        message: str,
        category: ErrorCategory = ErrorCategory.UNKNOWN,
        level: ErrorLevel = ErrorLevel.ERROR,
        details: dict[str, Any] | None = None,
        user_message: str | None = None,
    ):
        super().__init__(message)
        self.category = category
        self.level = level
        self.details = details or {}
        self.user_message = user_message or message
        self.timestamp = datetime.now()


class DomainError(RisAlignError, ValueError):
    """Argument outside the mathematical domain of an operation"""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(message, category=ErrorCategory.DOMAIN, **kwargs)


class ShapeError(RisAlignError, ValueError):
    """Mismatched vector lengths"""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(message, category=ErrorCategory.SHAPE, **kwargs)


class UnsupportedOperationError(RisAlignError, NotImplementedError):
    """Operation not defined for the given variant"""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(message, category=ErrorCategory.UNSUPPORTED, **kwargs)


class TruncationError(RisAlignError, ValueError):
    """Series truncation order too small to represent the result"""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(message, category=ErrorCategory.TRUNCATION, **kwargs)


class InfeasibleError(RisAlignError):
    """Power allocation or budget with no finite solution"""

    def __init__(self, message: str, index: int | None = None, **kwargs: Any):
        details = kwargs.pop("details", {})
        details["index"] = index
        super().__init__(message, category=ErrorCategory.INFEASIBLE, details=details, **kwargs)
        self.index = index


class OrderingError(RisAlignError, ValueError):
    """Users not in the required channel order"""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(message, category=ErrorCategory.ORDERING, **kwargs)


class EstimationError(RisAlignError):
    """Not enough usable data for an estimate"""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(message, category=ErrorCategory.ESTIMATION, **kwargs)


class SimulationError(RisAlignError):
    """Monte Carlo run failed or was cancelled"""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(message, category=ErrorCategory.SIMULATION, **kwargs)


class ConfigurationError(RisAlignError):
    """Configuration errors"""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(message, category=ErrorCategory.CONFIGURATION, level=ErrorLevel.CRITICAL, **kwargs)


class ErrorHandler:
    """Centralized error logging and exit-code mapping"""

    def __init__(self, logger: logging.Logger | None = None, history_size: int = 100):
        self.logger = logger or logging.getLogger("RisAlign")
        self.history_size = history_size
        self.error_history: list[dict[str, Any]] = []

    def handle_error(self, error: Exception, context: dict[str, Any] | None = None, raise_after: bool = False) -> int:
        """
        Log an error, record it and return the matching exit code

        Args:
            error: The exception to handle
            context: Additional context information
            raise_after: Whether to re-raise the error after handling

        Returns:
            Process exit code for the error
        """
        if isinstance(error, RisAlignError):
            category = error.category
            level = error.level
            user_message = error.user_message
            details = error.details
        else:
            category = self._classify_error(error)
            level = ErrorLevel.ERROR
            user_message = str(error) or type(error).__name__
            details = {}

        error_info = {
            "timestamp": datetime.now().isoformat(),
            "category": category.value,
            "level": level.value,
            "message": str(error),
            "user_message": user_message,
            "type": type(error).__name__,
            "context": context or {},
            "details": details,
            "traceback": traceback.format_exc(),
        }

        self._log_error(error_info)

        self.error_history.append(error_info)
        if len(self.error_history) > self.history_size:
            self.error_history.pop(0)

        if raise_after:
            raise error

        return self.exit_code_for(category)

    @staticmethod
    def exit_code_for(category: ErrorCategory) -> int:
        """Configuration problems exit with 2, everything else with 3"""
        if category == ErrorCategory.CONFIGURATION:
            return EXIT_CONFIG_ERROR
        return EXIT_RUNTIME_ERROR

    def _classify_error(self, error: Exception) -> ErrorCategory:
        """Classify a foreign exception into a category"""
        if isinstance(error, ValidationError | yaml.YAMLError | json.JSONDecodeError):
            return ErrorCategory.CONFIGURATION
        if isinstance(error, OSError):
            return ErrorCategory.FILE
        if isinstance(error, ZeroDivisionError | FloatingPointError | OverflowError):
            return ErrorCategory.DOMAIN

        error_str = str(error).lower()
        if any(keyword in error_str for keyword in ["file", "path", "directory", "not found", "access denied"]):
            return ErrorCategory.FILE
        if any(keyword in error_str for keyword in ["config", "schema", "yaml", "json"]):
            return ErrorCategory.CONFIGURATION

        return ErrorCategory.UNKNOWN

    def _log_error(self, error_info: dict[str, Any]) -> None:
        """Log error based on level"""
        level = error_info["level"]
        message = f"[{error_info['category']}] {error_info['message']}"

        if level == ErrorLevel.CRITICAL.value:
            self.logger.critical(message)
        elif level == ErrorLevel.ERROR.value:
            self.logger.error(message)
        elif level == ErrorLevel.WARNING.value:
            self.logger.warning(message)
        else:
            self.logger.info(message)

    def get_error_summary(self) -> dict[str, Any]:
        """Get summary of recent errors"""
        if not self.error_history:
            return {"total": 0, "by_category": {}, "by_level": {}}

        by_category: dict[str, int] = {}
        by_level: dict[str, int] = {}
        for error in self.error_history:
            by_category[error["category"]] = by_category.get(error["category"], 0) + 1
            by_level[error["level"]] = by_level.get(error["level"], 0) + 1

        return {
            "total": len(self.error_history),
            "by_category": by_category,
            "by_level": by_level,
            "recent": self.error_history[-5:],
        }


def with_error_handling(
    handler: ErrorHandler, on_error: Callable[[Exception, int], None] | None = None
) -> Callable[[Callable[..., int]], Callable[..., int]]:
    """
    Decorator turning exceptions of an exit-code returning function into exit codes

    Args:
        handler: ErrorHandler instance
        on_error: Called with the exception and its exit code, e.g. to print to stderr
    """

    def decorator(func: Callable[..., int]) -> Callable[..., int]:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> int:
            try:
                return func(*args, **kwargs)
            except Exception as e:
                context = {
                    "function": func.__name__,
                    "args": str(args)[:100],
                    "kwargs": str(kwargs)[:100],
                }
                code = handler.handle_error(e, context)
                if on_error is not None:
                    on_error(e, code)
                return code

        return wrapper

    return decorator


_global_handler: ErrorHandler | None = None


def get_global_error_handler() -> ErrorHandler:
    """Get or create global error handler"""
    global _global_handler
    if _global_handler is None:
        _global_handler = ErrorHandler()
    return _global_handler
