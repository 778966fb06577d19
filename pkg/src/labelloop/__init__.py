"""Active-learning orchestration for text-generation annotation.

Selects informative unlabeled texts with pluggable strategies, routes them
to a human queue or an LLM annotation agent under a cost budget, triggers
fine-tuning through a trainer adapter, and tracks quality on a learning
curve. Includes a benchmark harness with simulated annotators.
"""

from .config import RunConfig, resolve_config, validate_config
from .errors import LabelLoopError
from .orchestrator import ActiveLearningRun, run_active_learning
from .strategies import get_strategy, register_strategy, strategy_names

__version__ = "0.1.0"

__all__ = [
    "ActiveLearningRun",
    "LabelLoopError",
    "RunConfig",
    "__version__",
    "get_strategy",
    "register_strategy",
    "resolve_config",
    "run_active_learning",
    "strategy_names",
    "validate_config",
]
