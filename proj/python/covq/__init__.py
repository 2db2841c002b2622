"""Recurrent deep Q-learning for energy-constrained grid coverage.

The heavy lifting lives in the compiled extension ``covq._core``; this
package re-exports its public surface.
"""

from covq._core import (  # noqa: F401
    Action,
    BestSolution,
    Cell,
    ConfigError,
    Env,
    EnvState,
    EpisodeRecord,
    EvalResult,
    GridMap,
    InstanceTooLargeError,
    MapParseError,
    OracleResult,
    PathReplay,
    StepOutcome,
    TrainConfig,
    TrainResult,
    Variant,
    __version__,
    epsilon_at,
    evaluate_checkpoint,
    generate_map,
    moving_average,
    optimal_coverage,
    reachable_cells,
    replay_path,
    train,
    verify_reachable,
)

__all__ = [
    "Action",
    "BestSolution",
    "Cell",
    "ConfigError",
    "Env",
    "EnvState",
    "EpisodeRecord",
    "EvalResult",
    "GridMap",
    "InstanceTooLargeError",
    "MapParseError",
    "OracleResult",
    "PathReplay",
    "StepOutcome",
    "TrainConfig",
    "TrainResult",
    "Variant",
    "epsilon_at",
    "evaluate_checkpoint",
    "generate_map",
    "moving_average",
    "optimal_coverage",
    "reachable_cells",
    "replay_path",
    "train",
    "verify_reachable",
]
