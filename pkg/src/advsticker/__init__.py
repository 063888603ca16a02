"""Black-box sticker placement attacks against face recognition oracles."""

from .evolution import (
    AttackContext,
    AttackResult,
    Objective,
    SearchConfig,
    run,
)
from .geometry import CompositeParams, FaceSurface, Sticker, composite
from .harness import (
    AttackConfig,
    ConfigError,
    SweepResult,
    ablation,
    emit_report,
    exhaustive_sweep,
    parse_attack_config,
    run_batch,
    stable_view,
)
from .oracle import (
    BudgetExhausted,
    Oracle,
    QueryResult,
    RemoteError,
    RemoteOracle,
    SyntheticLandscape,
    SyntheticOracle,
)
from .paramspace import (
    MaskMatrix,
    ParamBounds,
    ParamVector,
    build_valid_index,
)

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackContext",
    "AttackResult",
    "BudgetExhausted",
    "CompositeParams",
    "ConfigError",
    "FaceSurface",
    "MaskMatrix",
    "Objective",
    "Oracle",
    "ParamBounds",
    "ParamVector",
    "QueryResult",
    "RemoteError",
    "RemoteOracle",
    "SearchConfig",
    "Sticker",
    "SweepResult",
    "SyntheticLandscape",
    "SyntheticOracle",
    "ablation",
    "build_valid_index",
    "composite",
    "emit_report",
    "exhaustive_sweep",
    "parse_attack_config",
    "run",
    "run_batch",
    "stable_view",
]
