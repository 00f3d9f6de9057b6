"""Mueller functional, Thomas-Fermi theory and screening on radial grids."""

from ._core import (
    ConfigError,
    EnergyBreakdown,
    IonizationSweep,
    MuellerOptions,
    MuellerResult,
    RadialGrid,
    SweepPoint,
    TFSolution,
    __version__,
    config_hash,
    direct_energy,
    eta_profile,
    integrate3d,
    ionization_sweep,
    minimize,
    parse_config,
    report,
    run,
    solve_exterior_tf,
    solve_tf,
    sphere_average_positive_part,
    tf,
)

__all__ = [
    "ConfigError",
    "EnergyBreakdown",
    "IonizationSweep",
    "MuellerOptions",
    "MuellerResult",
    "RadialGrid",
    "SweepPoint",
    "TFSolution",
    "__version__",
    "config_hash",
    "direct_energy",
    "eta_profile",
    "integrate3d",
    "ionization_sweep",
    "minimize",
    "parse_config",
    "report",
    "run",
    "solve_exterior_tf",
    "solve_tf",
    "sphere_average_positive_part",
    "tf",
]
