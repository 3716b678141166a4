"""Benjamin-Ono explicit formula and zero-dispersion toolkit."""

from ._bozd import (  # noqa: F401
    GrowthClass,
    NumericalFailure,
    RealLineFunction,
    RegimeRefusal,
    ValidationError,
    branch_roots,
    branch_zd,
    cauchy_extension,
    critical_values,
    first_critical_time,
    gaussian,
    identity,
    lorentzian,
    pi_u_explicit,
    run_config,
    sech2,
    solve,
    spike_train,
    suggest_xi_max,
    zd_log_integral,
    zd_operator,
    zd_real_line,
    zero,
)

__version__ = "0.1.0"
