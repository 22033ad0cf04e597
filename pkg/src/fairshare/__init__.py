"""Exact fair division of indivisible goods: MMS/APS oracles and approximation algorithms."""

from fairshare.errors import (
    AllocationError,
    CapabilityError,
    DomainError,
    FairshareError,
    InvariantError,
    ParseError,
)
from fairshare.model import (
    Additive,
    Allocation,
    Coverage,
    FractionalAllocation,
    Instance,
    SplcValuation,
    TruncatedAdditive,
    parse_allocation,
    parse_instance,
    write_allocation,
    write_instance,
)
from fairshare.shares import (
    OracleLimits,
    aps_via_truncated_extension,
    compute_shares,
    exact_aps,
    exact_mms,
    mu_value,
    verify,
)
from fairshare.splc_mms import solve_half_mms, solve_half_mms_given_targets
from fairshare.sub_aps import greedy_round, solve_third_aps

__version__ = "0.1.0"

__all__ = [
    "Additive",
    "Allocation",
    "AllocationError",
    "CapabilityError",
    "Coverage",
    "DomainError",
    "FairshareError",
    "FractionalAllocation",
    "Instance",
    "InvariantError",
    "OracleLimits",
    "ParseError",
    "SplcValuation",
    "TruncatedAdditive",
    "aps_via_truncated_extension",
    "compute_shares",
    "exact_aps",
    "exact_mms",
    "greedy_round",
    "mu_value",
    "parse_allocation",
    "parse_instance",
    "solve_half_mms",
    "solve_half_mms_given_targets",
    "solve_third_aps",
    "verify",
    "write_allocation",
    "write_instance",
]
