"""Joint power allocation and constant-modulus analog beamforming for 2-user mmWave NOMA."""

from .allocation import (
    CaseTag,
    EffectivePair,
    GainPowerAllocation,
    OrderVerdict,
    allocate,
    boundary1_solution,
    boundary2_solution,
    decoding_order_check,
    finalize_power,
    saddle_point,
)
from .beamformer import (
    BeamTarget,
    BeamVector,
    beam_pattern,
    cm_normalize,
    solve_beam,
    solve_fixed_phase,
)
from .channel import (
    Channel,
    ChannelKind,
    EffectiveChannel,
    PathComponent,
    beam_gain,
    channel_vector,
    effective_channel,
    sample_channel,
    steering_vector,
)
from .errors import ConvergenceError, Infeasible, NoPositiveRoot
from .rate import DecodeOrder, RateReport, SystemConfig, rates_case1, rates_case2, tdma_sum_rate

__version__ = "0.1.0"

__all__ = [
    "BeamTarget", "BeamVector", "CaseTag", "Channel", "ChannelKind", "ConvergenceError",
    "DecodeOrder", "EffectiveChannel", "EffectivePair", "GainPowerAllocation", "Infeasible",
    "NoPositiveRoot", "OrderVerdict", "PathComponent", "RateReport", "SystemConfig",
    "allocate", "beam_gain", "beam_pattern", "boundary1_solution", "boundary2_solution",
    "channel_vector", "cm_normalize", "decoding_order_check", "effective_channel",
    "finalize_power", "rates_case1", "rates_case2", "saddle_point", "sample_channel",
    "solve_beam", "solve_fixed_phase", "steering_vector", "tdma_sum_rate",
]
