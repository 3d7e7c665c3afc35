from .campaign import CampaignConfig, CampaignResult, TraceRecord, run_campaign, read_trace, write_trace
from .protocols import (
    BS_DIFFERENTIAL,
    BS_DIRECT,
    GENIE,
    GOB,
    NO_TRACKING,
    PROTOCOLS,
    UE_DIFFERENTIAL,
    UE_DIRECT,
    TrackingState,
    step_bs_differential,
    step_bs_direct,
    step_gob_baseline,
    step_ue_differential,
    step_ue_direct,
)
from .quantizer import RatioCodebook, dequantize, lloyd_train, quantize, uniform_codebook
from .schedule import FrameSchedule
