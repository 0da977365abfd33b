from dimsim.baselines.signals import (
    AdaptiveController,
    AdaptiveSignal,
    FixedTimeController,
    OversaturatedError,
    SignalPlan,
    WebsterInputs,
    ats_controller,
    fts_controller,
    published_plan,
    webster_plan,
)
from dimsim.baselines.v2i import Reservation, Request, V2ICController, v2ic_coordinate

__all__ = [
    "AdaptiveController", "AdaptiveSignal", "FixedTimeController", "OversaturatedError",
    "SignalPlan", "WebsterInputs", "ats_controller", "fts_controller", "published_plan",
    "webster_plan", "Reservation", "Request", "V2ICController", "v2ic_coordinate",
]
