"""DDC/DTC slot layout."""

from __future__ import annotations

from dataclasses import dataclass

PERIODIC = "periodic"
APERIODIC = "aperiodic"


@dataclass(frozen=True)
class FrameSchedule:
    """``T`` tracking slots close every period of ``T_d`` slots.

    In aperiodic mode ``T_d`` is the longest allowed gap; a trigger can
    request a tracking slot earlier.
    """

    t_tot: int
    t_d: int
    t: int = 1
    mode: str = PERIODIC

    def __post_init__(self):
        if self.t_tot < 1:
            raise ValueError("T_tot must be positive")
        if not 1 <= self.t <= self.t_d:
            raise ValueError("need 1 <= T <= T_d")
        if self.mode not in (PERIODIC, APERIODIC):
            raise ValueError(f"unknown schedule mode {self.mode!r}")

    @property
    def overhead(self) -> float:
        return self.t / self.t_d

    def is_dtc(self, slot: int) -> bool:
        return slot % self.t_d >= self.t_d - self.t

    def dtc_slots(self) -> list[int]:
        return [s for s in range(self.t_tot) if self.is_dtc(s)]

    def due(self, slot: int, last_dtc: int, triggered: bool = False) -> bool:
        """Whether ``slot`` carries tracking beams, given the previous tracking slot."""
        if self.mode == PERIODIC:
            return self.is_dtc(slot)
        return triggered or slot - last_dtc >= self.t_d
