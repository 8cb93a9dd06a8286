"""Rule-based reference policy: the always-available decision backend.

Three scenario rules with configurable thresholds (defaults calibrated to
fire on the bundled exertion/fall/evening scripts and stay silent on
quiescent windows):

  1. exertion during walking: heart rate above the personalized threshold,
     HRV depressed, and skin temperature rising -> pause training, hydration
     reminder, air conditioning on;
  2. fall trigger: immediate check-in query, then a caregiver alert only if
     the follow-up finds the patient unresponsive;
  3. low evening light: lamp on.

Every decision this policy emits must pass the safety layer (closure
property, enforced by test).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .context import ContextWindow
from .safety import AgentDecision, Intervention


@dataclass
class AgentThresholds:
    hr_above_rest: float = 40.0  # bpm above resting rate
    hrv_below_ms: float = 30.0
    temp_slope_per_min: float = 0.05  # degrees C per minute over the window
    light_below_lux: float = 50.0
    evening_start_s: float = 18 * 3600.0
    fall_response_window_s: float = 30.0


@dataclass
class DeviceBindings:
    """Registry devices the agent may command (string ids as used in decisions)."""

    ac_device: Optional[str] = None
    lamp_device: Optional[str] = None


@dataclass
class FallTrigger:
    ts_ms: float
    responded: Optional[bool] = None  # None: just fell; True/False: follow-up outcome


def _temp_slope(context: ContextWindow) -> Optional[float]:
    points = [(i, m.temp_mean) for i, m in enumerate(context.minutes) if m.temp_mean is not None]
    if len(points) < 2:
        return None
    n = len(points)
    mean_x = sum(p[0] for p in points) / n
    mean_y = sum(p[1] for p in points) / n
    sxx = sum((p[0] - mean_x) ** 2 for p in points)
    if sxx == 0:
        return None
    sxy = sum((p[0] - mean_x) * (p[1] - mean_y) for p in points)
    return sxy / sxx  # degrees per minute (slots are 1 minute apart)


def decide_rule_based(
    context: ContextWindow,
    trigger: Optional[FallTrigger] = None,
    thresholds: Optional[AgentThresholds] = None,
    bindings: Optional[DeviceBindings] = None,
    resting_hr: float = 70.0,
) -> AgentDecision:
    th = thresholds or AgentThresholds()
    bind = bindings or DeviceBindings()

    if trigger is not None:
        if trigger.responded is None:
            return AgentDecision(
                interventions=[Intervention(kind="reminder", text="Fall detected. Are you okay? Please respond.")],
                rationale="fall trigger: immediate check-in",
            )
        if trigger.responded:
            return AgentDecision(
                interventions=[Intervention(kind="none")],
                rationale="fall follow-up: patient responded, no escalation",
            )
        return AgentDecision(
            interventions=[
                Intervention(
                    kind="caregiver_alert",
                    text="Patient fell and is unresponsive to the check-in query.",
                    params={"channel": "caregiver_app"},
                )
            ],
            rationale="fall follow-up: no response within the window",
        )

    interventions: List[Intervention] = []
    latest = context.latest

    exerting = (
        latest.hr_mean is not None
        and latest.hrv_mean is not None
        and latest.hr_mean > resting_hr + th.hr_above_rest
        and latest.hrv_mean < th.hrv_below_ms
        and latest.activity == "walking"
    )
    slope = _temp_slope(context)
    if exerting and slope is not None and slope > th.temp_slope_per_min:
        interventions.append(Intervention(kind="pause_training", text="Pausing gait training: signs of overexertion."))
        interventions.append(Intervention(kind="reminder", text="Please take a break and drink some water."))
        if bind.ac_device:
            interventions.append(
                Intervention(kind="device_command", device=bind.ac_device, action="toggle_ac", params={"power": "on"})
            )

    evening = context.clock_s is not None and context.clock_s >= th.evening_start_s
    if evening and latest.light_mean is not None and latest.light_mean < th.light_below_lux and bind.lamp_device:
        interventions.append(
            Intervention(kind="device_command", device=bind.lamp_device, action="toggle_light", params={"power": "on"})
        )

    if not interventions:
        return AgentDecision(interventions=[Intervention(kind="none")], rationale="no rule fired")
    return AgentDecision(interventions=interventions, rationale="rule-based policy")
