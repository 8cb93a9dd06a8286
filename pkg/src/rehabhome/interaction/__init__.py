from .gaze import Fixation, ObjectBox, blinks_from_gaze, confirm_selection, detect_fixation, map_fixation_to_object
from .voice import Intent, NoMatch, parse_voice_command
from .dispatch import ActionStateRouter, DeliveryReceipt, IntentArbiter

__all__ = [
    "Fixation",
    "ObjectBox",
    "blinks_from_gaze",
    "confirm_selection",
    "detect_fixation",
    "map_fixation_to_object",
    "Intent",
    "NoMatch",
    "parse_voice_command",
    "ActionStateRouter",
    "DeliveryReceipt",
    "IntentArbiter",
]
