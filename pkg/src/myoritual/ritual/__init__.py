"""Episodic learning agent whose behavior drives music/light event streams."""
from .agent import (AgentState, CrossEntropyAgent, EpisodeSummary, RitualEnv,
                    RitualTarget, random_search_best, run_episode)
from .mapping import AVDirective, DirectiveConfig, ProximityReport, direct, proximity
from .patterns import LightShape, NoteEvent, Pattern, PatternBank, default_bank
from .scheduler import ClockError, UdpMirror, schedule

__all__ = [
    "AgentState", "CrossEntropyAgent", "EpisodeSummary", "RitualEnv",
    "RitualTarget", "random_search_best", "run_episode",
    "AVDirective", "DirectiveConfig", "ProximityReport", "direct", "proximity",
    "LightShape", "NoteEvent", "Pattern", "PatternBank", "default_bank",
    "ClockError", "UdpMirror", "schedule",
]
