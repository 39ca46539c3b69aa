"""Triadic gaze analysis: target inference, event streams, gaze components,
annotation agreement, statistics and a seeded session simulator."""

from .components import ComponentEvent, JointAttentionEpisode, classify, detect_joint_attention
from .events import GazeEvent, SessionRecord, compress, expand
from .geometry import SceneLayout, default_scene, infer_target
from .sim import AgentParams, ProtocolScript, generate_cohort, simulate

__version__ = "0.1.0"

__all__ = [
    "AgentParams",
    "ComponentEvent",
    "GazeEvent",
    "JointAttentionEpisode",
    "ProtocolScript",
    "SceneLayout",
    "SessionRecord",
    "classify",
    "compress",
    "default_scene",
    "detect_joint_attention",
    "expand",
    "generate_cohort",
    "infer_target",
    "simulate",
]
