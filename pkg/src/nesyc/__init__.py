"""Neuro-symbolic continual learner for embodied household tasks.

Rule knowledge is induced from interaction traces by a scored
generate-and-select loop, used by a breadth-first planner, and refined
online whenever execution contradicts it.
"""
from .domain import HOUSEHOLD, GeneralizedKnowledge, knowledge_f1, rule_delta
from .lptext import parse, print_program
from .planner import Planner, plan
from .reformulation import ExperienceSet, ReformulationConfig, Transition, reformulate
from .scoring import ScoringParams, hi, score

__version__ = "0.1.0"

__all__ = [
    "HOUSEHOLD", "GeneralizedKnowledge", "knowledge_f1", "rule_delta", "parse", "print_program",
    "Planner", "plan", "ExperienceSet", "ReformulationConfig", "Transition", "reformulate",
    "ScoringParams", "hi", "score", "__version__",
]
