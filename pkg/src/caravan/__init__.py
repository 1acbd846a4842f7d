"""Caravan parking on the circle, its bridge encoding and additive-coalescent limits."""
from .model import ArcSet, CaravanInstance, GridPath, JumpDriftPath, Profile, ThetaSequence

__all__ = ["ArcSet", "CaravanInstance", "GridPath", "JumpDriftPath", "Profile", "ThetaSequence"]
