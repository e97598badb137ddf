"""Reinforcement-learned desire selection over reified episodic knowledge graphs."""

__version__ = "0.1.0"
