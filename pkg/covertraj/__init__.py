"""Greedy trajectory-set construction, kinematic rollouts and set-classification metrics"""

__version__ = "1.0.0"
