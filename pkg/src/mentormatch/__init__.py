"""Mentor-student pair and study-group allocation by mixed-integer programming."""

__version__ = "0.1.0"
