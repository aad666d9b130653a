"""robostudio: conversational robot-task programming studio backend."""

__version__ = "0.1.0"
