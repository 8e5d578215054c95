"""Truncation bounds for Poisson's equation on countable Markov chains."""

from ._core import *  # noqa: F401,F403
from ._core import __version__, oracle  # noqa: F401

MODELS = ("slotted_queue", "two_mm1", "jackson", "explicit")
