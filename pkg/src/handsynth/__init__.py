"""handsynth: procedural synthesis of labeled dynamic hand-gesture
recordings (RGB, depth, infrared) plus a DTW-based evaluation kit."""

__version__ = "0.1.0"
