"""All-electric APU co-simulation: single-shaft turboshaft gas generator and
wound-rotor synchronous starter/generator, coupled multi-rate, with gas-path
and stator turn-to-turn fault injection."""

__version__ = "0.1.0"
