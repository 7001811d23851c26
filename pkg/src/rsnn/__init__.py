"""Event-driven spiking networks with reward-modulated STDP for three-level object categorisation."""

__version__ = "0.1.0"
