"""LoRa channel-hopping toolkit: exact scheduling, trace-driven simulation,
an on-device channel predictor, and a soil/plant rating recommender."""

__version__ = "0.1.0"
