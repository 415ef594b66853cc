"""Two computational-performance systems behind one package.

The corpus pipeline turns muscle biosignals (EMG voltage, MMG vibration)
into movement descriptors, identifies the parameters of a damped
second-order regime online, learns nuance mappings from operator
demonstrations, and drives a feedback network of twenty oscillators. The
ritual pipeline runs an episodic learning agent over a ten-digit target and
renders its inner behavior as deterministic music/light event streams.
"""

__version__ = "0.1.0"
