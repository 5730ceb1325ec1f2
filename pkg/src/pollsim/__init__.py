"""pollsim: massive-population election simulation.

Pipeline stages: corpus cleaning -> demographic annotation -> per-state
joint-distribution fitting -> persona sampling -> interview simulation ->
metric evaluation, plus an HTTP service for interactive exploration.
"""

__version__ = "0.1.0"
