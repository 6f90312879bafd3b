"""Word confidence and deletion prediction for ASR-style hypotheses.

Pipeline: simulate -> align -> calibrate -> featurize/train -> evaluate -> select.
"""

__version__ = "0.1.0"
