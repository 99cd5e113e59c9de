"""Maximum-classifier-discrepancy active learning at desk scale.

A small MLP with one main and several auxiliary classification heads is
trained so the auxiliary heads maximally disagree on unlabeled data (while
never influencing the backbone); unlabeled samples whose head disagreement
deviates most from the labeled pool's average are sent to the labeling
oracle. The experiment module benchmarks this acquisition strategy against
random/entropy/margin baselines over a growing labeling budget.
"""

__version__ = "0.1.0"

from . import backend
from .numeric import Rng

__all__ = ["backend", "Rng", "__version__"]
