"""revrl: reversibility-aware reinforcement learning.

Learns the temporal order of observations in a self-supervised way,
converts it into per-action reversibility estimates, and uses those to
shape exploration rewards or to veto irreversible actions. An exact
tabular oracle grounds the learned estimators on small MDPs.
"""

__version__ = "0.1.0"
