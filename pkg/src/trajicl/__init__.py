"""trajicl: a desk-scale lab for in-context imitation learning.

Bursty multi-trajectory sequence construction, a from-scratch causal
transformer trained to predict expert actions, procedurally generated
gridworld task families, and a few-shot evaluation harness with hashmap
and behavioral-cloning baselines.
"""

__version__ = "0.1.0"
