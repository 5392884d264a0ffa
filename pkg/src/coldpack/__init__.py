"""Hybrid recommender for short-lived golf booking packages.

Blends three per-package similarities to a user's history: price relative to a
seasonally chosen reference package, option preferences learned per behavior
segment, and course co-occurrence across users.
"""

__version__ = "0.1.0"
