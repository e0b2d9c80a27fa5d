"""statusarena: an agent-based simulator of status signaling.

Agents with persistent memories trade in a call-auction marketplace, meet in
daily first-date dyads where possessions are visible, and face procedurally
generated signaling scenarios. An analytics layer turns the run logs into
demand shares, price series, elasticity estimates, and cross-condition
statistics.
"""

__version__ = "0.1.0"
