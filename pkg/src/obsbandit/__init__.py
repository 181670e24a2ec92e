"""Greedy policies for contextual bandits with imperfectly observed contexts."""
