"""Nonverbal behavior analysis for recorded child-computer conversations.

Frame-wise head pose, action-unit and gaze signals go in; nod, smile and
off-screen gaze events, annotator agreement, percent-of-time measures,
part-wise statistics and group classification come out.
"""
__version__ = "0.1.0"
