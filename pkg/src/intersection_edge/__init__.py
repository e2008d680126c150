"""Smart-intersection edge node: scene synthesis, tracking, analytics and radar-screen broadcast."""

__version__ = "0.1.0"
