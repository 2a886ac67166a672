"""Learn symbolic household activities with a text-conditioned actor-critic and measure policy transfer."""

__version__ = "0.1.0"
