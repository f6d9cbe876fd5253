"""Multi-agent hybrid-action actor-critic engine with a particle-world testbed."""

__version__ = "0.1.0"
