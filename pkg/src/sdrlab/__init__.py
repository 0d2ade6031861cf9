"""Cloud SDR testbed orchestrator.

Schedules users onto a shared pool of software-defined radios, compute
nodes, and network ports; multiplexes independent baseband signals into
shared spectrum blocks; emulates RF channels from node geometry; and
archives experiment measurements with configuration snapshots.
"""

__version__ = "0.1.0"
