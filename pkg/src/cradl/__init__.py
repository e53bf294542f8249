"""Coded robust aggregation for Byzantine-robust decentralized learning.

Submodules:

``problem``      synthetic linear regression data, losses and gradients
``allocation``   device-to-subset allocation matrices
``coding``       coded gradients sent by honest devices
``aggregation``  robust bounded aggregation rules and their constants
``adversary``    Byzantine identities and attack vectors
``trainer``      the training loop for CRA-DL and its baselines
``theory``       convergence constants and numerical bound checks
``harness``      configuration files, sweeps, CSV output and the CLI
"""

__version__ = "0.1.0"
