"""telegate: simulator and analysis toolkit for teleportation-based nonlocal
two-qubit gates between two fiber-linked network nodes.

Modules:
    qsim      dense state engine (gates, channels, measurement, fidelity)
    photon    dual-DOF photon bookkeeping and the entangled-pair source
    teleport  gate-teleportation branch logic and corrections
    netsim    channels, memory timing, multiplexing, losses, rates
    algo      Deutsch-Jozsa and iterative phase estimation
    analysis  truth tables, witnesses, error bars, reference regression
    afcpulse  comb-preparation waveform synthesis and verification
    cli       command-line front end (see ``telegate --help``)
"""

__version__ = "0.1.0"
