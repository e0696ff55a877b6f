"""cvdistill: continuous-variable entanglement distillation numerics.

Layered design:

* :mod:`cvdistill.gaussian` — covariance-matrix states, symplectic maps,
  measurement filters, two-mode entanglement diagnostics;
* :mod:`cvdistill.fock` — truncated Fock-space brute-force oracle;
* :mod:`cvdistill.protocols` — characteristic-function protocol engine
  (recursive / pumping / compact distillery) and convergence diagnostics;
* :mod:`cvdistill.channels` — Gaussian CP maps as Schur complements of
  Choi block matrices, the loss/thermal fiber channel, filter inversion;
* :mod:`cvdistill.repeater` — the (C, S) repeater pipeline and
  maximum-distance sweeps;
* :mod:`cvdistill.cli` — batch command-line front end.
"""

from . import channels, cli, fock, gaussian, protocols, repeater  # noqa: F401

__version__ = "0.1.0"
