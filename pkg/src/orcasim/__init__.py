"""orcasim -- simulator and analysis toolkit for a telecom-band ladder
quantum memory in hot rubidium vapour.

Subpackages by concern:

* :mod:`orcasim.physics` -- atomic scheme, thermal ensemble, spin-wave
  geometry and motional dephasing,
* :mod:`orcasim.pulses` -- control/signal pulse envelopes,
* :mod:`orcasim.solver` -- velocity-resolved storage/retrieval solver,
* :mod:`orcasim.experiment` -- pulse sequences, parameter sweeps, noise,
* :mod:`orcasim.detection` -- photon-counting synthesis and reduction,
* :mod:`orcasim.metrics` -- derived figures of merit,
* :mod:`orcasim.optimizer` -- control-pulse and ratio optimization,
* :mod:`orcasim.cli` -- command-line front end.
"""

__version__ = "0.1.0"
