"""Link-level Monte Carlo simulator for unsourced random access over
doubly-dispersive channels with OTFS signalling in the delay-Doppler domain.

Subpackages by pipeline stage:

* :mod:`otfsura.zak` - discrete Zak transforms, cyclic prefixes and
  delay-Doppler shift operators;
* :mod:`otfsura.channel` - the multiuser multipath channel;
* :mod:`otfsura.codec` - CRC, CRC-aided polar SCL, QPSK, seeded interleaver;
* :mod:`otfsura.txchain` - per-user frame assembly and the shared codebook;
* :mod:`otfsura.csamp` - AMP joint activity detection / channel estimation;
* :mod:`otfsura.rxdata` - MRC combining, SCL decoding and hard SIC;
* :mod:`otfsura.harness` - reproducible Monte Carlo sweeps and persistence.
"""

from .config import AmpParams, PolarConfig, SystemConfig

__version__ = "0.1.0"

__all__ = ["AmpParams", "PolarConfig", "SystemConfig", "__version__"]
