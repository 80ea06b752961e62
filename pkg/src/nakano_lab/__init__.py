"""Numerical checks of Nakano positivity for L2 metrics on direct images.

The objects are split bundles ``E`` over P1 or P1xP1, the weight of
``O_{P(E)}(k + r)``, and the L2 metric it induces on ``S^k E (x) det E``.
"""

__version__ = "0.1.0"
