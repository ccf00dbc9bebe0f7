"""High-precision numerical verification of basic hypergeometric identities.

Modules, bottom up: :mod:`mpreal` (precision contexts, Gamma), :mod:`qcore`
(q-Pochhammer symbols), :mod:`hyper` (series summation), :mod:`abel`
(summation by parts), :mod:`identities` (the registry), :mod:`proofs`,
:mod:`limits` (q -> 1) and :mod:`cli`.
"""

__version__ = "0.1.0"
