"""Restaurant-level foodborne illness surveillance from search and visit logs.

The package turns anonymized query and visit streams into ranked restaurant
inspection lists: a weakly supervised query classifier flags likely
foodborne-illness searches, an incubation-window join attributes them to
recently visited restaurants, and per-restaurant evidence is released under
differential privacy. A deterministic synthetic city provides ground truth,
and the stats module carries the full evaluation harness (fixed-effect
logistic regressions, adjusted means, chi-square, attribution histograms).
"""

__version__ = "0.1.0"
