"""aggrest: testing-based estimate aggregation over unions of convex sets.

Subpackages/modules:

* ``geometry``     -- convex compact sets, seminorms, projection/distance oracles
* ``schemes``      -- Gaussian / Poisson / Discrete observation schemes
* ``detectors``    -- optimal pair detectors and the simple two-hypothesis test
* ``colors``       -- union-vs-union (blue/red) inference
* ``adaptive``     -- adaptive estimation over unions of convex sets
* ``aggregation``  -- generic test-based point aggregation
* ``bounds``       -- separation risks, SDP upper bounds, MC lower bounds
* ``experiment``   -- single-index study and MC risk harness
"""

__version__ = "0.1.0"
