"""Smart-home sensor simulation and multi-scale behavioural anomaly detection.

The package has two halves that share one preprocessing layer:

* a deterministic simulator of a single elderly resident in a studio
  apartment instrumented with binary ambient sensors (infrared motion,
  pressure, door, water-flow and power sensors), including six injectable
  behaviour anomalies, and
* a detection toolkit (statistical thresholds, decision tree, random
  forest, dynamic naive Bayes and hidden Markov sequence models) scored
  with interval-level sensitivity / false-alarm metrics.
"""

__version__ = "0.1.0"
