"""drillmae: masked-autoencoder pretraining and supervised baselines for
downhole regression on multivariate drilling telemetry.

Pipeline: ingest per-well telemetry -> isolate sustained drilling
segments -> normalized stride-1 windows with scalar labels -> recurrent
MAE pretraining, frozen-encoder transfer, supervised baselines -> full
factorial design-space search with ranking/correlation reports.
"""

__version__ = "0.1.0"
