"""Pipeline stages: ingest, bagging, hardness metrics, clustering, model and harness."""
