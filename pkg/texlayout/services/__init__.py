# texlayout/services/__init__.py
"""
This package contains the service layer of the annotation pipeline.

The service layer holds all of the labeling logic. Commands in the
`texlayout.pipeline` and `texlayout.evaluation` blueprints only parse their
arguments, turn the Flask configuration into a `PipelineSettings` and call
into the services here; the data types they exchange live in
`texlayout.models`.

Each module corresponds to one stage or functional area: loading and
cleaning sources (`ingest_service.py`, `preprocess_service.py`), cutting
the body into units (`segment_service.py`), labels and relations
(`annotate_service.py`), rendering and box extraction (`render_service.py`,
`bbox_service.py`), grading (`quality_service.py`), the per-document record
(`genome_service.py`), batches (`batch_service.py`), dataset exports
(`export_service.py`) and downstream scoring (`metrics_service.py`).
"""

# Explicit imports from the specific service modules (e.g.
# `from texlayout.services.genome_service import run_pipeline`) are preferred
# over re-exporting names here.
