"""Batch evaluation harness: ingestion, configuration, pipeline, reports and CLI."""
from .config import ConfigError, PipelineConfig, available_presets, build_config, load_preset
from .ingest import IngestError, ParseError, SchemaError, ingest, manifest, read_recording
from .pipeline import RunResult, recording_seed, run_pipeline
from .report import ReportRow, UtilityCell, emit_report, load_report

__all__ = [
    "ConfigError", "PipelineConfig", "available_presets", "build_config", "load_preset",
    "IngestError", "ParseError", "SchemaError", "ingest", "manifest", "read_recording",
    "RunResult", "recording_seed", "run_pipeline",
    "ReportRow", "UtilityCell", "emit_report", "load_report",
]
