"""Experiment harness: corpus, pipeline runner, sweeps, CSV export."""

from .config import ConfigError, load_config, parse_config
from .corpus import (CorpusError, CorpusImage, downscale, load_corpus, save_png, synth_image,
                     write_synthetic_corpus)
from .pipeline import PSNR_CAP, VARIANTS, Models, PipelineError, RunRecord, psnr, run_pipeline
from .sweep import (CSV_HEADER, SUMMARY_HEADER, ExperimentConfig, SummaryRow, eavesdrop_run, export_csv,
                    export_summary, mean_psnr, point_seeds, read_csv, summarize, sweep)
from .training import make_sr_pairs, train_codec_model, train_sr_model

__all__ = [
    "CSV_HEADER", "ConfigError", "CorpusError", "CorpusImage", "ExperimentConfig", "Models", "PSNR_CAP",
    "PipelineError", "RunRecord", "SUMMARY_HEADER", "SummaryRow", "VARIANTS", "downscale",
    "eavesdrop_run", "export_csv", "export_summary", "load_config", "load_corpus", "make_sr_pairs",
    "mean_psnr", "parse_config", "point_seeds", "psnr", "read_csv", "run_pipeline", "save_png",
    "summarize", "sweep", "synth_image", "train_codec_model", "train_sr_model", "write_synthetic_corpus",
]
