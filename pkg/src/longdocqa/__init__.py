"""Batch pipeline that turns long PDFs into a validated QA dataset and
evaluates candidate models over context/evidence buckets."""

__version__ = "0.1.0"
