"""Exception hierarchy shared across the pipeline."""


class LongDocQaError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(LongDocQaError):
    """Invalid or unparseable run configuration; names the offending keys."""


# --- corpus ingestion ---------------------------------------------------


class MalformedDocument(LongDocQaError):
    """PDF could not be parsed."""


class EmptyDocument(LongDocQaError):
    """PDF parsed but contains zero pages."""


class InvalidChunkParams(LongDocQaError):
    """overlap >= chunk_size or chunk_size < 1."""


class InvalidDpi(LongDocQaError):
    """Rasterization dpi outside [72, 600]."""


class RasterizationFailure(LongDocQaError):
    """A single page failed to rasterize."""

    def __init__(self, doc_id: str, page_index: int, message: str):
        super().__init__(f"{doc_id} page {page_index}: {message}")
        self.doc_id = doc_id
        self.page_index = page_index


# --- providers / gateway ------------------------------------------------


class ProviderUnavailable(LongDocQaError):
    """Transient provider failures exhausted the retry budget."""


class ProviderRefused(LongDocQaError):
    """Non-retryable provider error (auth, permanent 4xx, explicit refusal)."""


class SchemaViolation(LongDocQaError):
    """Structured output (or a dataset line) failed schema validation."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IoFailure(LongDocQaError):
    """Filesystem read/write failed."""


# --- perception ---------------------------------------------------------


class ContextMismatch(LongDocQaError):
    """Chunk context inputs do not cover exactly the chunk's page range."""


class MalformedRegion(LongDocQaError):
    """Layout provider emitted an out-of-bounds or malformed region."""


# --- agent chain --------------------------------------------------------


class GenerationEmpty(LongDocQaError):
    """Question generation returned zero usable drafts after repair."""


class AllFiltered(LongDocQaError):
    """Every draft was removed by the question filter."""


class AnswerCountMismatch(LongDocQaError):
    """Answering agent did not cover every draft, even after repair."""


class EmptyQuestionSet(LongDocQaError):
    """Assessment invoked with zero questions."""


class ChainExhausted(LongDocQaError):
    """Every iteration of the agent chain failed to produce usable drafts."""

    def __init__(self, message: str, partial: list | None = None):
        super().__init__(message)
        self.partial = partial or []
