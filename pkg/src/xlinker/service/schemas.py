"""Pydantic request/response models for the pipeline service."""
from __future__ import annotations

from pydantic import BaseModel, Field


class ErrorBody(BaseModel):
    code: str  # config | data | numeric
    message: str


class SynthParams(BaseModel):
    n_entities: int = 200
    n_mentions: int = 1000
    languages: list[str] = ["xx"]
    nil_rate: float = 0.2
    zipf_exponent: float = 1.1
    name_noise: float = 0.1
    context_informativeness: float = 0.5
    seed: int = 0
    name_ambiguity: float = 0.0
    partial_rate: float = 0.15
    alias_pollution: float = 0.1
    doc_size: int = 25


class SynthRequest(BaseModel):
    out_dir: str
    config: SynthParams = Field(default_factory=SynthParams)
    n_name_pairs: int = 0  # per language; 0 skips pair files


class SynthResponse(BaseModel):
    kb_path: str
    mention_paths: dict[str, str]
    anchors_path: str
    name_pair_paths: dict[str, str]
    manifest_path: str


class IngestRequest(BaseModel):
    mentions_path: str
    kb_path: str
    out_path: str


class IngestResponse(BaseModel):
    out_path: str
    n_mentions: int
    n_documents: int
    n_nil: int
    manifest_path: str


class TriageParams(BaseModel):
    k: int = 10
    l: int = 200
    normalize: bool = True


class BuildPriorRequest(BaseModel):
    anchors_path: str
    out_path: str
    triage: TriageParams = Field(default_factory=TriageParams)


class BuildPriorResponse(BaseModel):
    out_path: str
    n_surfaces: int
    manifest_path: str


class TriageRequest(BaseModel):
    mentions_path: str
    kb_path: str
    prior_path: str
    out_path: str
    triage: TriageParams = Field(default_factory=TriageParams)
    expand: bool = False  # two-step KB expansion (title -> entity fallback)


class TriageResponse(BaseModel):
    out_path: str
    recall: float
    mean_candidates: float
    manifest_path: str


class EncodeTestRequest(BaseModel):
    mentions_path: str
    kb_path: str
    out_path: str
    dim: int = 64
    seed: int = 7


class EncodeTestResponse(BaseModel):
    out_path: str
    dim: int
    n_records: int
    manifest_path: str


class LayerParams(BaseModel):
    name: list[int] = [512]
    context: list[int] = [512]
    type: list[int] = [64]
    final: list[int] = [512, 256]


class AuxParams(BaseModel):
    pairs_path: str
    subset_k: int = 50000
    n_negatives: int = 9


class TrainParams(BaseModel):
    lr: float = 1e-4
    epochs: int = 250
    dropout: float = 0.2
    margin: float = 0.5
    n_negatives: int = 9
    batch_size: int = 32
    layers: LayerParams = Field(default_factory=LayerParams)
    seed: int = 0


class TrainRequest(BaseModel):
    mentions_path: str
    kb_path: str
    candidates_path: str
    store_path: str
    out_checkpoint: str
    out_trace: str | None = None
    train: TrainParams = Field(default_factory=TrainParams)
    mask: str = "name,context,type"
    aux: AuxParams | None = None
    encoder_seed: int = 7  # test-encoder seed used for aux pair names
    vocab_min_count: int = 100


class TrainResponse(BaseModel):
    checkpoint_path: str
    trace_path: str | None
    n_trainable: int
    first_loss: float
    final_loss: float
    manifest_path: str


class RerankParams(BaseModel):
    kind: str = "none"  # none | popularity
    popularity_from: str | None = None  # mentions JSONL counted for the table
    top_n: int = 10


class PredictRequest(BaseModel):
    mentions_path: str
    kb_path: str
    candidates_path: str
    store_path: str
    checkpoint_path: str
    out_path: str
    threshold: float = -1.0
    rerank: RerankParams = Field(default_factory=RerankParams)


class PredictResponse(BaseModel):
    out_path: str
    n_mentions: int
    n_nil: int
    manifest_path: str


class EvaluateRequest(BaseModel):
    predictions_path: str
    mentions_path: str
    kb_path: str
    out_path: str | None = None


class EvaluateResponse(BaseModel):
    micro_avg: float
    precision: float
    recall: float
    f1: float
    counts: dict[str, int]
    table: str
    out_path: str | None
    manifest_path: str | None


class ReductionParams(BaseModel):
    kind: str = "none"
    fraction: float | None = None
    cap: int | None = None


class RerankSpecParams(BaseModel):
    kind: str = "none"
    source: str = "train"
    top_n: int = 10


class ExperimentSpecParams(BaseModel):
    name: str
    train_languages: list[str]
    eval_languages: list[str]
    mask: str = "name,context,type"
    reduction: ReductionParams = Field(default_factory=ReductionParams)
    aux_language: str | None = None
    aux_pairs_path: str | None = None
    rerank: RerankSpecParams = Field(default_factory=RerankSpecParams)
    threshold: float = -1.0
    seeds: list[int] = [0, 1, 2]


class RegistryParams(BaseModel):
    dim: int = 64
    encoder_seed: int = 7
    dev_fraction: float = 0.2
    split_seed: int = 13
    vocab_min_count: int = 0
    n_name_pairs: int = 2000
    triage: TriageParams = Field(default_factory=TriageParams)


class ExperimentRequest(BaseModel):
    out_dir: str
    synth: SynthParams = Field(default_factory=SynthParams)
    registry: RegistryParams = Field(default_factory=RegistryParams)
    train: TrainParams = Field(default_factory=TrainParams)
    specs: list[ExperimentSpecParams]


class ExperimentResponse(BaseModel):
    csv_path: str
    markdown_path: str
    f1_matrix: dict[str, dict[str, float]]
    means: dict[str, dict[str, dict[str, float]]]  # spec -> label -> metric
    manifest_path: str


class MentionIn(BaseModel):
    id: str = "adhoc-0"
    doc_id: str = "adhoc"
    language: str = "xx"
    surface: str
    sentence: str
    context_window: list[str] = []
    mention_type: str = "PER"


class LinkRequest(BaseModel):
    kb_path: str
    prior_path: str
    checkpoint_path: str
    mention: MentionIn
    k: int = 10
    threshold: float = -1.0


class RankedEntity(BaseModel):
    entity_id: str
    name: str
    score: float
    prior: float


class LinkResponse(BaseModel):
    predicted: str  # entity id or NIL
    score: float
    ranked: list[RankedEntity]


class HealthResponse(BaseModel):
    status: str
    version: str
