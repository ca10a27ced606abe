"""docfunnel: transparent search and in-document QA for long documents.

Block 1 retrieves documents with ontology-expanded BM25 over fielded
indexes; Block 2 answers questions inside one document with a hybrid
sparse + multihop dense pipeline. Every stage exposes its intermediate
result as a trace event.
"""

from .analysis import AnalyzerConfig, analyze
from .corpus import Chunk, ChunkPolicy, Corpus, Document, Section, chunk_document, ingest_document, load_corpus_file
from .docqa import AnswerBundle, QAConfig, answer_question, build_chunk_index
from .embed import Embedder, EmbedderConfig, cosine_similarity, embed_text, remote_embed
from .evaluation import StorageParams, estimate_storage, evaluate_run, ndcg_at_k
from .expansion import Ontology, build_query_plan, expand_entity, extract_entities, load_ontology, load_verb_lexicon
from .plan import QueryPlan, Variation, VariationGroup
from .service import Engine, ServiceConfig, create_app
from .sparse import IndexSet, ScoredDoc, bm25_score, build_index, execute_query_plan, load_index, save_index
from .trace import Trace, TraceEvent

__version__ = "0.1.0"
