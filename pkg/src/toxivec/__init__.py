"""toxivec: imageboard corpora -> CBOW embeddings -> similarity queries
and toxic-lexicon bootstrapping."""

__version__ = "0.1.0"

from .errors import (DataFormatError, OOVError, ResourceError, ToxivecError,
                     TrainingDivergedError, UsageError)
from .ingest import (ArchiveCursor, ParseStats, Platform, RawPost,
                     fetch_archive_pages, parse_4plebs_csv,
                     parse_foolfuuka_json, parse_jsonl)
from .lexicon import (CandidateTerm, Lexicon, LexiconEntry, expand_by_neighbors,
                      load_lexicon, review_merge, save_lexicon, scan_external)
from .model_io import (EmbeddingModel, load_binary, load_text, save_binary,
                       save_text)
from .normalize import (normalize_post, normalize_text, read_corpus,
                        remove_platform_metadata, remove_urls, strip_markup,
                        tokenize, write_corpus)
from .query import Neighbor, cosine, most_similar, nearest_to_vector
from .trainer import (ModelParameters, TrainConfig, TrainResult, cbow_step,
                      init_parameters, ns_loss, ns_loss_gradients, train)
from .vocab import (NegativeSamplingTable, Vocabulary, build_ns_table,
                    build_vocabulary, keep_probability)

__all__ = [name for name in dir() if not name.startswith("_")]
