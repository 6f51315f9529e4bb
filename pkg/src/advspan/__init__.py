"""advspan: black-box adversarial robustness evaluation for span-based
machine comprehension.

The toolkit perturbs contexts at the character, word, and sentence level
while protecting answer spans, queries span-prediction models over a
small HTTP/JSON protocol, scores answers (EM / token F1 / normalized-
entropy confidence), ensembles runs, finds important words by
leave-one-out ablation, and trains an error-prediction classifier over
explanatory features.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    AnswerSpan, Article, Dataset, OffsetMap, Paragraph, PerturbationMeta,
    QA, parse_dataset, remap_answers, serialize_dataset, validate_dataset,
)
from .confusables import (  # noqa: F401
    ConfusableTable, detect_homoglyphs, load_default_table, parse_confusables,
)
from .embeddings import EmbeddingStore, load_embeddings, nearest_neighbor  # noqa: F401
from .perturb import (  # noqa: F401
    DatasetPerturber, PerturbationResources, PerturbationSpec, ProtectedRegions,
    apply_paraphrases, make_variant, perturb_chars, perturb_words,
)
from .model_client import (  # noqa: F401
    FullDistribution, MockModelConfig, MockServer, ModelRequest, ModelResponse,
    TopOnlyDistribution, http_predictor, mock_predict, mock_predictor, predict,
)
from .eval import (  # noqa: F401
    ConfidenceInputs, EvalRecord, confidence, confidence_flat, ensemble_answer,
    evaluate_dataset, exact_match, f1_score, normalize_answer,
)
from .attack import (  # noqa: F401
    ConstraintSpec, ImportanceScore, apply_strategic_paraphrases,
    importance_scores, top_k_constraints,
)
from .analysis import (  # noqa: F401
    CvReport, FeatureVector, GbdtClassifier, build_features, cross_validate,
    flesch_kincaid, human_agreement, question_type, report_tables,
)
