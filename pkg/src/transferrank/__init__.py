"""transferrank: predict good transfer languages for low-resource NLP tasks.

The package ranks candidate transfer languages for a task language by
extracting corpus-statistics and typological-distance features per language
pair and training a gradient-boosted-tree ranker with LambdaRank gradients.
"""

from .bpe import END_OF_WORD, SubwordVocabulary, learn_bpe, segment_word
from .corpus import Corpus, load_corpus, load_gazetteer
from .dataset import (
    DATASET_FEATURE_NAMES,
    FEATURE_NAMES,
    TYPOLOGY_FEATURE_NAMES,
    Candidate,
    FeatureRow,
    RankingDataset,
    RankingGroup,
    join_features_and_scores,
    load_feature_table,
    load_gold_scores,
    load_ranking_dataset,
    make_group,
    save_feature_table,
    save_gold_scores,
    save_ranking_dataset,
)
from .errors import DataError, SchemaError, TransferRankError
from .evaluation import (
    BASELINE_SPECS,
    EvalReport,
    FoldResult,
    baseline_rank,
    leave_one_out,
    loo_folds,
    report_to_text,
    report_to_tsv,
    run_all_baselines,
    topk_best_ratio,
    topk_curve,
)
from .features import (
    DatasetFeatures,
    TaskProfile,
    PROFILES,
    build_feature_row,
    extract_features,
    get_profile,
    pairwise_feature_rows,
    size_features,
    subword_overlap,
    ttr_distance,
    type_token_ratio,
    word_overlap,
)
from .gbdt import (
    GbdtModel,
    Leaf,
    RegressionTree,
    Split,
    TrainConfig,
    export_trees,
    feature_importance,
    fit_tree,
    lambda_gradients,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
    train,
)
from .metrics import assign_relevance, dcg_at_p, ideal_dcg_at_p, ndcg_at_p, ranking_order
from .typology import (
    LinguisticDistances,
    PrecomputedDistanceTable,
    TypologyIndex,
    TypologyVectorStore,
    cosine_distance,
    load_distance_table,
    load_vectors,
    query_distances,
    save_distance_table,
    save_vectors,
)

__version__ = "0.1.0"
