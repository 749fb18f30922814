"""Multi-label learning to rank with gradient-boosted trees and multi-objective
gradient combination."""
from .combinators import Combinator, CombinatorState, Preference, get_coefficients
from .data import (LabelPromotionSpec, LetorParseError, MultiLabelDataset, QueryGroup,
                   load_cache, load_letor, parse_letor, promote_labels, quantize_label,
                   sample_query_ids, save_cache, write_letor)
from .experiment import (ExperimentConfig, explore_from_reference, generate_epsilon_bounds,
                         generate_rays, run_grid, single_objective_baselines)
from .gbm import GBMConfig, TrainingTrace, TreeEnsemble, predict, train
from .pareto import (HVIConfig, compare_preference_models, dominates, hypervolume, mwl,
                     paired_t_test, pareto_filter, vno)
from .qp import QPError, simplex_qp
from .ranking import (CostState, LossConfig, cost_state_from_scores, evaluate_costs,
                      mean_ndcg, ndcg_at_k, per_query_gradient, per_query_loss)
from .synthetic import make_conflict_dataset

__version__ = "0.1.0"
